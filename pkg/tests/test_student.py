import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sannloc.forge import Event, StudentConfig, StudentTrace, simulate_students
from sannloc.student import (
    DktConfig,
    DktModel,
    GradeConfig,
    SingleClassSet,
    SingleStudentSplitViolation,
    TraceTooShort,
    ZeroVarianceTruth,
    assemble_grade_features,
    auc,
    clamp_grade,
    dkt_auc,
    dkt_predict,
    dkt_scores,
    dkt_train,
    encode_dkt_step,
    grade_predict,
    grade_train,
    load_dkt,
    load_grade,
    regression_metrics,
    save_dkt,
    save_grade,
)
from sannloc.student.dkt import IndexOutOfRange, init_dkt
from sannloc.student.grades import ShapeMismatch

# encoding ----------------------------------------------------------------------------


def test_encode_worked_examples():
    assert encode_dkt_step(1, 1, 2).tolist() == [1, 0, 0, 0]
    assert encode_dkt_step(1, 0, 2).tolist() == [0, 0, 1, 0]
    assert encode_dkt_step(2, 0, 3).tolist() == [0, 0, 0, 0, 1, 0]


def test_encode_exhaustive():
    for M in range(1, 6):
        # table built by enumeration: successes fill the first half in order, failures the second
        table = {}
        pos = 0
        for a in (1, 0):
            for q in range(1, M + 1):
                table[(q, a)] = pos
                pos += 1
        for (q, a), want in table.items():
            x = encode_dkt_step(q, a, M)
            assert x.shape == (2 * M,) and x.sum() == 1 and x[want] == 1
        encodings = {tuple(encode_dkt_step(q, a, M)) for q, a in table}
        assert len(encodings) == 2 * M


@pytest.mark.parametrize("q", [0, 4, -1])
def test_encode_out_of_range(q):
    with pytest.raises(IndexOutOfRange):
        encode_dkt_step(q, 1, 3)


# metrics -----------------------------------------------------------------------------

def test_auc_hand_values():
    assert auc([(0.9, 1), (0.8, 0), (0.7, 1), (0.1, 0)]) == 0.75
    assert auc([(0.9, 1), (0.8, 1), (0.2, 0)]) == 1.0
    assert auc([(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]) == 0.5
    with pytest.raises(SingleClassSet):
        auc([(0.1, 1), (0.2, 1)])


def brute_auc(pairs):
    pos = [s for s, y in pairs if y == 1]
    neg = [s for s, y in pairs if y == 0]
    fav = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return fav / (len(pos) * len(neg))


score_sets = st.lists(st.tuples(st.integers(0, 20).map(lambda v: v / 20), st.integers(0, 1)), min_size=2, max_size=40).filter(
    lambda xs: len({y for _, y in xs}) == 2
)


@settings(max_examples=300, deadline=None)
@given(score_sets)
def test_auc_matches_pair_enumeration(pairs):
    assert auc(pairs) == pytest.approx(brute_auc(pairs), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(score_sets, st.floats(0.1, 5), st.floats(-3, 3))
def test_auc_monotone_invariance(pairs, scale, shift):
    transformed = [(np.exp(scale * s) + shift, y) for s, y in pairs]
    assert auc(transformed) == auc(pairs)


def test_regression_metrics_hand_values():
    assert regression_metrics([0.2, 0.4, 0.9], [0.2, 0.4, 0.9]) == (0.0, 1.0)
    assert regression_metrics([0.0, 1.0], [1.0, 0.0]) == (1.0, -3.0)
    t = [0.1, 0.5, 0.6]
    rmse, r2 = regression_metrics([0.4] * 3, t)
    assert r2 == pytest.approx(0.0, abs=1e-15)
    assert rmse == pytest.approx(np.sqrt(((0.3 ** 2) + (0.1 ** 2) + (0.2 ** 2)) / 3), abs=1e-15)


def test_regression_zero_variance():
    with pytest.raises(ZeroVarianceTruth) as exc:
        regression_metrics([0.5, 0.7], [0.7, 0.7])
    assert exc.value.rmse == pytest.approx(np.sqrt(0.02))
    with pytest.raises(ValueError):
        regression_metrics([0.1], [0.2])


# grade features ----------------------------------------------------------------------

def trace_with(events):
    return StudentTrace("s", [Event(q, a, pid) for q, a, pid in events], [])


def test_features_zero_submissions():
    cv = {"x": np.ones(2)}
    rows = assemble_grade_features(trace_with([]), cv, 3)
    assert rows.shape == (3, 30 * 2 + 4)
    assert np.all(rows[:, :60] == 0)
    assert rows[:, 60:63].tolist() == [[0, 0, 0]] * 3
    assert rows[:, 63].tolist() == [1 / 3, 2 / 3, 1.0]


def test_features_three_submissions_hand_row():
    cv = {"a": np.array([1.0, 2.0]), "b": np.array([3.0, 4.0]), "c": np.array([5.0, 6.0])}
    rows = assemble_grade_features(trace_with([(2, 0, "a"), (2, 0, "b"), (2, 1, "c")]), cv, 2)
    want = np.zeros(64)
    want[54:60] = [1, 2, 3, 4, 5, 6]  # slots 28..30
    want[60:] = [1, 2, 3, 1.0]
    assert rows[1].tolist() == want.tolist()
    assert rows[0].tolist() == [0.0] * 63 + [0.5]


def test_features_keep_newest_thirty():
    cv = {f"p{i}": np.array([float(i)]) for i in range(31)}
    rows = assemble_grade_features(trace_with([(1, 0, f"p{i}") for i in range(31)]), cv, 1)
    assert rows[0, :30].tolist() == [float(i) for i in range(1, 31)]
    assert rows[0, 30:33].tolist() == [0, 31, 31]


def test_features_idempotent():
    cv = {"a": np.array([1.0]), "b": np.array([2.0])}
    t = trace_with([(1, 0, "a"), (2, 1, "b")])
    assert np.array_equal(assemble_grade_features(t, cv, 2), assemble_grade_features(t, cv, 2))


# grade model -------------------------------------------------------------------------

def test_clamp():
    assert clamp_grade(np.array([1.3, -0.2, 0.4])).tolist() == [1.0, 0.0, 0.4]


def test_constant_grade_cohort():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 4, 6))
    model = grade_train(X, [0.7] * 40, GradeConfig(hidden=8, dense=4, epochs=150, lr=0.01, seed=1))
    preds = grade_predict(X, model)
    assert np.all(np.abs(preds - 0.7) <= 0.05)


def test_grade_shape_mismatch(tmp_path):
    X = np.zeros((3, 2, 5))
    with pytest.raises(ShapeMismatch):
        grade_train(X, [0.1, 0.2], GradeConfig(hidden=2, dense=2, epochs=1))
    model = grade_train(X, [0.1, 0.2, 0.3], GradeConfig(hidden=2, dense=2, epochs=1))
    with pytest.raises(ShapeMismatch):
        grade_predict(np.zeros((1, 2, 4)), model)
    save_grade(model, tmp_path / "g.ckpt")
    assert np.array_equal(grade_predict(X, load_grade(tmp_path / "g.ckpt")), grade_predict(X, model))


# DKT ---------------------------------------------------------------------------------

def rule_traces(n, length, M, start=0):
    """Problem q is solved iff q is odd; problems visited in a per-student random order."""
    rng = np.random.default_rng(start)
    out = []
    for s in range(n):
        qs = rng.integers(1, M + 1, size=length)
        out.append(StudentTrace(f"r{start}-{s}", [Event(int(q), int(q % 2), f"r{start}-{s}-{t}") for t, q in enumerate(qs)], []))
    return out


@pytest.fixture(scope="module")
def cohort():
    cfg = StudentConfig(n_students=60, pool_size=3, seed=4)
    traces, _, programs = simulate_students(cfg)
    split = {k: [t for t in traces if t.split == k] for k in ("train", "val", "test")}
    rng = np.random.default_rng(0)
    code = {p.id: rng.normal(size=3) for p in programs}
    return cfg, split, code


def test_memorization_sanity():
    train = rule_traces(20, 10, 4)
    val = rule_traces(5, 10, 4, start=1)
    model = dkt_train(train, val, 4, DktConfig(hidden=16, epochs=60, early_stop_patience=60, lr=0.02))
    assert dkt_auc(model, train) >= 0.9


def test_ablation_identity(cohort):
    cfg, split, code = cohort
    M = len(cfg.problems)
    zeros = {k: np.zeros_like(v) for k, v in code.items()}
    conf = DktConfig(hidden=12, epochs=3, seed=5)
    plain = dkt_train(split["train"], split["val"], M, conf)
    ablated = dkt_train(split["train"], split["val"], M, conf, code_vectors=zeros)
    a = dkt_scores(plain, split["test"])
    b = dkt_scores(ablated, split["test"], zeros)
    assert a == b
    for name in plain.params:
        assert np.array_equal(plain.params[name], ablated.params[name])


def test_dkt_determinism_and_eval_mode(cohort, tmp_path):
    cfg, split, code = cohort
    M = len(cfg.problems)
    conf = DktConfig(hidden=10, epochs=2, seed=2)
    m1 = dkt_train(split["train"], split["val"], M, conf, code_vectors=code)
    m2 = dkt_train(split["train"], split["val"], M, conf, code_vectors=code)
    assert dkt_auc(m1, split["test"], code) == dkt_auc(m2, split["test"], code)
    prefix = split["test"][0].events[:3]
    y1, y2 = dkt_predict(m1, prefix, code), dkt_predict(m1, prefix, code)
    assert np.array_equal(y1, y2)
    assert y1.shape == (M,) and np.all((y1 > 0) & (y1 < 1))
    for k in (1, 5, len(split["test"][0].events)):
        assert dkt_predict(m1, split["test"][0].events[:k], code).shape == (M,)
    save_dkt(m1, tmp_path / "d.ckpt")
    assert dkt_scores(load_dkt(tmp_path / "d.ckpt"), split["test"], code) == dkt_scores(m1, split["test"], code)


def test_untrained_model_is_chance_level():
    cfg = StudentConfig(n_students=500, pool_size=2, seed=8)
    traces, _, _ = simulate_students(cfg)
    M = len(cfg.problems)
    model = DktModel(init_dkt(M, 0, DktConfig(seed=3)), M, 0, DktConfig(seed=3))
    rows = dkt_scores(model, traces)
    assert len(rows) >= 5000
    assert abs(auc((r[3], r[4]) for r in rows) - 0.5) <= 0.05


def test_dkt_errors(cohort):
    cfg, split, _ = cohort
    M = len(cfg.problems)
    short = StudentTrace("x", [Event(1, 1, "p")], [])
    with pytest.raises(TraceTooShort):
        dkt_train(split["train"] + [short], split["val"], M, DktConfig(epochs=1))
    with pytest.raises(SingleStudentSplitViolation):
        dkt_train(split["train"], split["train"][:2], M, DktConfig(epochs=1))
