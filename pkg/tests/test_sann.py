import numpy as np
import pytest

from sannloc import pipeline as pl
from sannloc.checks import LOSS_TOL, check_sann_loss
from sannloc.lang import parse
from sannloc.nn import bce_loss, entropy_regularizer
from sannloc.sann import (
    CorruptCheckpoint,
    SannConfig,
    SingleClassDataset,
    VersionMismatch,
    batch_from_programs,
    batch_loss,
    forward,
    forward_batch,
    init_params,
    load_checkpoint,
    loss,
    predict_batch,
    save_checkpoint,
    train,
)
from sannloc.subtrees import EncodedProgram, build_vocab, encode_program

SOURCES = [
    "int f(int a) { if (a < 0) { return -a; } return a; }",
    "boolean g(int x, int y) { return x > 3 && y <= x; }",
    "int h(int n) { int s = 0; while (n > 0) { s += n % 10; n = n / 10; } return s; }",
]


@pytest.fixture
def tiny():
    asts = [parse(s) for s in SOURCES]
    vocab = build_vocab(asts, 1)
    config = SannConfig(embed_dim=8, seed=5)
    encs = [encode_program(t, vocab, i % 2) for i, t in enumerate(asts)]
    params = init_params(vocab, config)
    params["av"][...] = np.random.default_rng(0).normal(size=8)
    return vocab, config, encs, params


def test_single_subtree_code_vector(tiny):
    vocab, config, _, params = tiny
    t = parse("int f() { return 0; }")
    enc = encode_program(t, build_vocab([t], 1), 1)
    assert enc.n == 2  # MethodDecl and Return
    one = EncodedProgram(enc.subtree_ids[1:], enc.node_id_seqs[1:], enc.spans[1:], 1)
    small = init_params(build_vocab([t], 1), config)
    out = forward(one, small, config)
    fw = forward_batch(small, batch_from_programs([one], small["E_node"].shape[0]), config)
    sv = fw["sv"][0, 0]
    assert np.allclose(out.code_vector, out.weights[0] * sv, rtol=0, atol=1e-15)


def test_forward_is_deterministic(tiny):
    _, config, encs, params = tiny
    a, b = forward(encs[0], params, config), forward(encs[0], params, config)
    assert a.prob_correct == b.prob_correct
    assert np.array_equal(a.code_vector, b.code_vector) and np.array_equal(a.weights, b.weights)
    assert len(a.attention) == encs[0].n and np.all((a.weights > 0) & (a.weights < 1))


def test_loss_without_regularizer_is_mean_bce(tiny):
    vocab, config, encs, params = tiny
    cfg0 = SannConfig(embed_dim=8, entropy_lambda=0.0, seed=5)
    outs = predict_batch(encs, params, cfg0)
    labels = [e.label for e in encs]
    want = np.mean([bce_loss(o.prob_correct, y) for o, y in zip(outs, labels)])
    assert loss(outs, labels, cfg0) == pytest.approx(want, rel=0, abs=1e-15)


def test_loss_hand_composed_batch(tiny):
    _, _, encs, params = tiny
    cfg = SannConfig(embed_dim=8, entropy_lambda=0.3, seed=5)
    outs = predict_batch(encs[:2], params, cfg)
    terms = []
    for o, y in zip(outs, (encs[0].label, encs[1].label)):
        p = o.prob_correct
        bce = -(y * np.log(p) + (1 - y) * np.log(1 - p))
        h = -0.3 * sum(w * np.log(w + 1e-8) for w in o.weights)
        terms.append(bce + h)
    assert loss(outs, [encs[0].label, encs[1].label], cfg) == pytest.approx(np.mean(terms), rel=1e-12)
    batch = batch_from_programs(encs[:2], params["E_node"].shape[0])
    assert batch_loss(forward_batch(params, batch, cfg), batch, cfg).mean() == pytest.approx(np.mean(terms), rel=1e-12)


def test_saturated_attention_has_negligible_penalty():
    assert abs(entropy_regularizer(np.full(50, 1 - 1e-9), 3.5e-5, 1e-8)) < 1e-10


def test_predict_batch_matches_forward(tiny):
    _, config, encs, params = tiny
    assert predict_batch([], params, config) == []
    for o, e in zip(predict_batch(encs, params, config), encs):
        f = forward(e, params, config)
        assert o.prob_correct == pytest.approx(f.prob_correct, rel=0, abs=1e-14)
        assert np.allclose(o.weights, f.weights, rtol=0, atol=1e-14)


def test_permutation_equivariance(tiny):
    _, config, encs, params = tiny
    e = encs[2]
    perm = np.random.default_rng(1).permutation(e.n)
    shuffled = EncodedProgram(
        tuple(e.subtree_ids[i] for i in perm), tuple(e.node_id_seqs[i] for i in perm),
        tuple(e.spans[i] for i in perm), e.label,
    )
    a, b = forward(e, params, config), forward(shuffled, params, config)
    assert np.allclose(b.weights, a.weights[perm], rtol=0, atol=1e-15)
    assert np.allclose(a.code_vector, b.code_vector, rtol=0, atol=1e-14)
    assert a.prob_correct == pytest.approx(b.prob_correct, abs=1e-14)


def test_softmax_ablation_weights_sum_to_one(tiny):
    _, _, encs, params = tiny
    cfg = SannConfig(embed_dim=8, attention="softmax", seed=5)
    for o in predict_batch(encs, params, cfg):
        assert abs(o.weights.sum() - 1.0) <= 1e-12


def test_combined_loss_gradient():
    for seed in range(3):
        assert check_sann_loss(np.random.default_rng(seed)) <= LOSS_TOL


def test_config_validation():
    with pytest.raises(ValueError):
        SannConfig(embed_dim=0)
    with pytest.raises(ValueError):
        SannConfig(entropy_lambda=-1.0)
    with pytest.raises(ValueError):
        SannConfig(epochs=3, early_stop_patience=4)


def _split(corpus):
    return pl.by_split(corpus)


def test_single_class_training_rejected(small_corpus):
    only_correct = [p for p in small_corpus if p.label == 1]
    with pytest.raises(SingleClassDataset):
        pl.train_sann(only_correct, SannConfig(embed_dim=8, epochs=1, early_stop_patience=1))


def test_patience_zero_runs_one_epoch(small_corpus):
    m = pl.train_sann(small_corpus, SannConfig(embed_dim=8, epochs=5, early_stop_patience=0))
    assert len(m.history.epochs) == 1


def test_no_validation_leakage(small_corpus):
    splits = _split(small_corpus)
    cfg = SannConfig(embed_dim=8, epochs=2, early_stop_patience=2)
    vocab = pl.vocab_for(splits["train"], cfg)
    train_enc = pl.encode_all(splits["train"], vocab, cfg)
    val_enc = pl.encode_all(splits["val"], vocab, cfg)
    val_ids = {id(e) for e in val_enc}
    touched = []
    train(train_enc, val_enc, vocab, cfg, on_backward=lambda items: touched.extend(items))
    assert len(touched) == 2 * len(train_enc)
    assert not any(id(e) in val_ids for e in touched)


def test_learns_the_sanity_corpus(small_corpus):
    cfg = SannConfig(epochs=100, early_stop_patience=100)
    m = pl.train_sann(small_corpus, cfg)
    assert pl.accuracy(m, _split(small_corpus)["train"]) >= 0.95


def test_training_is_deterministic(small_corpus, tmp_path):
    cfg = SannConfig(embed_dim=8, epochs=2, early_stop_patience=2, seed=11)
    for run in ("a", "b"):
        m = pl.train_sann(small_corpus, cfg)
        save_checkpoint(m.params, m.vocab, cfg, tmp_path / run / "model.ckpt")
    assert (tmp_path / "a/model.ckpt").read_bytes() == (tmp_path / "b/model.ckpt").read_bytes()
    assert (tmp_path / "a/vocab.json").read_bytes() == (tmp_path / "b/vocab.json").read_bytes()


def test_checkpoint_round_trip(tiny, tmp_path):
    vocab, config, encs, params = tiny
    path = tmp_path / "run" / "model.ckpt"
    save_checkpoint(params, vocab, config, path)
    p2, v2, c2 = load_checkpoint(path)
    assert c2 == config and v2.subtree_to_id == vocab.subtree_to_id
    for a, b in zip(predict_batch(encs, params, config), predict_batch(encs, p2, c2)):
        assert a.prob_correct == b.prob_correct and np.array_equal(a.weights, b.weights)


def test_truncated_checkpoint_is_corrupt(tiny, tmp_path):
    vocab, config, _, params = tiny
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, vocab, config, path)
    path.write_bytes(path.read_bytes()[:200])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(path)


def test_mismatched_vocab_is_version_mismatch(tiny, tmp_path):
    vocab, config, _, params = tiny
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, vocab, config, path)
    other = build_vocab([parse("int z() { return 1; }")], 1)
    (tmp_path / "vocab.json").write_text(other.to_json(), encoding="utf-8")
    with pytest.raises(VersionMismatch):
        load_checkpoint(path)
