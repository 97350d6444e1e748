import numpy as np
import pytest

from sannloc.forge import (
    OPERATORS,
    OPERATORS_BY_NAME,
    PROBLEMS,
    PROBLEMS_BY_ID,
    ConfigError,
    CorpusConfig,
    LabeledProgram,
    NoApplicableSite,
    StudentConfig,
    build_corpus,
    corpus_summary,
    generate_correct,
    grades_from_csv,
    grades_to_csv,
    load_programs,
    mutate,
    save_programs,
    simulate_students,
    stratified_split,
)
from sannloc.forge.interp import outcome_key, run_program
from sannloc.forge.mutations import Behaviour, mutate_source
from sannloc.forge.templates import pick_names
from sannloc.lang import parse
from sannloc.localize import Category
from sannloc.subtrees import extract_subtrees


def node_spans(source):
    return {(n.span.start_byte, n.span.end_byte) for n in parse(source).root.walk()}


# templates ---------------------------------------------------------------------------

def test_at_least_five_templates_cover_required_constructs():
    assert len(PROBLEMS) >= 5
    text = " ".join(v for p in PROBLEMS for v in p.variants)
    for construct in ("if (", "for (", "while (", "charAt", ".length"):
        assert construct in text


def test_count_zero():
    assert generate_correct(PROBLEMS, 0, 1) == []


@pytest.mark.parametrize("problem", PROBLEMS, ids=lambda p: p.id)
def test_templates_match_reference_behaviour(problem):
    rng = np.random.default_rng(5)
    for prog in generate_correct([problem] * 4, 4, seed=11):
        assert prog.label == 1 and prog.errors == []
        ast = parse(prog.source)
        for _ in range(20):
            args = problem.gen_input(rng)
            want = outcome_key(("ok", problem.reference(*[list(a) if isinstance(a, list) else a for a in args])))
            assert outcome_key(run_program(ast, args)) == want, (prog.source, args)


def test_every_variant_renders_and_parses():
    rng = np.random.default_rng(0)
    for problem in PROBLEMS:
        for v in range(len(problem.variants)):
            for _ in range(5):
                parse(problem.render(v, pick_names(problem.roles, rng), rng))


def test_identifier_randomization_keeps_structure():
    problem = PROBLEMS_BY_ID["countEvens"]
    a = problem.render(0, pick_names(problem.roles, np.random.default_rng(1)), np.random.default_rng(9))
    b = problem.render(0, pick_names(problem.roles, np.random.default_rng(2)), np.random.default_rng(9))
    assert a != b
    sa = [s.serialization for s in extract_subtrees(parse(a))]
    sb = [s.serialization for s in extract_subtrees(parse(b))]
    assert sa == sb


# mutation ----------------------------------------------------------------------------

def test_operator_catalog():
    assert len(OPERATORS) >= 12
    cats = {op.category for op in OPERATORS}
    assert cats == set(Category)
    for name in ("and_to_bitand", "or_to_bitor", "comparison_off_by_one", "swap_branches", "wrong_loop_bound",
                 "negate_condition", "early_return", "eq_to_assign", "int_division_order",
                 "accumulator_reset", "paren_removal", "mod_div_swap"):
        assert name in OPERATORS_BY_NAME


def test_and_to_bitand_label():
    src = "boolean f(String s, int i) {\n    return i < s.length() && s.charAt(i) == 'a';\n}\n"
    behaviour = Behaviour(parse(src), [["abc", 0], ["abc", 5], ["", 0]])
    out, labels, names = mutate_source(src, behaviour, 1, np.random.default_rng(0), [OPERATORS_BY_NAME["and_to_bitand"]])
    assert names == ["and_to_bitand"] and "&&" not in out and " & " in out
    (lab,) = labels
    assert lab.category is Category.CompilableSyntactic
    node = next(n for n in parse(out).root.walk() if n.token == "&")
    assert (lab.span.start_byte, lab.span.end_byte) == (node.span.start_byte, node.span.end_byte)


def test_loop_bound_off_by_one_label():
    src = "int f(int n) {\n    int s = 0;\n    for (int i = 0; i < n; i++) {\n        s = s + i;\n    }\n    return s;\n}\n"
    behaviour = Behaviour(parse(src), [[0], [3], [7]])
    out, labels, _ = mutate_source(src, behaviour, 1, np.random.default_rng(0), [OPERATORS_BY_NAME["comparison_off_by_one"]])
    assert "i <= n" in out
    (lab,) = labels
    assert lab.category is Category.Strategic
    assert out[lab.span.start_byte:lab.span.end_byte] == "i <= n"


def test_semantically_inert_site_is_rejected():
    # && on plain booleans behaves exactly like &
    src = "boolean f(boolean a, boolean b) {\n    return a && b;\n}\n"
    behaviour = Behaviour(parse(src), [[True, True], [True, False], [False, True], [False, False]])
    with pytest.raises(NoApplicableSite):
        mutate_source(src, behaviour, 1, np.random.default_rng(0), [OPERATORS_BY_NAME["and_to_bitand"]])


def test_k3_gives_three_distinct_labels():
    base = generate_correct([PROBLEMS_BY_ID["caughtSpeeding"]], 1, seed=4)[0]
    m = mutate(base, k=3, seed=2)
    assert m.label == 0 and len(m.errors) == 3
    assert len({e.span for e in m.errors}) == 3
    assert len(m.provenance["operators"]) == 3


def test_mutants_are_valid(small_corpus):
    for p in small_corpus:
        if p.label == 1:
            continue
        spans = node_spans(p.source)
        for e in p.errors:
            assert (e.span.start_byte, e.span.end_byte) in spans
        behaviour = Behaviour(parse(p.source), PROBLEMS_BY_ID[p.problem_id].reference_inputs())
        reference_outcomes = [outcome_key(("ok", PROBLEMS_BY_ID[p.problem_id].reference(*x)))
                              for x in PROBLEMS_BY_ID[p.problem_id].reference_inputs()]
        assert behaviour.expected != reference_outcomes


def test_mutate_preconditions():
    base = generate_correct(PROBLEMS[:1], 1, seed=0)[0]
    with pytest.raises(ValueError):
        mutate(base, k=0)
    bad = mutate(base, k=1)
    with pytest.raises(ValueError):
        mutate(bad, k=1)
    with pytest.raises(NoApplicableSite):
        mutate(base, k=200)


def test_labeled_program_invariant():
    with pytest.raises(ValueError):
        LabeledProgram("x", "", 0, [], "p", {})


# corpus ------------------------------------------------------------------------------

def test_corpus_splits_and_ratio(small_corpus):
    n = len(small_corpus)
    ids = [p.id for p in small_corpus]
    assert len(set(ids)) == n
    n_train = sum(p.split == "train" for p in small_corpus)
    assert abs(n_train - 0.8 * n) <= 1
    # per problem/class share stays close to the global ratio
    for pid in {p.problem_id for p in small_corpus}:
        for lab in (0, 1):
            group = [p for p in small_corpus if p.problem_id == pid and p.label == lab]
            share = sum(p.split == "train" for p in group) / len(group)
            assert abs(share - 0.8) <= 0.11


def test_stratified_split_totals():
    strata = [f"s{i % 7}" for i in range(523)]
    out = stratified_split(strata, (0.8, 0.1, 0.1), 3)
    assert out.count("train") == 418 and out.count("val") == 52 and out.count("test") == 53


def test_corpus_determinism(tmp_path):
    cfg = CorpusConfig(seed=5, problems=["sum13", "countHi"], correct_per_problem=4, incorrect_per_problem=6)
    save_programs(tmp_path / "a.jsonl", build_corpus(cfg))
    save_programs(tmp_path / "b.jsonl", build_corpus(cfg))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = load_programs(tmp_path / "a.jsonl")
    assert [p.to_obj() for p in back] == [p.to_obj() for p in build_corpus(cfg)]


def test_single_error_split():
    cfg = CorpusConfig(seed=1, problems=["redTicket"], correct_per_problem=0, incorrect_per_problem=30,
                       single_error_splits=["test"])
    progs = build_corpus(cfg)
    assert all(len(p.errors) == 1 for p in progs if p.split == "test")


@pytest.mark.parametrize("bad,field", [
    ({"split_ratios": [0.8, 0.1, 0.2]}, "split_ratios"),
    ({"problems": ["nope"]}, "problems"),
    ({"k_mean": 20.0}, "k_mean"),
    ({"operators": ["zap"]}, "operators"),
    ({"bogus": 1}, "bogus"),
])
def test_corpus_config_validation(bad, field):
    with pytest.raises(ConfigError) as exc:
        CorpusConfig.from_dict(bad)
    assert exc.value.field == field


@pytest.mark.slow
def test_default_corpus_mean_errors(default_corpus):
    summary = corpus_summary(default_corpus)
    assert summary["total"] >= 2000
    assert abs(summary["mean_errors_per_incorrect"] - 2.6) <= 0.2
    ks = [len(p.errors) for p in default_corpus if p.label == 0]
    assert min(ks) >= 1 and max(ks) <= 10
    for p in default_corpus[::50]:
        parse(p.source)


# students ----------------------------------------------------------------------------

def _small(**kw):
    base = dict(n_students=40, pool_size=3, seed=2)
    base.update(kw)
    return StudentConfig(**base)


def test_degenerate_mastery_all_correct():
    traces, grades, _ = simulate_students(_small(slip=0.0, guess=0.0, p0=1.0))
    assert all(e.a == 1 for t in traces for e in t.events)
    assert all(len(t.events) == len(PROBLEMS) for t in traces)
    assert np.mean([g.grade for g in grades]) > 0.95


def test_guess_one_all_correct():
    traces, _, programs = simulate_students(_small(slip=0.0, guess=1.0, p0=0.0, learn=0.0))
    assert all(e.a == 1 for t in traces for e in t.events)
    assert all(p.label == 1 for p in programs)


def test_trace_program_consistency():
    traces, grades, programs = simulate_students(_small())
    by_id = {p.id: p for p in programs}
    assert len(by_id) == len(programs)
    for t in traces:
        qs = [e.q for e in t.events]
        assert qs == sorted(qs)
        for e in t.events:
            p = by_id[e.program_id]
            assert p.label == e.a and p.student_id == t.student_id and p.split == t.split
            assert p.problem_id == PROBLEMS[e.q - 1].id
    assert all(0.0 <= g.grade <= 1.0 for g in grades)
    assert grades_from_csv(grades_to_csv(grades)) == grades


def test_failed_attempts_carry_skill_category():
    cfg = _small(n_students=200, slip=0.0, guess=0.0, p0=0.0, learn=0.0, max_attempts=1, pool_size=8)
    _, _, programs = simulate_students(cfg)
    loops = [e.category.value for p in programs if cfg.skill_map[p.problem_id] == "loops" for e in p.errors]
    conds = [e.category.value for p in programs if cfg.skill_map[p.problem_id] == "conditionals" for e in p.errors]
    assert loops.count("Conceptual") / len(loops) > conds.count("Conceptual") / len(conds)


def _expected_rates(cfg, skill):
    """Forward pass over the two-state mastery chain of one skill.

    Returns, per student, the expected number of first-attempt successes and of attempts on
    the skill's problems, accounting for retries that stop at the first success.
    """
    p0, learn, guess, slip = (cfg.param(n, skill) for n in ("p0", "learn", "guess", "slip"))
    d = np.array([1 - p0, p0])  # P(unknown), P(known)
    c = np.array([guess, 1 - slip])
    first = attempts = 0.0
    for pid in cfg.problems:
        if cfg.skill_map[pid] != skill:
            continue
        active, done = d.copy(), np.zeros(2)
        for t in range(cfg.max_attempts):
            attempts += active.sum()
            ok = active * c
            if t == 0:
                first += ok.sum()
            fail = active - ok
            moved = np.array([-learn, learn])
            done = done + ok + ok[0] * moved
            active = fail + fail[0] * moved
        d = done + active
    return first, attempts


def test_simulator_matches_closed_form():
    cfg = StudentConfig(n_students=1000, pool_size=2, seed=7)
    traces, _, _ = simulate_students(cfg)
    for skill in cfg.skills:
        qs = {i + 1 for i, pid in enumerate(cfg.problems) if cfg.skill_map[pid] == skill}
        first, attempts = [], []
        for t in traces:
            ev = [e for e in t.events if e.q in qs]
            attempts.append(len(ev))
            seen, f = set(), 0
            for e in ev:
                if e.q not in seen:
                    seen.add(e.q)
                    f += e.a
            first.append(f)
        want_first, want_attempts = _expected_rates(cfg, skill)
        for values, want in ((first, want_first), (attempts, want_attempts)):
            values = np.asarray(values, dtype=float)
            sigma = values.std(ddof=1) / np.sqrt(len(values))
            assert abs(values.mean() - want) <= 2 * sigma, (skill, values.mean(), want, sigma)


@pytest.mark.parametrize("bad,field", [
    ({"slip": 1.5}, "slip"),
    ({"n_students": 0}, "n_students"),
    ({"max_attempts": 0}, "max_attempts"),
    ({"split_ratios": [0.5, 0.5, 0.5]}, "split_ratios"),
    ({"skill_category": {"loops": "Nope"}}, "skill_category"),
])
def test_student_config_validation(bad, field):
    with pytest.raises(ConfigError) as exc:
        StudentConfig.from_dict(bad)
    assert exc.value.field == field
