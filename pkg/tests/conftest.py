import numpy as np
import pytest
from hypothesis import strategies as st

from sannloc.lang import AstNode, Kind, Span

NAMES = ["a", "b", "n", "x", "total"]


def _expr(depth):
    leaf = st.one_of(st.sampled_from(NAMES), st.integers(0, 99).map(str))
    if depth == 0:
        return leaf
    sub = _expr(depth - 1)
    return st.one_of(
        leaf,
        st.tuples(sub, st.sampled_from(["+", "-", "*", "/", "%"]), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        sub.map(lambda e: f"-({e})"),
    )


def _cond(depth):
    e = _expr(depth)
    base = st.tuples(e, st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), e).map(lambda t: f"{t[0]} {t[1]} {t[2]}")
    return st.one_of(base, st.tuples(base, st.sampled_from(["&&", "||"]), base).map(lambda t: f"{t[0]} {t[1]} {t[2]}"))


def _stmt(depth):
    simple = st.one_of(
        st.tuples(st.sampled_from(NAMES), _expr(2)).map(lambda t: f"{t[0]} = {t[1]};"),
        _expr(2).map(lambda e: f"return {e};"),
    )
    if depth == 0:
        return simple
    body = st.lists(_stmt(depth - 1), min_size=1, max_size=3).map(" ".join)
    return st.one_of(
        simple,
        st.tuples(_cond(1), body).map(lambda t: f"if ({t[0]}) {{ {t[1]} }}"),
        st.tuples(_cond(1), body, body).map(lambda t: f"if ({t[0]}) {{ {t[1]} }} else {{ {t[2]} }}"),
        st.tuples(_cond(1), body).map(lambda t: f"while ({t[0]}) {{ {t[1]} }}"),
    )


@st.composite
def programs(draw):
    """Random methods in the supported subset: int locals, arithmetic, if/else, while."""
    stmts = draw(st.lists(_stmt(2), min_size=0, max_size=4))
    decls = "int n = 0; int x = 1; int total = 0;"
    return f"int f(int a, int b) {{ {decls} {' '.join(stmts)} return total; }}"


LEAF = [Kind.IntLit, Kind.Ident, Kind.BoolLit]
LEAF_TOKENS = {Kind.IntLit: ["0", "1"], Kind.Ident: ["p", "q"], Kind.BoolLit: ["true", "false"]}
INNER = [Kind.Block, Kind.Return, Kind.If, Kind.While, Kind.Call]


@st.composite
def random_trees(draw, max_depth=5):
    """Random AstNode trees with laminar spans (grammar-free, for structural properties)."""
    counter = [0]

    def build(depth):
        start = counter[0]
        counter[0] += 1
        n_children = 0 if depth == 0 else draw(st.integers(0, 3))
        children = []
        for _ in range(n_children):
            children.append(build(depth - 1))
            counter[0] += 1
        if not children:
            kind = draw(st.sampled_from(LEAF))
            counter[0] += 1
            return AstNode(kind, draw(st.sampled_from(LEAF_TOKENS[kind])), Span(start, counter[0]))
        kind = draw(st.sampled_from(INNER))
        return AstNode(kind, None, Span(start, counter[0]))

    root = build(max_depth)
    return AstNode(Kind.MethodDecl, "f", root.span, root.children)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    """260 programs over all problems, built once per session."""
    from sannloc.forge import CorpusConfig, build_corpus

    return build_corpus(CorpusConfig(seed=3, correct_per_problem=10, incorrect_per_problem=10))


@pytest.fixture(scope="session")
def default_corpus():
    from sannloc.forge import CorpusConfig, build_corpus

    return build_corpus(CorpusConfig(seed=0))


CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the verdict of an acceptance criterion; the summary prints one line each."""

    def record(number: int, passed: bool, detail: str) -> None:
        CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        assert passed, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}")
