"""Mutation operators that inject behaviour-changing logical errors with span ground truth.

An operator proposes candidate sites on an AST. A site is a set of text edits plus the
region that should be labeled once the edits are applied. Sites are validated with the
reference interpreter: the mutant must parse, be well typed and change the result on at
least one reference input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..lang import Ast, AstNode, Kind, ParseError, Span, parse
from ..localize import Category, ErrorLabel
from .interp import InterpTypeError, outcome_key, run_program

MAX_STEPS = 2000


class NoApplicableSite(ValueError):
    pass


@dataclass(frozen=True)
class Edit:
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class Site:
    operator: str
    category: Category
    edits: tuple[Edit, ...]
    # region (original coordinates) whose enclosing node is labeled; None = hull of the edits
    label_region: tuple[int, int] | None = None

    def footprint(self) -> tuple[int, int]:
        return min(e.start for e in self.edits), max(e.end for e in self.edits)


@dataclass(frozen=True)
class MutationOperator:
    name: str
    category: Category
    find_sites: Callable[[Ast, str], list[Site]]


# helpers ------------------------------------------------------------------------------

def _text(source: str, node: AstNode) -> str:
    return source[node.span.start_byte:node.span.end_byte]


def _parents(root: AstNode) -> dict[int, AstNode]:
    parents = {}
    for node in root.walk():
        for c in node.children:
            parents[id(c)] = node
    return parents


def _op_token_edit(source: str, node: AstNode, new_op: str) -> Edit:
    """Replace the operator token that sits between a BinaryOp's two operands."""
    left, right = node.children
    gap_start, gap_end = left.span.end_byte, right.span.start_byte
    gap = source[gap_start:gap_end]
    # parenthesized operands end/start inside the gap only through whitespace
    pos = gap.find(node.token)
    start = gap_start + pos
    return Edit(start, start + len(node.token), new_op)


def _wrapped_in_parens(text: str) -> bool:
    if not (text.startswith("(") and text.endswith(")")):
        return False
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0 and i != len(text) - 1:
                return False
    return True


def _binary_sites(name, category, swaps: dict[str, str]):
    def find(ast: Ast, source: str) -> list[Site]:
        sites = []
        for node in ast.root.walk():
            if node.kind is Kind.BinaryOp and node.token in swaps:
                sites.append(Site(name, category, (_op_token_edit(source, node, swaps[node.token]),)))
        return sites

    return find


def _loops(root: AstNode) -> Iterable[AstNode]:
    return (n for n in root.walk() if n.kind in (Kind.For, Kind.While))


def _loop_body(loop: AstNode) -> AstNode:
    return loop.children[-1]


def _loop_cond(loop: AstNode) -> AstNode:
    return loop.children[1] if loop.kind is Kind.For else loop.children[0]


def _declared_names(root: AstNode) -> list[str]:
    names = []
    for node in root.walk():
        if node.kind in (Kind.Param, Kind.VarDecl):
            name = node.children[0].token
            if name not in names:
                names.append(name)
    return names


# operators ------------------------------------------------------------------------------

def _swap_branches(ast: Ast, source: str) -> list[Site]:
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.If and len(node.children) == 3:
            _, then, other = node.children
            if then.kind is Kind.Block and other.kind is Kind.Block:
                middle = source[then.span.end_byte:other.span.start_byte]
                text = _text(source, other) + middle + _text(source, then)
                edit = Edit(then.span.start_byte, other.span.end_byte, text)
                sites.append(Site("swap_branches", Category.Strategic, (edit,), (node.span.start_byte, node.span.end_byte)))
    return sites


def _wrong_loop_bound(ast: Ast, source: str) -> list[Site]:
    names = _declared_names(ast.root)
    sites = []
    for loop in _loops(ast.root):
        cond = _loop_cond(loop)
        if cond.kind is not Kind.BinaryOp or cond.token not in ("<", "<=", ">", ">="):
            continue
        left, bound = cond.children
        used = {n.token for n in cond.walk() if n.kind is Kind.Ident}
        for name in names:
            if name in used:
                continue
            edit = Edit(bound.span.start_byte, bound.span.end_byte, name)
            sites.append(Site("wrong_loop_bound", Category.Strategic, (edit,), (cond.span.start_byte, cond.span.end_byte)))
    return sites


def _negate_condition(ast: Ast, source: str) -> list[Site]:
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.If:
            cond = node.children[0]
            edit = Edit(cond.span.start_byte, cond.span.end_byte, f"!({_text(source, cond)})")
            sites.append(Site("negate_condition", Category.Strategic, (edit,)))
    return sites


def _early_return(ast: Ast, source: str) -> list[Site]:
    """Copy the return that follows a loop into the end of the loop body."""
    sites = []
    for block in ast.root.walk():
        if block.kind not in (Kind.MethodDecl, Kind.Block):
            continue
        stmts = block.children
        for loop, nxt in zip(stmts, stmts[1:]):
            body = loop.children[-1] if loop.kind in (Kind.For, Kind.While) else None
            if body is None or body.kind is not Kind.Block or nxt.kind is not Kind.Return:
                continue
            insert_at = body.span.end_byte - 1
            edit = Edit(insert_at, insert_at, " " + _text(source, nxt) + " ")
            sites.append(Site("early_return", Category.Strategic, (edit,)))
    return sites


def _eq_to_assign(ast: Ast, source: str) -> list[Site]:
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.BinaryOp and node.token == "==":
            left, right = node.children
            if left.kind is Kind.Ident and right.kind is Kind.BoolLit:
                sites.append(Site("eq_to_assign", Category.Conceptual, (_op_token_edit(source, node, "="),)))
    return sites


def _int_division_order(ast: Ast, source: str) -> list[Site]:
    """`a * b / c` -> `a / c * b`: the division now truncates before the multiply."""
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.BinaryOp and node.token == "/":
            left, c = node.children
            if left.kind is Kind.BinaryOp and left.token == "*" and not _wrapped_in_parens(_text(source, left)):
                a, b = left.children
                text = f"{_text(source, a)} / {_text(source, c)} * {_text(source, b)}"
                sites.append(Site("int_division_order", Category.Conceptual, (Edit(node.span.start_byte, node.span.end_byte, text),)))
    return sites


def _accumulator_reset(ast: Ast, source: str) -> list[Site]:
    """Re-initialise an accumulator declared before a loop at the top of the loop body."""
    sites = []
    for block in ast.root.walk():
        if block.kind not in (Kind.MethodDecl, Kind.Block):
            continue
        inits = {}
        for stmt in block.children:
            if stmt.kind is Kind.VarDecl and len(stmt.children) == 2 and stmt.children[1].kind in (Kind.IntLit, Kind.BoolLit):
                inits[stmt.children[0].token] = stmt.children[1].token
            if stmt.kind not in (Kind.For, Kind.While):
                continue
            body = _loop_body(stmt)
            if body.kind is not Kind.Block:
                continue
            assigned = {
                n.children[0].token
                for n in body.walk()
                if n.kind is Kind.Assign and n.children[0].kind is Kind.Ident
            }
            for name in sorted(assigned & inits.keys()):
                at = body.span.start_byte + 1
                edit = Edit(at, at, f" {name} = {inits[name]};")
                sites.append(Site("accumulator_reset", Category.Conceptual, (edit,)))
    return sites


def _paren_removal(ast: Ast, source: str) -> list[Site]:
    parents = _parents(ast.root)
    sites = []
    for node in ast.root.walk():
        parent = parents.get(id(node))
        if parent is None or parent.kind not in (Kind.BinaryOp, Kind.UnaryOp):
            continue
        text = _text(source, node)
        if node.kind is Kind.BinaryOp and _wrapped_in_parens(text):
            s, e = node.span.start_byte, node.span.end_byte
            edits = (Edit(s, s + 1, ""), Edit(e - 1, e, ""))
            sites.append(Site("paren_removal", Category.Conceptual, edits, (parent.span.start_byte, parent.span.end_byte)))
    return sites


def _constant_off_by_one(ast: Ast, source: str) -> list[Site]:
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.IntLit:
            value = int(node.token)
            for new in (value + 1, value - 1):
                if new >= 0:
                    sites.append(Site("constant_off_by_one", Category.Strategic,
                                      (Edit(node.span.start_byte, node.span.end_byte, str(new)),)))
    return sites


def _flip_bool_literal(ast: Ast, source: str) -> list[Site]:
    sites = []
    for node in ast.root.walk():
        if node.kind is Kind.BoolLit:
            new = "false" if node.token == "true" else "true"
            sites.append(Site("flip_bool_literal", Category.Strategic, (Edit(node.span.start_byte, node.span.end_byte, new),)))
    return sites


OPERATORS: tuple[MutationOperator, ...] = (
    MutationOperator("and_to_bitand", Category.CompilableSyntactic,
                     _binary_sites("and_to_bitand", Category.CompilableSyntactic, {"&&": "&"})),
    MutationOperator("or_to_bitor", Category.CompilableSyntactic,
                     _binary_sites("or_to_bitor", Category.CompilableSyntactic, {"||": "|"})),
    MutationOperator("comparison_off_by_one", Category.Strategic,
                     _binary_sites("comparison_off_by_one", Category.Strategic,
                                   {"<": "<=", "<=": "<", ">": ">=", ">=": ">"})),
    MutationOperator("and_or_swap", Category.Strategic,
                     _binary_sites("and_or_swap", Category.Strategic, {"&&": "||", "||": "&&"})),
    MutationOperator("equality_flip", Category.Strategic,
                     _binary_sites("equality_flip", Category.Strategic, {"==": "!=", "!=": "=="})),
    MutationOperator("constant_off_by_one", Category.Strategic, _constant_off_by_one),
    MutationOperator("flip_bool_literal", Category.Strategic, _flip_bool_literal),
    MutationOperator("swap_branches", Category.Strategic, _swap_branches),
    MutationOperator("wrong_loop_bound", Category.Strategic, _wrong_loop_bound),
    MutationOperator("negate_condition", Category.Strategic, _negate_condition),
    MutationOperator("early_return", Category.Strategic, _early_return),
    MutationOperator("eq_to_assign", Category.Conceptual, _eq_to_assign),
    MutationOperator("int_division_order", Category.Conceptual, _int_division_order),
    MutationOperator("accumulator_reset", Category.Conceptual, _accumulator_reset),
    MutationOperator("paren_removal", Category.Conceptual, _paren_removal),
    MutationOperator("mod_div_swap", Category.Conceptual,
                     _binary_sites("mod_div_swap", Category.Conceptual, {"%": "/", "/": "%"})),
    MutationOperator("plus_minus_swap", Category.Conceptual,
                     _binary_sites("plus_minus_swap", Category.Conceptual, {"+": "-", "-": "+"})),
)

OPERATORS_BY_NAME = {op.name: op for op in OPERATORS}


# applying edits -----------------------------------------------------------------------------

def apply_edits(source: str, edits: Sequence[Edit]) -> str:
    ordered = sorted(edits, key=lambda e: (e.start, e.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end or (b.start == a.start and a.start == a.end and b.start == b.end):
            raise ValueError("overlapping edits")
    out = source
    for e in reversed(ordered):
        out = out[:e.start] + e.text + out[e.end:]
    return out


def _shift(pos: int, edits: Sequence[Edit], inclusive: bool) -> int:
    """New position of original offset `pos` after applying `edits`."""
    delta = 0
    for e in edits:
        if e.end < pos or (e.end == pos and (inclusive or e.start < e.end)):
            delta += len(e.text) - (e.end - e.start)
    return pos + delta


def _mapped_region(site: Site, all_edits: Sequence[Edit]) -> tuple[int, int] | None:
    if site.label_region is not None:
        s, e = site.label_region
        for ed in all_edits:
            inside = s <= ed.start and ed.end <= e
            outside = ed.end <= s or ed.start >= e
            if not (inside or outside):
                return None
        return _shift(s, all_edits, inclusive=False), _shift(e, all_edits, inclusive=True)
    lo = hi = None
    for ed in site.edits:
        start = _shift(ed.start, all_edits, inclusive=False)
        text = ed.text
        stripped = text.strip()
        if stripped:
            start += len(text) - len(text.lstrip())
            end = start + len(stripped)
        else:
            end = start
        lo = start if lo is None else min(lo, start)
        hi = end if hi is None else max(hi, end)
    return lo, hi


def enclosing_node(ast: Ast, region: tuple[int, int]) -> AstNode:
    """Smallest (then deepest) node whose span covers the region."""
    s, e = region
    best = ast.root
    stack = [ast.root]
    while stack:
        node = stack.pop()
        sp = node.span
        if sp.start_byte <= s and e <= sp.end_byte:
            if len(sp) <= len(best.span):
                best = node
            stack.extend(node.children)
    return best


# validation ----------------------------------------------------------------------------------

class Behaviour:
    """Reference outcomes of a correct program, used to check that a mutant differs."""

    def __init__(self, ast: Ast, inputs: Sequence[list]):
        self.inputs = [list(x) for x in inputs]
        self.expected = [outcome_key(run_program(ast, _copy(x), MAX_STEPS)) for x in self.inputs]

    def differs(self, ast: Ast) -> bool:
        """True if the mutant changes at least one outcome; raises on ill-typed code."""
        for x, want in zip(self.inputs, self.expected):
            if outcome_key(run_program(ast, _copy(x), MAX_STEPS)) != want:
                return True
        return False


def _copy(args):
    return [list(v) if isinstance(v, list) else v for v in args]


def try_mutant(source: str, edits: Sequence[Edit], behaviour: Behaviour) -> Ast | None:
    mutated = apply_edits(source, edits)
    try:
        ast = parse(mutated)
        if behaviour.differs(ast):
            return ast
    except (ParseError, InterpTypeError):
        pass
    return None


def candidate_sites(ast: Ast, source: str, operators: Sequence[MutationOperator] = OPERATORS) -> list[Site]:
    sites = []
    for op in operators:
        sites.extend(op.find_sites(ast, source))
    return sites


def _disjoint(site: Site, chosen: Sequence[Site]) -> bool:
    for other in chosen:
        for a in site.edits:
            for b in other.edits:
                if a.start < b.end and b.start < a.end:
                    return False
                if a.start == b.start or a.end == b.end or a.start == b.end or a.end == b.start:
                    return False
    return True


def mutate_source(
    source: str,
    behaviour: Behaviour,
    k: int,
    rng: np.random.Generator,
    operators: Sequence[MutationOperator] = OPERATORS,
    category_weights: dict[str, float] | None = None,
) -> tuple[str, list[ErrorLabel], list[str]]:
    """Inject k validated errors at distinct sites; returns (source, labels, operator names)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ast = parse(source)
    sites = candidate_sites(ast, source, operators)
    chosen: list[Site] = []
    result = None
    for site in _weighted_order(sites, rng, category_weights):
        if len(chosen) == k:
            break
        if not _disjoint(site, chosen) or try_mutant(source, site.edits, behaviour) is None:
            continue
        combined = _combine(source, chosen + [site], behaviour)
        if combined is not None:
            chosen.append(site)
            result = combined
    if len(chosen) < k:
        raise NoApplicableSite(f"only {len(chosen)} compatible mutation sites, {k} requested")
    mutated, labels = result
    order_idx = sorted(range(len(labels)), key=lambda i: (labels[i].span.start_byte, labels[i].span.end_byte))
    return mutated, [labels[i] for i in order_idx], [chosen[i].operator for i in order_idx]


def _combine(source: str, sites: Sequence[Site], behaviour: Behaviour):
    """Apply all sites together; None unless the result differs and every label is a distinct node."""
    edits = [e for s in sites for e in s.edits]
    mutated_ast = try_mutant(source, edits, behaviour)
    if mutated_ast is None:
        return None
    labels = []
    for site in sites:
        region = _mapped_region(site, edits)
        if region is None:
            return None
        node = enclosing_node(mutated_ast, region)
        labels.append(ErrorLabel(Span(node.span.start_byte, node.span.end_byte), site.category))
    if len({lab.span for lab in labels}) != len(labels):
        return None
    return apply_edits(source, edits), labels


def _weighted_order(sites: list[Site], rng: np.random.Generator, weights: dict[str, float] | None) -> list[Site]:
    """Random order in which each pick favours the configured category weights."""
    if not sites:
        return []
    # every category gets its configured share, split evenly over its operators and then
    # over their sites, so operators with many sites (literals) do not dominate
    ops_per_cat: dict[Category, set[str]] = {}
    sites_per_op: dict[str, int] = {}
    for s in sites:
        ops_per_cat.setdefault(s.category, set()).add(s.operator)
        sites_per_op[s.operator] = sites_per_op.get(s.operator, 0) + 1
    w = np.array(
        [
            (weights or {}).get(s.category.value, 1.0) / (len(ops_per_cat[s.category]) * sites_per_op[s.operator])
            for s in sites
        ]
    )
    if w.sum() <= 0:
        w = np.ones(len(sites))
    # Efraimidis-Spirakis weighted sampling without replacement
    u = rng.random(len(sites))
    keys = np.where(w > 0, np.log(np.maximum(u, 1e-300)) / np.maximum(w, 1e-300), -np.inf)
    return [sites[i] for i in np.argsort(-keys, kind="stable")]
