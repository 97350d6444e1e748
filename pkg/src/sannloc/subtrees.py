"""Rooted-subtree enumeration, canonical serialization, vocabularies and program encoding.

Every internal AST node roots exactly one subtree (the node plus all descendants).
Identifiers are renamed VAR1..VARk in first-occurrence order *within each subtree*, so
`a = a` and `b = b` share a vocabulary entry while operators and literals stay verbatim.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lang import Ast, AstNode, Kind, Span

PAD = 0
UNK = 1
VOCAB_VERSION = 1

DEFAULT_MAX_SUBTREES = 128
DEFAULT_MAX_NODES = 64
DEFAULT_MIN_FREQUENCY = 2


class EmptyProgram(ValueError):
    pass


class VocabError(ValueError):
    pass


@dataclass(frozen=True)
class Subtree:
    root_path: tuple[int, ...]
    kinds_preorder: tuple[str, ...]
    serialization: str
    span: Span
    size: int


def _canonical_symbols(node: AstNode) -> tuple[list[str], list[str]]:
    """Return (pre-order symbols, serialization pieces) with identifiers renamed."""
    names: dict[str, str] = {}

    def leaf_text(n: AstNode) -> str:
        if n.kind is Kind.Ident:
            if n.token not in names:
                names[n.token] = f"VAR{len(names) + 1}"
            return names[n.token]
        return n.token if n.token is not None else n.kind.value

    symbols: list[str] = []
    pieces: list[str] = []

    def visit(n: AstNode) -> None:
        if n.kind is Kind.Ident:
            text = leaf_text(n)
            symbols.append(f"Ident:{text}")
            pieces.append(text)
            return
        symbols.append(n.symbol)
        if not n.children and n.token is not None and n.kind in (Kind.IntLit, Kind.BoolLit, Kind.StringLit):
            pieces.append(n.token)
            return
        pieces.append("(" + n.symbol)
        for c in n.children:
            pieces.append(" ")
            visit(c)
        pieces.append(")")

    visit(node)
    return symbols, pieces


def make_subtree(node: AstNode, path: tuple[int, ...] = ()) -> Subtree:
    symbols, pieces = _canonical_symbols(node)
    return Subtree(path, tuple(symbols), "".join(pieces), node.span, len(symbols))


def serialize_subtree(subtree: Subtree) -> str:
    return subtree.serialization


def extract_subtrees(ast: Ast) -> list[Subtree]:
    """One subtree per internal node, in pre-order of the root."""
    if not ast.root.children:
        raise EmptyProgram("method body and parameter list are empty")
    return [make_subtree(node, path) for path, node in ast.root.walk_with_paths() if node.children]


@dataclass
class Vocab:
    subtree_to_id: dict[str, int]
    node_symbol_to_id: dict[str, int]
    min_frequency: int
    subtree_freq: dict[str, int]

    @property
    def n_subtrees(self) -> int:
        return len(self.subtree_to_id) + 2

    @property
    def n_nodes(self) -> int:
        return len(self.node_symbol_to_id) + 2

    def subtree_id(self, key: str) -> int:
        return self.subtree_to_id.get(key, UNK)

    def node_id(self, key: str) -> int:
        return self.node_symbol_to_id.get(key, UNK)

    def to_json(self) -> str:
        obj = {
            "version": VOCAB_VERSION,
            "min_frequency": self.min_frequency,
            "subtrees": [
                {"key": k, "id": i, "freq": self.subtree_freq[k]} for k, i in self.subtree_to_id.items()
            ],
            "nodes": [{"key": k, "id": i} for k, i in self.node_symbol_to_id.items()],
        }
        return json.dumps(obj, ensure_ascii=False, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise VocabError(f"vocab file is not valid JSON: {exc}") from None
        if obj.get("version") != VOCAB_VERSION:
            raise VocabError(f"unsupported vocab version {obj.get('version')!r}")
        subtrees = {e["key"]: e["id"] for e in obj["subtrees"]}
        freq = {e["key"]: e["freq"] for e in obj["subtrees"]}
        nodes = {e["key"]: e["id"] for e in obj["nodes"]}
        for table in (subtrees, nodes):
            if sorted(table.values()) != list(range(2, len(table) + 2)):
                raise VocabError("vocabulary ids are not dense")
        return cls(subtrees, nodes, obj["min_frequency"], freq)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def build_vocab(programs: Iterable[Ast], min_frequency: int = DEFAULT_MIN_FREQUENCY) -> Vocab:
    if min_frequency < 1:
        raise ValueError("min_frequency must be >= 1")
    counts: Counter[str] = Counter()
    order: dict[str, None] = {}
    node_order: dict[str, None] = {}
    seen_any = False
    for ast in programs:
        seen_any = True
        for st in extract_subtrees(ast):
            counts[st.serialization] += 1
            order.setdefault(st.serialization)
            for sym in st.kinds_preorder:
                node_order.setdefault(sym)
    if not seen_any:
        raise ValueError("build_vocab needs at least one program")
    kept = [k for k in order if counts[k] >= min_frequency]
    subtree_to_id = {k: i + 2 for i, k in enumerate(kept)}
    node_to_id = {k: i + 2 for i, k in enumerate(node_order)}
    return Vocab(subtree_to_id, node_to_id, min_frequency, {k: counts[k] for k in kept})


@dataclass(frozen=True)
class EncodedProgram:
    subtree_ids: tuple[int, ...]
    node_id_seqs: tuple[tuple[int, ...], ...]
    spans: tuple[Span, ...]
    label: int
    serializations: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.subtree_ids)

    def lengths(self) -> list[int]:
        return [sum(1 for i in seq if i != PAD) for seq in self.node_id_seqs]


def select_subtrees(subtrees: Sequence[Subtree], max_subtrees: int) -> list[Subtree]:
    """Keep the `max_subtrees` largest (ties by pre-order); result stays in pre-order."""
    if len(subtrees) <= max_subtrees:
        return list(subtrees)
    ranked = sorted(range(len(subtrees)), key=lambda i: (-subtrees[i].size, i))
    keep = sorted(ranked[:max_subtrees])
    return [subtrees[i] for i in keep]


def encode_program(
    ast: Ast,
    vocab: Vocab,
    label: int,
    max_subtrees: int = DEFAULT_MAX_SUBTREES,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> EncodedProgram:
    if max_subtrees < 1 or max_nodes < 1:
        raise ValueError("max_subtrees and max_nodes must be >= 1")
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    chosen = select_subtrees(extract_subtrees(ast), max_subtrees)
    ids, seqs, spans, keys = [], [], [], []
    for st in chosen:
        ids.append(vocab.subtree_id(st.serialization))
        node_ids = [vocab.node_id(s) for s in st.kinds_preorder[:max_nodes]]
        seqs.append(tuple(node_ids + [PAD] * (max_nodes - len(node_ids))))
        spans.append(st.span)
        keys.append(st.serialization)
    return EncodedProgram(tuple(ids), tuple(seqs), tuple(spans), label, tuple(keys))
