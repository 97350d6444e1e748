"""Spanned AST for the supported Java-method subset, plus its JSON interchange format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator


class Kind(str, Enum):
    MethodDecl = "MethodDecl"
    Param = "Param"
    Block = "Block"
    If = "If"
    While = "While"
    For = "For"
    Return = "Return"
    Assign = "Assign"
    BinaryOp = "BinaryOp"
    UnaryOp = "UnaryOp"
    Call = "Call"
    ArrayIndex = "ArrayIndex"
    IntLit = "IntLit"
    BoolLit = "BoolLit"
    StringLit = "StringLit"
    Ident = "Ident"
    VarDecl = "VarDecl"


LEAF_KINDS = frozenset({Kind.IntLit, Kind.BoolLit, Kind.StringLit, Kind.Ident})
BINARY_OPERATORS = frozenset(
    {"+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||", "&", "|", "="}
)


class SchemaError(ValueError):
    """AST-JSON that violates the schema or a node invariant; `path` locates the node."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True, slots=True)
class Span:
    start_byte: int
    end_byte: int

    def __post_init__(self):
        if self.start_byte < 0 or self.end_byte <= self.start_byte:
            raise ValueError(f"invalid span [{self.start_byte}, {self.end_byte})")

    def __len__(self) -> int:
        return self.end_byte - self.start_byte

    def contains(self, other: "Span") -> bool:
        return self.start_byte <= other.start_byte and other.end_byte <= self.end_byte

    def overlap(self, other: "Span") -> int:
        return max(0, min(self.end_byte, other.end_byte) - max(self.start_byte, other.start_byte))

    def as_list(self) -> list[int]:
        return [self.start_byte, self.end_byte]


@dataclass(frozen=True, slots=True)
class AstNode:
    kind: Kind
    token: str | None
    span: Span
    children: tuple["AstNode", ...] = field(default=())

    @property
    def symbol(self) -> str:
        return self.kind.value if self.token is None else f"{self.kind.value}:{self.token}"

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def walk_with_paths(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "AstNode"]]:
        stack = [(path, self)]
        while stack:
            p, node = stack.pop()
            yield p, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((p + (i,), node.children[i]))

    def at(self, path: tuple[int, ...]) -> "AstNode":
        node = self
        for i in path:
            node = node.children[i]
        return node


@dataclass(frozen=True)
class Ast:
    root: AstNode
    source: str | None = None

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.root.walk())

    def text(self, span: Span) -> str:
        if self.source is None:
            raise ValueError("AST has no source attached")
        return self.source.encode("utf-8")[span.start_byte:span.end_byte].decode("utf-8")


def check_node(node: AstNode, path: str = "$", limit: int | None = None) -> None:
    """Verify the structural invariants of `node` and everything below it."""
    if limit is not None and node.span.end_byte > limit:
        raise SchemaError(f"span end {node.span.end_byte} exceeds source length {limit}", path)
    if node.kind in LEAF_KINDS and node.children:
        raise SchemaError(f"leaf kind {node.kind.value} has children", path)
    if node.kind is Kind.BinaryOp:
        if len(node.children) != 2:
            raise SchemaError("BinaryOp needs exactly two children", path)
        if node.token not in BINARY_OPERATORS:
            raise SchemaError(f"bad BinaryOp operator {node.token!r}", path)
    prev_end = node.span.start_byte
    for i, child in enumerate(node.children):
        cpath = f"{path}.children[{i}]"
        if not node.span.contains(child.span):
            raise SchemaError("child span escapes parent span", cpath)
        if child.span.start_byte < prev_end:
            raise SchemaError("sibling spans overlap or are out of order", cpath)
        prev_end = child.span.end_byte
        check_node(child, cpath, limit)


def _node_to_obj(node: AstNode) -> dict:
    return {
        "kind": node.kind.value,
        "token": node.token,
        "span": node.span.as_list(),
        "children": [_node_to_obj(c) for c in node.children],
    }


def ast_to_json(ast: Ast) -> str:
    obj = _node_to_obj(ast.root)
    if ast.source is not None:
        obj["source"] = ast.source
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _node_from_obj(obj, path: str) -> AstNode:
    if not isinstance(obj, dict):
        raise SchemaError("node must be an object", path)
    for key in ("kind", "span", "children"):
        if key not in obj:
            raise SchemaError(f"missing field {key!r}", path)
    try:
        kind = Kind(obj["kind"])
    except ValueError:
        raise SchemaError(f"unknown kind {obj['kind']!r}", path) from None
    token = obj.get("token")
    if token is not None and not isinstance(token, str):
        raise SchemaError("token must be a string or null", path)
    span = obj["span"]
    if (
        not isinstance(span, list)
        or len(span) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in span)
    ):
        raise SchemaError("span must be [start, end] integers", path)
    if span[0] < 0 or span[1] <= span[0]:
        raise SchemaError(f"span violation: [{span[0]}, {span[1]}]", path)
    if not isinstance(obj["children"], list):
        raise SchemaError("children must be a list", path)
    children = tuple(
        _node_from_obj(c, f"{path}.children[{i}]") for i, c in enumerate(obj["children"])
    )
    return AstNode(kind, token, Span(span[0], span[1]), children)


def ast_from_json(text: str) -> Ast:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    root = _node_from_obj(obj, "$")
    source = obj.get("source")
    if source is not None and not isinstance(source, str):
        raise SchemaError("source must be a string", "$")
    limit = len(source.encode("utf-8")) if source is not None else None
    check_node(root, "$", limit)
    if root.kind is not Kind.MethodDecl:
        raise SchemaError("root must be a MethodDecl", "$")
    return Ast(root, source)
