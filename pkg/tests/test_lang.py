import json

import pytest
from hypothesis import given, settings

from sannloc.lang import (
    Kind,
    LexError,
    ParseError,
    SchemaError,
    ast_from_json,
    ast_to_json,
    check_node,
    parse,
    tokenize,
)

from conftest import programs


def test_minimal_program():
    t = parse("int f() { return 0; }")
    assert t.root.kind is Kind.MethodDecl
    (ret,) = t.root.children
    assert ret.kind is Kind.Return
    assert ret.children[0].kind is Kind.IntLit and ret.children[0].token == "0"


def test_abs_program_has_thirteen_nodes():
    # MethodDecl, Param, Ident a, If, BinaryOp <, Ident a, IntLit 0, Block, Return,
    # UnaryOp -, Ident a, Return, Ident a
    t = parse("int f(int a) { if (a < 0) { return -a; } return a; }")
    assert t.node_count == 13
    kinds = [n.kind.value for n in t.root.walk()]
    assert kinds == [
        "MethodDecl", "Param", "Ident", "If", "BinaryOp", "Ident", "IntLit",
        "Block", "Return", "UnaryOp", "Ident", "Return", "Ident",
    ]


def test_missing_expression_is_parse_error_at_semicolon():
    src = "int f() { return ; }"
    with pytest.raises(ParseError) as exc:
        parse(src)
    assert exc.value.offset == src.index(";")


def test_unknown_character_is_lex_error_with_offset():
    with pytest.raises(LexError) as exc:
        tokenize("int f() { return 0 # 1; }")
    assert exc.value.offset == 19


def test_bitwise_and_logical_operators_are_distinct():
    t = parse("boolean f(boolean a, boolean b) { return (a & b) || (a && b); }")
    ops = {n.token for n in t.root.walk() if n.kind is Kind.BinaryOp}
    assert ops == {"&", "||", "&&"}


def test_precedence_follows_java():
    t = parse("int f(int a) { return a + 2 * 3 - 1; }")
    expr = t.root.children[1].children[0]
    # (a + (2 * 3)) - 1
    assert expr.token == "-"
    assert expr.children[0].token == "+"
    assert expr.children[0].children[1].token == "*"
    t = parse("boolean f(boolean a, boolean b, boolean c) { return a || b && c; }")
    expr = t.root.children[3].children[0]
    assert expr.token == "||" and expr.children[1].token == "&&"


def test_spans_index_source_bytes():
    src = 'int f(String s) { return s.length() + "é".length(); }'
    t = parse(src)
    raw = src.encode("utf-8")
    for n in t.root.walk():
        if n.kind is Kind.StringLit:
            assert raw[n.span.start_byte:n.span.end_byte].decode("utf-8") == '"é"'
    assert t.root.span.end_byte == len(raw)


def test_json_root_kind_and_child_order():
    t = parse("int f(int a, int b) { a = 1; b = 2; return a; }")
    obj = json.loads(ast_to_json(t))
    assert obj["kind"] == "MethodDecl"
    starts = [c["span"][0] for c in obj["children"]]
    assert starts == sorted(starts)


def test_from_json_rejects_inverted_span_with_path():
    obj = json.loads(ast_to_json(parse("int f() { return 0; }")))
    obj["children"][0]["children"][0]["span"] = [18, 17]
    with pytest.raises(SchemaError) as exc:
        ast_from_json(json.dumps(obj))
    assert exc.value.path == "$.children[0].children[0]"


def test_from_json_rejects_unknown_kind():
    obj = json.loads(ast_to_json(parse("int f() { return 0; }")))
    obj["children"][0]["kind"] = "Lambda"
    with pytest.raises(SchemaError, match="unknown kind"):
        ast_from_json(json.dumps(obj))


def test_from_json_rejects_missing_field():
    obj = json.loads(ast_to_json(parse("int f() { return 0; }")))
    del obj["children"][0]["span"]
    with pytest.raises(SchemaError, match="missing field"):
        ast_from_json(json.dumps(obj))


@settings(max_examples=100, deadline=None)
@given(programs())
def test_json_round_trip(src):
    t = parse(src)
    back = ast_from_json(ast_to_json(t))
    assert back == t


@settings(max_examples=100, deadline=None)
@given(programs())
def test_parse_invariants_and_determinism(src):
    t = parse(src)
    check_node(t.root, limit=len(src.encode("utf-8")))
    assert t.root.span.start_byte == 0 and t.root.span.end_byte == len(src.encode("utf-8").rstrip())
    assert ast_to_json(parse(src)) == ast_to_json(t)


def test_generated_corpus_parses():
    from sannloc.forge import PROBLEMS, generate_correct

    for p in generate_correct(PROBLEMS, 3 * len(PROBLEMS), seed=5):
        t = parse(p.source)
        check_node(t.root, limit=len(p.source.encode("utf-8")))
