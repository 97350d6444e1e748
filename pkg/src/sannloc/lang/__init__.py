from .lexer import LexError, Token, tokenize
from .nodes import (
    Ast,
    AstNode,
    BINARY_OPERATORS,
    Kind,
    LEAF_KINDS,
    SchemaError,
    Span,
    ast_from_json,
    ast_to_json,
    check_node,
)
from .parser import ParseError, parse

__all__ = [
    "Ast", "AstNode", "BINARY_OPERATORS", "Kind", "LEAF_KINDS", "LexError", "ParseError",
    "SchemaError", "Span", "Token", "ast_from_json", "ast_to_json", "check_node", "parse", "tokenize",
]
