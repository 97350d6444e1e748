"""Recursive-descent parser for a single Java method in a small CS1 subset.

Grammar (EBNF; statement spans include the trailing ';'):

    method     := type IDENT '(' [param {',' param}] ')' '{' {stmt} '}'
    type       := ('int' | 'boolean' | 'String' | 'char') ['[' ']']
    param      := type IDENT
    stmt       := block | vardecl ';' | if | while | for | 'return' expr ';' | simple ';'
    block      := '{' {stmt} '}'
    vardecl    := type IDENT ['=' expr]
    simple     := postfix ('=' | '+=' | '-=' | '*=' | '/=' | '%=') expr
                | postfix ('++' | '--')
                | call
    if         := 'if' '(' expr ')' stmt ['else' stmt]
    while      := 'while' '(' expr ')' stmt
    for        := 'for' '(' (vardecl | simple) ';' expr ';' simple ')' stmt

Expression precedence, loosest first (Java order):

    =  (right assoc, only inside expressions)
    ||   &&   |   &   == !=   < <= > >=   + -   * / %   unary ! - +   postfix [] . ()

Method bodies hang their statements directly under MethodDecl. `x.f(...)` is a Call
whose token is ".f" and whose first child is the receiver; a bare `x.f` (e.g. array
`.length`) is the same Call shape without arguments. Plain assignment has token None,
compound forms carry their operator ("+=", "++", ...).
"""

from __future__ import annotations

from dataclasses import replace

from .lexer import Token, tokenize
from .nodes import Ast, AstNode, Kind, Span

TYPE_KEYWORDS = ("int", "boolean", "String", "char")
COMPOUND_ASSIGN = ("+=", "-=", "*=", "/=", "%=")

_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("|",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        detail = f" (expected one of {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")
        self.offset = offset
        self.expected = expected


def _span(start: int, end: int) -> Span:
    return Span(start, end)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0

    # token helpers ---------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.type in ("op", "keyword") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, *texts: str) -> Token:
        if not self.at(*texts):
            self.fail(texts)
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.type != "ident":
            self.fail(("identifier",))
        return self.advance()

    def fail(self, expected: tuple[str, ...]):
        t = self.tok
        found = "end of input" if t.type == "eof" else repr(t.text)
        raise ParseError(f"unexpected {found}", t.start, tuple(expected))

    # declarations ----------------------------------------------------------
    def parse_type(self) -> tuple[str, int, int]:
        start_tok = self.expect(*TYPE_KEYWORDS)
        text, end = start_tok.text, start_tok.end
        if self.at("["):
            self.advance()
            end = self.expect("]").end
            text += "[]"
        return text, start_tok.start, end

    def parse_method(self) -> AstNode:
        type_text, start, _ = self.parse_type()
        name = self.expect_ident()
        self.expect("(")
        children: list[AstNode] = []
        if not self.at(")"):
            children.append(self.parse_param())
            while self.at(","):
                self.advance()
                children.append(self.parse_param())
        self.expect(")")
        self.expect("{")
        while not self.at("}"):
            if self.tok.type == "eof":
                self.fail(("}",))
            children.append(self.parse_statement())
        end = self.expect("}").end
        if self.tok.type != "eof":
            self.fail(("end of input",))
        return AstNode(Kind.MethodDecl, name.text, _span(start, end), tuple(children))

    def parse_param(self) -> AstNode:
        type_text, start, _ = self.parse_type()
        name = self.expect_ident()
        ident = AstNode(Kind.Ident, name.text, _span(name.start, name.end))
        return AstNode(Kind.Param, type_text, _span(start, name.end), (ident,))

    def parse_vardecl(self) -> AstNode:
        type_text, start, _ = self.parse_type()
        name = self.expect_ident()
        children = [AstNode(Kind.Ident, name.text, _span(name.start, name.end))]
        end = name.end
        if self.at("="):
            self.advance()
            init = self.parse_expression()
            children.append(init)
            end = init.span.end_byte
        return AstNode(Kind.VarDecl, type_text, _span(start, end), tuple(children))

    # statements ------------------------------------------------------------
    def parse_statement(self) -> AstNode:
        t = self.tok
        if self.at("{"):
            return self.parse_block()
        if self.at(*TYPE_KEYWORDS):
            node = self.parse_vardecl()
            return self._terminate(node)
        if self.at("if"):
            return self.parse_if()
        if self.at("while"):
            return self.parse_while()
        if self.at("for"):
            return self.parse_for()
        if self.at("return"):
            self.advance()
            if self.at(";"):
                self.fail(("expression",))
            value = self.parse_expression()
            end = self.expect(";").end
            return AstNode(Kind.Return, None, _span(t.start, end), (value,))
        if t.type == "ident" or self.at("("):
            node = self.parse_simple()
            if node.kind is Kind.Call:
                self.expect(";")
                return node
            return self._terminate(node)
        self.fail(("statement",))

    def _terminate(self, node: AstNode) -> AstNode:
        end = self.expect(";").end
        return replace(node, span=_span(node.span.start_byte, end))

    def parse_block(self) -> AstNode:
        start = self.expect("{").start
        stmts = []
        while not self.at("}"):
            if self.tok.type == "eof":
                self.fail(("}",))
            stmts.append(self.parse_statement())
        end = self.expect("}").end
        return AstNode(Kind.Block, None, _span(start, end), tuple(stmts))

    def parse_condition(self) -> AstNode:
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        return cond

    def parse_if(self) -> AstNode:
        start = self.expect("if").start
        cond = self.parse_condition()
        then = self.parse_statement()
        children = [cond, then]
        end = then.span.end_byte
        if self.at("else"):
            self.advance()
            other = self.parse_statement()
            children.append(other)
            end = other.span.end_byte
        return AstNode(Kind.If, None, _span(start, end), tuple(children))

    def parse_while(self) -> AstNode:
        start = self.expect("while").start
        cond = self.parse_condition()
        body = self.parse_statement()
        return AstNode(Kind.While, None, _span(start, body.span.end_byte), (cond, body))

    def parse_for(self) -> AstNode:
        start = self.expect("for").start
        self.expect("(")
        init = self.parse_vardecl() if self.at(*TYPE_KEYWORDS) else self.parse_simple()
        self.expect(";")
        cond = self.parse_expression()
        self.expect(";")
        update = self.parse_simple()
        self.expect(")")
        body = self.parse_statement()
        return AstNode(Kind.For, None, _span(start, body.span.end_byte), (init, cond, update, body))

    def parse_simple(self) -> AstNode:
        target = self.parse_unary()
        if self.at("="):
            self.advance()
            value = self.parse_expression()
            return AstNode(Kind.Assign, None, _span(target.span.start_byte, value.span.end_byte), (target, value))
        if self.at(*COMPOUND_ASSIGN):
            op = self.advance().text
            value = self.parse_expression()
            return AstNode(Kind.Assign, op, _span(target.span.start_byte, value.span.end_byte), (target, value))
        if self.at("++", "--"):
            op = self.advance()
            return AstNode(Kind.Assign, op.text, _span(target.span.start_byte, op.end), (target,))
        if target.kind is Kind.Call:
            return target
        self.fail(("=", "+=", "-=", "*=", "/=", "%=", "++", "--", "("))

    # expressions -----------------------------------------------------------
    def parse_expression(self) -> AstNode:
        left = self.parse_binary(0)
        if self.at("="):
            if left.kind not in (Kind.Ident, Kind.ArrayIndex):
                self.fail(("operator",))
            self.advance()
            right = self.parse_expression()
            return AstNode(Kind.BinaryOp, "=", _span(left.span.start_byte, right.span.end_byte), (left, right))
        return left

    def parse_binary(self, level: int) -> AstNode:
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        ops = _BINARY_LEVELS[level]
        left = self.parse_binary(level + 1)
        while self.tok.type == "op" and self.tok.text in ops:
            op = self.advance().text
            right = self.parse_binary(level + 1)
            left = AstNode(Kind.BinaryOp, op, _span(left.span.start_byte, right.span.end_byte), (left, right))
        return left

    def parse_unary(self) -> AstNode:
        if self.at("!", "-", "+"):
            op = self.advance()
            operand = self.parse_unary()
            return AstNode(Kind.UnaryOp, op.text, _span(op.start, operand.span.end_byte), (operand,))
        return self.parse_postfix()

    def parse_postfix(self) -> AstNode:
        node = self.parse_primary()
        while True:
            if self.at("["):
                self.advance()
                index = self.parse_expression()
                end = self.expect("]").end
                node = AstNode(Kind.ArrayIndex, None, _span(node.span.start_byte, end), (node, index))
            elif self.at("."):
                self.advance()
                name = self.expect_ident()
                if self.at("("):
                    args, end = self.parse_args()
                else:
                    args, end = [], name.end
                node = AstNode(Kind.Call, "." + name.text, _span(node.span.start_byte, end), (node, *args))
            elif self.at("(") and node.kind is Kind.Ident:
                args, end = self.parse_args()
                node = AstNode(Kind.Call, node.token, _span(node.span.start_byte, end), tuple(args))
            else:
                return node

    def parse_args(self) -> tuple[list[AstNode], int]:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expression())
            while self.at(","):
                self.advance()
                args.append(self.parse_expression())
        end = self.expect(")").end
        return args, end

    def parse_primary(self) -> AstNode:
        t = self.tok
        if t.type == "int":
            self.advance()
            return AstNode(Kind.IntLit, t.text, _span(t.start, t.end))
        if t.type in ("string", "char"):
            self.advance()
            return AstNode(Kind.StringLit, t.text, _span(t.start, t.end))
        if self.at("true", "false"):
            self.advance()
            return AstNode(Kind.BoolLit, t.text, _span(t.start, t.end))
        if t.type == "ident":
            self.advance()
            return AstNode(Kind.Ident, t.text, _span(t.start, t.end))
        if self.at("("):
            start = self.advance().start
            inner = self.parse_expression()
            end = self.expect(")").end
            return replace(inner, span=_span(start, end))
        self.fail(("expression",))


def parse(source: str) -> Ast:
    """Parse one method definition; raises LexError/ParseError for uncompilable input."""
    root = _Parser(source).parse_method()
    return Ast(root, source)
