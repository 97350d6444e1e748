"""Reference interpreter for the parser's Java subset.

Only used at generation time to check that a mutation changes observable behaviour.
Outcomes are ("ok", value), ("error", java exception name) or ("timeout", None).
Ill-typed code raises InterpTypeError: such a mutant would not compile in Java.
"""

from __future__ import annotations

from ..lang import Ast, AstNode, Kind

INT_MIN = -(2 ** 31)


class InterpTypeError(TypeError):
    pass


class JavaException(Exception):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


class StepLimit(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def wrap_int(v: int) -> int:
    return (v - INT_MIN) % (2 ** 32) + INT_MIN


class Char(str):
    """A Java char; compares equal only to other chars of the same code point."""

    def __eq__(self, other):
        return isinstance(other, Char) and str.__eq__(self, other)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = str.__hash__


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _java_div(a: int, b: int) -> int:
    if b == 0:
        raise JavaException("ArithmeticException")
    q = abs(a) // abs(b)
    return wrap_int(q if (a >= 0) == (b >= 0) else -q)


def _java_mod(a: int, b: int) -> int:
    if b == 0:
        raise JavaException("ArithmeticException")
    r = abs(a) % abs(b)
    return r if a >= 0 else -r


def _unescape(body: str) -> str:
    out = []
    i = 0
    simple = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'", "0": "\0", "r": "\r"}
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(simple.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class Interpreter:
    def __init__(self, ast: Ast, max_steps: int = 20000):
        self.method = ast.root
        self.max_steps = max_steps
        self.steps = 0

    def run(self, args: list):
        params = [c for c in self.method.children if c.kind is Kind.Param]
        if len(params) != len(args):
            raise InterpTypeError("argument count mismatch")
        scope = {}
        for p, v in zip(params, args):
            scope[p.children[0].token] = list(v) if isinstance(v, list) else v
        self.steps = 0
        env = [scope]
        try:
            for stmt in self.method.children[len(params):]:
                self.exec(stmt, env)
        except _Return as r:
            return r.value
        raise InterpTypeError("missing return statement")

    # environment -------------------------------------------------------------
    def lookup(self, env, name):
        for scope in reversed(env):
            if name in scope:
                return scope
        raise InterpTypeError(f"undefined variable {name}")

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit()

    # statements -----------------------------------------------------------------
    def exec(self, node: AstNode, env):
        self.tick()
        k = node.kind
        if k is Kind.Block:
            env.append({})
            try:
                for s in node.children:
                    self.exec(s, env)
            finally:
                env.pop()
        elif k is Kind.VarDecl:
            name = node.children[0].token
            if name in env[-1]:
                raise InterpTypeError(f"duplicate variable {name}")
            value = self.eval(node.children[1], env) if len(node.children) > 1 else None
            env[-1][name] = value
        elif k is Kind.Assign:
            self.assign(node, env)
        elif k is Kind.If:
            if self.cond(node.children[0], env):
                self.exec(node.children[1], env)
            elif len(node.children) > 2:
                self.exec(node.children[2], env)
        elif k is Kind.While:
            while self.cond(node.children[0], env):
                self.exec(node.children[1], env)
        elif k is Kind.For:
            env.append({})
            try:
                init, cond, update, body = node.children
                self.exec(init, env)
                while self.cond(cond, env):
                    self.exec(body, env)
                    self.exec(update, env)
            finally:
                env.pop()
        elif k is Kind.Return:
            raise _Return(self.eval(node.children[0], env))
        elif k is Kind.Call:
            self.eval(node, env)
        else:
            raise InterpTypeError(f"{k.value} is not a statement")

    def cond(self, node, env) -> bool:
        v = self.eval(node, env)
        if not isinstance(v, bool):
            raise InterpTypeError("condition is not boolean")
        return v

    def store(self, target: AstNode, value, env):
        if target.kind is Kind.Ident:
            scope = self.lookup(env, target.token)
            old = scope[target.token]
            if old is not None and type(old) is not type(value) and not (_is_int(old) and _is_int(value)):
                raise InterpTypeError("assignment changes type")
            scope[target.token] = value
        elif target.kind is Kind.ArrayIndex:
            arr = self.eval(target.children[0], env)
            idx = self.eval(target.children[1], env)
            if not isinstance(arr, list) or not _is_int(idx) or not _is_int(value):
                raise InterpTypeError("bad array store")
            if not 0 <= idx < len(arr):
                raise JavaException("ArrayIndexOutOfBoundsException")
            arr[idx] = value
        else:
            raise InterpTypeError("bad assignment target")
        return value

    def assign(self, node: AstNode, env):
        target = node.children[0]
        op = node.token
        if op is None:
            return self.store(target, self.eval(node.children[1], env), env)
        old = self.eval(target, env)
        if op in ("++", "--"):
            if not _is_int(old):
                raise InterpTypeError("++/-- on non-int")
            return self.store(target, wrap_int(old + (1 if op == "++" else -1)), env)
        rhs = self.eval(node.children[1], env)
        return self.store(target, self.binary(op[0], old, rhs), env)

    # expressions ----------------------------------------------------------------
    def eval(self, node: AstNode, env):
        k = node.kind
        if k is Kind.IntLit:
            v = int(node.token)
            if v > 2 ** 31:
                raise InterpTypeError("integer literal too large")
            return wrap_int(v)
        if k is Kind.BoolLit:
            return node.token == "true"
        if k is Kind.StringLit:
            body = _unescape(node.token[1:-1])
            return Char(body) if node.token.startswith("'") else body
        if k is Kind.Ident:
            value = self.lookup(env, node.token)[node.token]
            if value is None:
                raise InterpTypeError(f"{node.token} might not have been initialized")
            return value
        if k is Kind.UnaryOp:
            v = self.eval(node.children[0], env)
            if node.token == "!":
                if not isinstance(v, bool):
                    raise InterpTypeError("! on non-boolean")
                return not v
            if not _is_int(v):
                raise InterpTypeError("unary arithmetic on non-int")
            return wrap_int(-v) if node.token == "-" else v
        if k is Kind.BinaryOp:
            op = node.token
            if op == "=":
                return self.store(node.children[0], self.eval(node.children[1], env), env)
            left = self.eval(node.children[0], env)
            if op in ("&&", "||"):
                if not isinstance(left, bool):
                    raise InterpTypeError(f"{op} on non-boolean")
                if (op == "&&" and not left) or (op == "||" and left):
                    return left
                right = self.eval(node.children[1], env)
                if not isinstance(right, bool):
                    raise InterpTypeError(f"{op} on non-boolean")
                return right
            right = self.eval(node.children[1], env)
            return self.binary(op, left, right)
        if k is Kind.ArrayIndex:
            arr = self.eval(node.children[0], env)
            idx = self.eval(node.children[1], env)
            if not isinstance(arr, list) or not _is_int(idx):
                raise InterpTypeError("bad array index")
            if not 0 <= idx < len(arr):
                raise JavaException("ArrayIndexOutOfBoundsException")
            return arr[idx]
        if k is Kind.Call:
            return self.call(node, env)
        raise InterpTypeError(f"{k.value} is not an expression")

    def binary(self, op, left, right):
        if op == "+" and (isinstance(left, str) or isinstance(right, str)):
            return _to_string(left) + _to_string(right)
        if op in ("==", "!="):
            kinds = {_value_kind(left), _value_kind(right)}
            if len(kinds) != 1 or kinds & {"String", "array"}:
                raise InterpTypeError("incomparable operands for ==")
            eq = left == right
            return eq if op == "==" else not eq
        if op in ("&", "|"):
            if isinstance(left, bool) and isinstance(right, bool):
                return (left and right) if op == "&" else (left or right)
            if _is_int(left) and _is_int(right):
                return wrap_int(left & right) if op == "&" else wrap_int(left | right)
            raise InterpTypeError(f"{op} on mixed types")
        if not (_is_int(left) and _is_int(right)):
            raise InterpTypeError(f"{op} on non-int operands")
        if op == "+":
            return wrap_int(left + right)
        if op == "-":
            return wrap_int(left - right)
        if op == "*":
            return wrap_int(left * right)
        if op == "/":
            return _java_div(left, right)
        if op == "%":
            return _java_mod(left, right)
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        raise InterpTypeError(f"unknown operator {op}")

    def call(self, node: AstNode, env):
        name = node.token
        if name.startswith("."):
            recv_node, arg_nodes = node.children[0], node.children[1:]
            if recv_node.kind is Kind.Ident and recv_node.token == "Math":
                args = [self.eval(a, env) for a in arg_nodes]
                return _math(name[1:], args)
            recv = self.eval(recv_node, env)
            args = [self.eval(a, env) for a in arg_nodes]
            return _method(recv, name[1:], args)
        raise InterpTypeError(f"unknown function {name}")


def _value_kind(v) -> str:
    if isinstance(v, bool):
        return "boolean"
    if _is_int(v):
        return "int"
    if isinstance(v, Char):
        return "char"
    if isinstance(v, str):
        return "String"
    if isinstance(v, list):
        return "array"
    return type(v).__name__


def outcome_key(outcome) -> tuple:
    """Type-aware key so that e.g. true and 1 never compare equal."""
    status, value = outcome
    if status != "ok":
        return (status, value)
    if isinstance(value, list):
        return (status, "array", tuple(value))
    return (status, _value_kind(value), value)


def _to_string(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        raise InterpTypeError("array in string concatenation")
    return str(v)


def _math(name, args):
    if not all(_is_int(a) for a in args):
        raise InterpTypeError("Math on non-int")
    if name == "abs" and len(args) == 1:
        return wrap_int(abs(args[0]))
    if name in ("max", "min") and len(args) == 2:
        return max(args) if name == "max" else min(args)
    raise InterpTypeError(f"unknown Math.{name}")


def _method(recv, name, args):
    if isinstance(recv, list):
        if name == "length" and not args:
            return len(recv)
        raise InterpTypeError(f"array has no member {name}")
    if not isinstance(recv, str) or isinstance(recv, Char):
        raise InterpTypeError(f"no method {name} on {type(recv).__name__}")
    if name == "length" and not args:
        return len(recv)
    if name == "charAt" and len(args) == 1 and _is_int(args[0]):
        if not 0 <= args[0] < len(recv):
            raise JavaException("StringIndexOutOfBoundsException")
        return Char(recv[args[0]])
    if name == "substring" and 1 <= len(args) <= 2 and all(_is_int(a) for a in args):
        b = args[0]
        e = args[1] if len(args) == 2 else len(recv)
        if not 0 <= b <= e <= len(recv):
            raise JavaException("StringIndexOutOfBoundsException")
        return recv[b:e]
    if name == "equals" and len(args) == 1:
        return isinstance(args[0], str) and not isinstance(args[0], Char) and args[0] == recv
    raise InterpTypeError(f"unknown String.{name}")


def run_program(ast: Ast, args: list, max_steps: int = 20000):
    """Execute the method on `args` and return its observable outcome."""
    interp = Interpreter(ast, max_steps)
    try:
        return ("ok", interp.run(args))
    except JavaException as exc:
        return ("error", exc.name)
    except StepLimit:
        return ("timeout", None)
    except RecursionError:
        return ("error", "StackOverflowError")
