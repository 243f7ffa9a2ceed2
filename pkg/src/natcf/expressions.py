"""Tiny expression language for declaring structural mechanisms.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := number | 'pi' | ident | 'u' | 'sin' '(' expr ')' | '(' expr ')' | '-' factor

``u`` is the reserved noise symbol and must occur exactly once, additively,
with a positive constant coefficient. Division is only by nonzero constants.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import NonMonotoneNoise, ParseError, UnknownParent


class Node:
    def eval(self, env):
        raise NotImplementedError

    def eval_with_partials(self, env):
        """Value plus d(value)/d(parent) for every parent reference below."""
        raise NotImplementedError

    def noise_count(self) -> int:
        return 0

    def to_text(self) -> str:
        raise NotImplementedError

    def _prec(self) -> int:
        return 3


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, env):
        return self.value

    def eval_with_partials(self, env):
        return self.value, {}

    def to_text(self):
        if self.value < 0:
            return f"-{format_number(-self.value)}"
        return format_number(self.value)

    def _prec(self):
        return 3 if self.value >= 0 else 0


class Par(Node):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def eval(self, env):
        return env[self.name]

    def eval_with_partials(self, env):
        return env[self.name], {self.name: 1.0}

    def to_text(self):
        return self.name


class NoiseRef(Node):
    __slots__ = ()

    def noise_count(self):
        return 1

    def to_text(self):
        return "u"


class Add(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def eval(self, env):
        return self.a.eval(env) + self.b.eval(env)

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        vb, db = self.b.eval_with_partials(env)
        return va + vb, _merge(da, db, 1.0)

    def noise_count(self):
        return self.a.noise_count() + self.b.noise_count()

    def to_text(self):
        # Right operand wraps at equal precedence so reparsing rebuilds the
        # exact tree shape (float addition is not associative).
        return f"{_wrap(self.a, 1)} + {_wrap(self.b, 2)}"

    def _prec(self):
        return 1


class Sub(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def eval(self, env):
        return self.a.eval(env) - self.b.eval(env)

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        vb, db = self.b.eval_with_partials(env)
        return va - vb, _merge(da, db, -1.0)

    def noise_count(self):
        return self.a.noise_count() + self.b.noise_count()

    def to_text(self):
        return f"{_wrap(self.a, 1)} - {_wrap(self.b, 2)}"

    def _prec(self):
        return 1


class Mul(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def eval(self, env):
        return self.a.eval(env) * self.b.eval(env)

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        vb, db = self.b.eval_with_partials(env)
        out = {}
        for k, g in da.items():
            out[k] = g * vb
        for k, g in db.items():
            out[k] = out[k] + va * g if k in out else va * g
        return va * vb, out

    def noise_count(self):
        return self.a.noise_count() + self.b.noise_count()

    def to_text(self):
        return f"{_wrap(self.a, 2)}*{_wrap(self.b, 3)}"

    def _prec(self):
        return 2


class Div(Node):
    """Division by a nonzero constant (enforced at parse/build time)."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def eval(self, env):
        return self.a.eval(env) / self.b.eval(env)

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        c = self.b.eval(env)
        return va / c, {k: g / c for k, g in da.items()}

    def noise_count(self):
        return self.a.noise_count() + self.b.noise_count()

    def to_text(self):
        return f"{_wrap(self.a, 2)}/{_wrap(self.b, 4)}"

    def _prec(self):
        return 2


class Neg(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = a

    def eval(self, env):
        return -self.a.eval(env)

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        return -va, {k: -g for k, g in da.items()}

    def noise_count(self):
        return self.a.noise_count()

    def to_text(self):
        return f"-{_wrap(self.a, 3)}"

    def _prec(self):
        return 0


class Sin(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = a

    def eval(self, env):
        return np.sin(self.a.eval(env))

    def eval_with_partials(self, env):
        va, da = self.a.eval_with_partials(env)
        c = np.cos(va)
        return np.sin(va), {k: c * g for k, g in da.items()}

    def noise_count(self):
        return self.a.noise_count()

    def to_text(self):
        return f"sin({self.a.to_text()})"


def _merge(da, db, sign_b):
    out = dict(da)
    for k, g in db.items():
        out[k] = out[k] + sign_b * g if k in out else sign_b * g
    return out


def _wrap(node: Node, min_prec: int) -> str:
    text = node.to_text()
    if node._prec() < min_prec:
        return f"({text})"
    return text


def format_number(x: float) -> str:
    return format(float(x), ".17g")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), pos))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), pos))
        else:
            tokens.append(("op", m.group("op"), pos))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, parents):
        self.tokens = _tokenize(text)
        self.i = 0
        self.parents = set(parents)

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ParseError("trailing input", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                if val == "*":
                    node = Mul(node, rhs)
                else:
                    c = fold_const(rhs)
                    if c is None:
                        raise ParseError("division only by constants", pos)
                    if c == 0.0:
                        raise ParseError("division by zero", pos)
                    node = Div(node, Const(c))
            else:
                return node

    def factor(self) -> Node:
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "ident":
            if val == "pi":
                return Const(math.pi)
            if val == "u":
                return NoiseRef()
            if val == "sin":
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return Sin(inner)
            if val in self.parents:
                return Par(val)
            raise UnknownParent(f"{val!r} is not a declared parent")
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        if kind == "op" and val == "-":
            return Neg(self.factor())
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_expression(text: str, parents) -> Node:
    return _Parser(text, parents).parse()


def fold_const(node: Node):
    """Numeric value of a parent-free, noise-free subtree, else None."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        v = fold_const(node.a)
        return None if v is None else -v
    if isinstance(node, (Add, Sub, Mul, Div)):
        a, b = fold_const(node.a), fold_const(node.b)
        if a is None or b is None:
            return None
        if isinstance(node, Add):
            return a + b
        if isinstance(node, Sub):
            return a - b
        if isinstance(node, Mul):
            return a * b
        return a / b
    if isinstance(node, Sin):
        v = fold_const(node.a)
        return None if v is None else math.sin(v)
    return None


def split_noise(node: Node) -> tuple[Node, float]:
    """Decompose an expression as g + s*u; reject anything non-additive in u.

    Returns the noise-free part and the constant coefficient s. The caller
    checks s > 0 and the single-occurrence rule.
    """
    if isinstance(node, NoiseRef):
        return Const(0.0), 1.0
    if isinstance(node, (Const, Par)):
        return node, 0.0
    if isinstance(node, Add):
        ga, sa = split_noise(node.a)
        gb, sb = split_noise(node.b)
        return Add(ga, gb), sa + sb
    if isinstance(node, Sub):
        ga, sa = split_noise(node.a)
        gb, sb = split_noise(node.b)
        return Sub(ga, gb), sa - sb
    if isinstance(node, Neg):
        ga, sa = split_noise(node.a)
        return Neg(ga), -sa
    if isinstance(node, Mul):
        sa = node.a.noise_count()
        sb = node.b.noise_count()
        if sa and sb:
            raise NonMonotoneNoise("noise multiplied by noise")
        if not sa and not sb:
            return node, 0.0
        noisy, other = (node.a, node.b) if sa else (node.b, node.a)
        c = fold_const(other)
        if c is None:
            raise NonMonotoneNoise("noise scaled by a non-constant factor")
        g, s = split_noise(noisy)
        return Mul(g, Const(c)) if not _is_zero(g) else Const(0.0), s * c
    if isinstance(node, Div):
        c = node.b.value
        g, s = split_noise(node.a)
        return Div(g, Const(c)) if not _is_zero(g) else Const(0.0), s / c
    if isinstance(node, Sin):
        if node.a.noise_count():
            raise NonMonotoneNoise("noise inside sin() is not additive")
        return node, 0.0
    raise NonMonotoneNoise(f"cannot canonicalize {type(node).__name__}")


def _is_zero(node: Node) -> bool:
    return isinstance(node, Const) and node.value == 0.0
