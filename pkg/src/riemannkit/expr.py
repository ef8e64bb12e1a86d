"""Closed-form expression language for metric coefficients.

Infix grammar with the usual precedence (``^`` > unary ``-`` > ``*`` ``/`` >
``+`` ``-``), ``^`` right-associative.  Evaluation runs either on plain
floats or on second-order forward-mode dual numbers, which yield the exact
value, gradient and Hessian in one pass.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainFault, ParseError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str  # 'pi' or 'e'


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Num | Const | Var | Neg | Bin | Call


def depth(node: Node) -> int:
    if isinstance(node, (Num, Const, Var)):
        return 1
    if isinstance(node, Neg):
        return 1 + depth(node.child)
    if isinstance(node, Call):
        return 1 + depth(node.arg)
    return 1 + max(depth(node.left), depth(node.right))


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # num ident op lparen rparen end
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        start_col = col
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_e = False
            while j < n and (source[j].isdigit() or source[j] == "."
                             or source[j] in "eE"
                             or (seen_e and source[j] in "+-" and source[j - 1] in "eE")):
                if source[j] in "eE":
                    # only scientific notation if followed by digit or sign+digit
                    k = j + 1
                    if k < n and source[k] in "+-":
                        k += 1
                    if k >= n or not source[k].isdigit():
                        break
                    seen_e = True
                j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"bad number literal '{text}'", line, start_col)
            tokens.append(_Token("num", text, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, line, start_col))
        elif c == "(":
            tokens.append(_Token("lparen", c, line, start_col))
        elif c == ")":
            tokens.append(_Token("rparen", c, line, start_col))
        else:
            raise ParseError(f"unexpected character '{c}'", line, start_col)
        col += 1
        i += 1
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], coords: list[str]):
        self.tokens = tokens
        self.pos = 0
        self.coords = list(coords)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected):
        tok = self.peek()
        what = repr(tok.text) if tok.kind != "end" else "end of input"
        raise ParseError(f"unexpected {what}", tok.line, tok.column, expected)

    def parse(self) -> Node:
        node = self.sum()
        if self.peek().kind != "end":
            self.fail({"operator", "end of input"})
        return node

    def sum(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(name, tok.line, tok.column)
                self.advance()
                arg = self.sum()
                if self.peek().kind != "rparen":
                    self.fail({")"})
                self.advance()
                return Call(name, arg)
            if name in self.coords:
                return Var(self.coords.index(name), name)
            if name in CONSTANTS:
                return Const(name)
            raise UnknownIdentifier(name, tok.line, tok.column)
        if tok.kind == "lparen":
            self.advance()
            node = self.sum()
            if self.peek().kind != "rparen":
                self.fail({")"})
            self.advance()
            return node
        self.fail({"number", "identifier", "("})


def parse(source: str, coords: list[str]) -> Node:
    """Parse ``source`` into an AST over the named coordinates."""
    if not source or not source.strip():
        raise ParseError("empty expression", 1, 1, {"expression"})
    return _Parser(_tokenize(source), coords).parse()


def to_source(node: Node) -> str:
    """Canonical fully-parenthesized form; re-parses to an equivalent AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.child)})"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


# ---------------------------------------------------------------------------
# Second-order dual numbers
# ---------------------------------------------------------------------------

class Dual2:
    """Value + gradient + Hessian, propagated by second-order chain rule."""

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @staticmethod
    def seed(value: float, index: int, n: int) -> "Dual2":
        g = np.zeros(n)
        g[index] = 1.0
        return Dual2(float(value), g, np.zeros((n, n)))

    @staticmethod
    def const(value: float, n: int) -> "Dual2":
        return Dual2(float(value), np.zeros(n), np.zeros((n, n)))

    def __add__(self, o):
        return Dual2(self.v + o.v, self.g + o.g, self.h + o.h)

    def __sub__(self, o):
        return Dual2(self.v - o.v, self.g - o.g, self.h - o.h)

    def __neg__(self):
        return Dual2(-self.v, -self.g, -self.h)

    def __mul__(self, o):
        cross = np.outer(self.g, o.g)
        return Dual2(
            self.v * o.v,
            self.v * o.g + o.v * self.g,
            self.v * o.h + o.v * self.h + cross + cross.T,
        )

    def __truediv__(self, o):
        if o.v == 0.0:
            raise DomainFault("division by zero")
        inv = _apply(o, lambda x: 1.0 / x, lambda x: -1.0 / x**2, lambda x: 2.0 / x**3)
        return self * inv

    def ipow(self, k: int) -> "Dual2":
        if k == 0:
            return Dual2.const(1.0, len(self.g))
        if k < 0:
            one = Dual2.const(1.0, len(self.g))
            return one / self.ipow(-k)
        result = self
        for _ in range(k - 1):
            result = result * self
        return result


def _apply(d: Dual2, f, df, d2f) -> Dual2:
    fv, dv, d2v = f(d.v), df(d.v), d2f(d.v)
    outer = np.outer(d.g, d.g)
    return Dual2(fv, dv * d.g, dv * d.h + d2v * outer)


def _fn_dual(name: str, d: Dual2) -> Dual2:
    x = d.v
    if name == "sin":
        return _apply(d, math.sin, math.cos, lambda t: -math.sin(t))
    if name == "cos":
        return _apply(d, math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t))
    if name == "tan":
        return _apply(d, math.tan, lambda t: 1.0 / math.cos(t) ** 2,
                      lambda t: 2.0 * math.tan(t) / math.cos(t) ** 2)
    if name == "sinh":
        return _apply(d, math.sinh, math.cosh, math.sinh)
    if name == "cosh":
        return _apply(d, math.cosh, math.sinh, math.cosh)
    if name == "tanh":
        return _apply(d, math.tanh, lambda t: 1.0 / math.cosh(t) ** 2,
                      lambda t: -2.0 * math.tanh(t) / math.cosh(t) ** 2)
    if name == "exp":
        return _apply(d, math.exp, math.exp, math.exp)
    if name == "log":
        if x <= 0.0:
            raise DomainFault(f"log of nonpositive argument {x}")
        return _apply(d, math.log, lambda t: 1.0 / t, lambda t: -1.0 / t**2)
    if name == "sqrt":
        if x < 0.0:
            raise DomainFault(f"sqrt of negative argument {x}")
        if x == 0.0:
            raise DomainFault("sqrt not differentiable at 0")
        return _apply(d, math.sqrt, lambda t: 0.5 / math.sqrt(t),
                      lambda t: -0.25 / t**1.5)
    if name == "abs":
        s = 1.0 if x >= 0.0 else -1.0
        return Dual2(abs(x), s * d.g, s * d.h)
    raise DomainFault(f"unknown function {name}")


_FN_FLOAT = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "exp": math.exp, "abs": abs,
}


def _integer_exponent(node: Node):
    """Exponent value when the exponent subtree is an integer literal."""
    if isinstance(node, Num) and float(node.value).is_integer():
        return int(node.value)
    if isinstance(node, Neg):
        inner = _integer_exponent(node.child)
        if inner is not None:
            return -inner
    return None


def evaluate(node: Node, point) -> float:
    """Plain float evaluation (hot path for ODE right-hand sides)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return float(point[node.index])
    if isinstance(node, Neg):
        return -evaluate(node.child, point)
    if isinstance(node, Call):
        x = evaluate(node.arg, point)
        fn = _FN_FLOAT.get(node.fn)
        if fn is not None:
            return fn(x)
        if node.fn == "log":
            if x <= 0.0:
                raise DomainFault(f"log of nonpositive argument {x}")
            return math.log(x)
        if node.fn == "sqrt":
            if x < 0.0:
                raise DomainFault(f"sqrt of negative argument {x}")
            return math.sqrt(x)
        raise DomainFault(f"unknown function {node.fn}")
    # binary
    a = evaluate(node.left, point)
    if node.op == "^":
        k = _integer_exponent(node.right)
        if k is not None:
            return a**k
        b = evaluate(node.right, point)
        if a <= 0.0:
            raise DomainFault(f"nonpositive base {a} for non-integer exponent")
        return math.exp(b * math.log(a))
    b = evaluate(node.right, point)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if b == 0.0:
        raise DomainFault("division by zero")
    return a / b


def _eval_dual(node: Node, duals: list[Dual2], n: int) -> Dual2:
    if isinstance(node, Num):
        return Dual2.const(node.value, n)
    if isinstance(node, Const):
        return Dual2.const(CONSTANTS[node.name], n)
    if isinstance(node, Var):
        return duals[node.index]
    if isinstance(node, Neg):
        return -_eval_dual(node.child, duals, n)
    if isinstance(node, Call):
        return _fn_dual(node.fn, _eval_dual(node.arg, duals, n))
    a = _eval_dual(node.left, duals, n)
    if node.op == "^":
        k = _integer_exponent(node.right)
        if k is not None:
            return a.ipow(k)
        b = _eval_dual(node.right, duals, n)
        if a.v <= 0.0:
            raise DomainFault(f"nonpositive base {a.v} for non-integer exponent")
        return _fn_dual("exp", b * _fn_dual("log", a))
    b = _eval_dual(node.right, duals, n)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


@dataclass(frozen=True)
class DualValue2:
    value: float
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        # keep the Hessian exactly symmetric regardless of rounding order
        h = np.asarray(self.hess, dtype=float)
        object.__setattr__(self, "hess", 0.5 * (h + h.T))
        object.__setattr__(self, "grad", np.asarray(self.grad, dtype=float))


def eval2(node: Node, point) -> DualValue2:
    """Value, gradient and Hessian at ``point`` via forward-mode duals."""
    point = np.asarray(point, dtype=float)
    n = len(point)
    duals = [Dual2.seed(point[i], i, n) for i in range(n)]
    d = _eval_dual(node, duals, n)
    return DualValue2(d.v, d.g, d.h)


def eval_third_fd(node: Node, point, direction: int) -> np.ndarray:
    """Central FD of the AD Hessian along coordinate ``direction``.

    Returns the symmetric matrix of third partials d3/dx_dir dx_i dx_j.
    """
    point = np.asarray(point, dtype=float)
    h = np.cbrt(np.finfo(float).eps) * max(1.0, abs(point[direction]))
    plus = point.copy()
    plus[direction] += h
    minus = point.copy()
    minus[direction] -= h
    return (eval2(node, plus).hess - eval2(node, minus).hess) / (2.0 * h)


def free_variables(node: Node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Neg):
        return free_variables(node.child)
    if isinstance(node, Call):
        return free_variables(node.arg)
    if isinstance(node, Bin):
        return free_variables(node.left) | free_variables(node.right)
    return set()
