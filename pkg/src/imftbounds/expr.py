"""Toy maps written in a small arithmetic expression language.

Grammar (integer exponents only)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("+" | "-") unary | power
    power := atom ("^" ["-"] INT)?
    atom  := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC  := sin | cos | exp

Parsed expressions are converted to sympy for differentiation and compiled
with lambdify. If every second derivative is constant the Hessian bound is
exact and reported as analytic; otherwise it is sampled.
"""

from __future__ import annotations

import re
from typing import Optional, Sequence

import numpy as np
import sympy as sp

from .errors import ValidationError
from .linalg import bilinear_norm
from .oracle import MapOracle

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(.))")
FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}


def tokenize(text: str):
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", num))
        elif name is not None:
            out.append(("name", name))
        elif op is not None:
            if op not in "+-*/^()":
                raise ValidationError(f"unexpected character {op!r} in {text!r}")
            out.append(("op", op))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text, symbols):
        self.toks = tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.text = text

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ValidationError(f"expected {value or kind} at token {self.i} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        self.take("end")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            r = self.unary()
            e = e * r if op == "*" else e / r
        return e

    def unary(self):
        if self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            e = self.unary()
            return e if op == "+" else -e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            sign = 1
            if self.peek() == ("op", "-"):
                self.take()
                sign = -1
            tok = self.take("num")
            if not re.fullmatch(r"\d+", tok[1]):
                raise ValidationError(f"exponent must be an integer in {self.text!r}")
            return base ** (sign * int(tok[1]))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return sp.Float(val) if any(c in val for c in ".eE") else sp.Integer(int(val))
        if kind == "name":
            self.take()
            if val in FUNCS:
                self.take("op", "(")
                e = self.expr()
                self.take("op", ")")
                return FUNCS[val](e)
            if val not in self.symbols:
                raise ValidationError(f"unknown variable {val!r} in {self.text!r}")
            return self.symbols[val]
        if (kind, val) == ("op", "("):
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        raise ValidationError(f"unexpected token {val!r} in {self.text!r}")


def parse_expr(text: str, names: Sequence[str]):
    symbols = {n: sp.Symbol(n) for n in names}
    return _Parser(text, symbols).parse()


def _compile(expr_matrix, xs, ys):
    fn = sp.lambdify([xs, ys], expr_matrix, modules="numpy")
    shape = np.shape(np.array(expr_matrix.tolist(), dtype=object)) if isinstance(expr_matrix, sp.MatrixBase) else None

    def call(x, y):
        out = np.array(fn(list(x), list(y)), dtype=float)
        return out.reshape(shape) if shape is not None else out

    return call


def expr_map(x_names: Sequence[str], y_names: Sequence[str], exprs: Sequence[str], name: str = "expr",
             constants: Optional[dict] = None) -> MapOracle:
    """Build a MapOracle from component expressions.

    `constants` may assert analytic bounds, e.g. {"Kyy": 2.0}; they are
    taken on trust and reported as analytic.
    """
    x_names, y_names = list(x_names), list(y_names)
    if len(set(x_names + y_names)) != len(x_names) + len(y_names):
        raise ValidationError("variable names must be distinct")
    names = x_names + y_names
    F = sp.Matrix([parse_expr(e, names) for e in exprs])
    xs = [sp.Symbol(n) for n in x_names]
    ys = [sp.Symbol(n) for n in y_names]
    k, n, m = len(exprs), len(xs), len(ys)
    Jx = F.jacobian(xs) if n else sp.zeros(k, 0)
    Jy = F.jacobian(ys) if m else sp.zeros(k, 0)
    f_mat = _compile(F, xs, ys)
    f = lambda x, y: f_mat(x, y).ravel()
    jx = _compile(Jx, xs, ys) if n else None
    jy = _compile(Jy, xs, ys) if m else None
    groups = {"x": xs, "y": ys}

    tensors = {}
    constant = {}
    for which in ("xx", "xy", "yy"):
        a, b = groups[which[0]], groups[which[1]]
        T = [[[sp.diff(F[i], u, v) for v in b] for u in a] for i in range(k)]
        flat = [t for row in T for col in row for t in col]
        constant[which] = all(not sp.sympify(t).free_symbols for t in flat)
        tensors[which] = sp.lambdify([xs, ys], T, modules="numpy") if flat else None
    dims = {"x": n, "y": m}

    def hess(x, y, which):
        fn = tensors[which]
        shape = (k, dims[which[0]], dims[which[1]])
        if fn is None:
            return np.zeros(shape)
        return np.array(fn(list(x), list(y)), dtype=float).reshape(shape)

    user = dict(constants or {})
    zero_y = np.zeros(m)
    zero_x = np.zeros(n)

    def hess_provider(ball, which, norm):
        key = "K" + which
        if key in user:
            return float(user[key])
        if constant[which]:
            return bilinear_norm(hess(zero_x, zero_y, which), norm)
        return None

    def lip_provider(ball, which, norm):
        # affine Jacobians: the modulus is linear in the radii
        if which == "jx":
            if constant["xx"]:
                return bilinear_norm(hess(zero_x, zero_y, "xx"), norm) * ball.Rx
            return None
        if constant["xy"] and constant["yy"]:
            Tyx = np.transpose(hess(zero_x, zero_y, "xy"), (0, 2, 1))
            return bilinear_norm(Tyx, norm) * ball.Rx + bilinear_norm(hess(zero_x, zero_y, "yy"), norm) * ball.Ry
        return None

    return MapOracle(n=n, m=m, k=k, f=f, jx=jx, jy=jy, hess=hess, hess_provider=hess_provider,
                     lip_provider=lip_provider, name=name)


def expr_map_single(x_names: Sequence[str], exprs: Sequence[str], name: str = "expr", constants=None) -> MapOracle:
    """Single-argument expression map (inverse function setting)."""
    return expr_map(x_names, [], exprs, name=name, constants=constants)
