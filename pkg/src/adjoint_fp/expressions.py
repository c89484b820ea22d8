"""Tiny arithmetic grammar for initial conditions.

Accepted: numeric literals, + - * /, parentheses, unary minus, the functions
sin, cos, exp, ln, the constant pi, and the coordinates x (and y on 2-D
grids).  Parsed by recursive descent into a closed-form evaluator; nothing
is ever passed to eval().
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grids import Grid, GridFunction

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()]))"
)

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "ln": np.log}


class ExpressionError(ValueError):
    pass


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExpressionError(f"unexpected character {text[pos:].strip()[0]!r}")
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


@dataclass(frozen=True)
class Expression:
    source: str
    _eval: object
    variables: frozenset[str]

    def __call__(self, x, y=None):
        env = {"x": x, "y": y}
        if "y" in self.variables and y is None:
            raise ExpressionError("expression uses y but no y coordinate given")
        return self._eval(env)

    def on_grid(self, grid: Grid) -> GridFunction:
        if "y" in self.variables and grid.dim < 2:
            raise ValidationError("expression", f"{self.source!r} uses y on a 1-D grid")
        mesh = grid.meshgrid()
        vals = self(mesh[0], mesh[1] if grid.dim == 2 else None)
        return GridFunction(grid, np.broadcast_to(np.asarray(vals, dtype=np.float64), grid.shape).copy())


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.variables = set()

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, got {val!r}")

    def parse(self):
        node = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(f"trailing input starting at {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                right = self.term()
                node = (lambda l, r, add: (lambda env: l(env) + r(env) if add else l(env) - r(env)))(
                    node, right, val == "+"
                )
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                right = self.factor()
                node = (lambda l, r, mul: (lambda env: l(env) * r(env) if mul else l(env) / r(env)))(
                    node, right, val == "*"
                )
            else:
                return node

    def factor(self):
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.factor()
            if val == "-":
                return lambda env: -inner(env)
            return inner
        return self.atom()

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return lambda env: val
        if kind == "name":
            if val == "pi":
                return lambda env: np.pi
            if val in ("x", "y"):
                self.variables.add(val)
                return lambda env, name=val: env[name]
            if val in _FUNCTIONS:
                fn = _FUNCTIONS[val]
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return lambda env: fn(inner(env))
            raise ExpressionError(f"unknown name {val!r}")
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExpressionError(f"unexpected token {val!r}" if val is not None else "unexpected end of expression")


def parse_expression(text: str) -> Expression:
    src = text.strip().strip('"').strip("'").strip()
    if not src:
        raise ExpressionError("empty expression")
    parser = _Parser(_tokenize(src))
    node = parser.parse()
    return Expression(source=src, _eval=node, variables=frozenset(parser.variables))
