"""Text form of OR functions.

Grammar (prefix, no whitespace significance)::

    expr  := atom | call
    atom  := 'pow:'num | 'logp:'num | 'loglogp:'num | 'logstar' | 'const:'num
           | 'log1p:'num | 'loglog2:'num
    call  := 'mul(' expr ',' expr ')' | 'div(' expr ',' expr ')'
           | 'rescale(' expr ',' num ')' | 'interp(' expr ',' expr ',' psi ')'
           | 'tab(' num ':' num (',' num ':' num)* ')'
    psi   := 'psi(' expr [',' num] ')'

``tab`` knots are written as log t : log value.
"""
from __future__ import annotations

import re

from .functions import (
    Const,
    Interpolated,
    Log1p,
    LogLog2,
    LogLogP,
    LogP,
    LogStar,
    OrFunction,
    Power,
    Product,
    PsiParameter,
    Quotient,
    Rescale,
    Tabulated,
)


class DslError(ValueError):
    def __init__(self, message, text, pos):
        super().__init__(f"{message} at column {pos + 1} in {text!r}")
        self.pos = pos


_ATOMS = {
    "pow": Power,
    "logp": LogP,
    "loglogp": LogLogP,
    "const": Const,
    "log1p": Log1p,
    "loglog2": LogLog2,
}
_NAME = re.compile(r"[a-z][a-z0-9]*")
_NUM = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _num(x):
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def render(f):
    """Inverse of :func:`parse`."""
    if isinstance(f, PsiParameter):
        if f.linear_below is None:
            return f"psi({render(f.base)})"
        return f"psi({render(f.base)},{_num(f.linear_below)})"
    if isinstance(f, LogStar):
        return "logstar"
    for name, cls in _ATOMS.items():
        if type(f) is cls:
            value = f.s if cls is Power else f.c if cls is Const else f.e
            return f"{name}:{_num(value)}"
    if isinstance(f, Product):
        return f"mul({render(f.lhs)},{render(f.rhs)})"
    if isinstance(f, Quotient):
        return f"div({render(f.lhs)},{render(f.rhs)})"
    if isinstance(f, Rescale):
        return f"rescale({render(f.f)},{_num(f.p)})"
    if isinstance(f, Interpolated):
        return f"interp({render(f.f0)},{render(f.f1)},{render(f.psi)})"
    if isinstance(f, Tabulated):
        knots = ",".join(f"{repr(u)}:{repr(v)}" for u, v in zip(f.log_grid, f.log_values))
        return f"tab({knots})"
    raise TypeError(f"cannot render {type(f).__name__}")


class _Parser:
    def __init__(self, text):
        self.text = text.replace(" ", "")
        self.pos = 0

    def fail(self, message):
        raise DslError(message, self.text, self.pos)

    def expect(self, ch):
        if not self.text.startswith(ch, self.pos):
            self.fail(f"expected {ch!r}")
        self.pos += len(ch)

    def name(self):
        m = _NAME.match(self.text, self.pos)
        if not m:
            self.fail("expected a function name")
        self.pos = m.end()
        return m.group()

    def number(self):
        m = _NUM.match(self.text, self.pos)
        if not m:
            self.fail("expected a number")
        self.pos = m.end()
        return float(m.group())

    def expr(self):
        start = self.pos
        name = self.name()
        if name in _ATOMS:
            self.expect(":")
            value = self.number()
            try:
                return _ATOMS[name](value)
            except ValueError as exc:
                self.pos = start
                self.fail(str(exc))
        if name == "logstar":
            return LogStar()
        if name in ("mul", "div"):
            self.expect("(")
            lhs = self.expr()
            self.expect(",")
            rhs = self.expr()
            self.expect(")")
            return Product(lhs, rhs) if name == "mul" else Quotient(lhs, rhs)
        if name == "rescale":
            self.expect("(")
            f = self.expr()
            self.expect(",")
            p = self.number()
            self.expect(")")
            return Rescale(f, p)
        if name == "interp":
            self.expect("(")
            f0 = self.expr()
            self.expect(",")
            f1 = self.expr()
            self.expect(",")
            psi = self.psi()
            self.expect(")")
            return Interpolated(f0, f1, psi)
        if name == "tab":
            self.expect("(")
            us, vs = [], []
            while True:
                us.append(self.number())
                self.expect(":")
                vs.append(self.number())
                if self.text.startswith(")", self.pos):
                    break
                self.expect(",")
            self.expect(")")
            return Tabulated(tuple(us), tuple(vs))
        if name == "psi":
            self.pos = start
            self.fail("an interpolation parameter is not an OR function here")
        self.pos = start
        self.fail(f"unknown function {name!r}")

    def psi(self):
        if self.name() != "psi":
            self.fail("expected psi(...)")
        self.expect("(")
        base = self.expr()
        nu = None
        if self.text.startswith(",", self.pos):
            self.pos += 1
            nu = self.number()
        self.expect(")")
        return PsiParameter(base, nu)

    def done(self, value):
        if self.pos != len(self.text):
            self.fail("trailing characters")
        return value


def parse(text) -> OrFunction:
    p = _Parser(text)
    return p.done(p.expr())


def parse_psi(text) -> PsiParameter:
    """Parse ``psi(...)`` or a bare OR function used as the right branch."""
    p = _Parser(text)
    if p.text.startswith("psi("):
        return p.done(p.psi())
    return PsiParameter(p.done(p.expr()))
