"""Positive functions on [1, inf) built from combinators.

Every node evaluates two ways: directly on t (``f(t)``) and in log-log form
(``f.log_at(u) = log f(exp(u))``). The log form never builds ``exp(u)`` and
stays finite for u far beyond the float range of t, which the quadrature
and tabulation code rely on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of an OR function."""


class TabulatedDataError(ValueError):
    """Tabulated knots or values are unusable."""


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


class OrFunction:
    """Base class for positive functions on [1, inf)."""

    def __call__(self, t):
        arr, scalar = _as_array(t)
        if np.any(~(arr >= 1.0)):
            raise DomainError(f"{self} is defined for t >= 1 only")
        with np.errstate(over="ignore"):
            val = self._eval(arr)
        return _out(val, scalar)

    def log_at(self, u):
        """Return log f(exp(u)) for u >= 0."""
        arr, scalar = _as_array(u)
        if np.any(~(arr >= 0.0)):
            raise DomainError(f"{self} is defined for log t >= 0 only")
        return _out(self._logu(arr), scalar)

    def log_split(self, u):
        """Return (a, r) with log f(exp(u)) = a*u + r(u).

        The linear part is kept apart so that integrands such as
        t^k / f(t)^2 cancel exactly for very large u.
        """
        arr, scalar = _as_array(u)
        if np.any(~(arr >= 0.0)):
            raise DomainError(f"{self} is defined for log t >= 0 only")
        a, r = self._split(arr)
        return a, _out(np.broadcast_to(r, arr.shape).astype(float), scalar)

    def _eval(self, t):
        raise NotImplementedError

    def _logu(self, u):
        raise NotImplementedError

    def _split(self, u):
        return 0.0, self._logu(u)

    def __mul__(self, other):
        return Product(self, other)

    def __truediv__(self, other):
        return Quotient(self, other)

    def __str__(self):
        from .dsl import render

        return render(self)


@dataclass(frozen=True)
class Power(OrFunction):
    s: float

    def _eval(self, t):
        return t ** self.s

    def _logu(self, u):
        return self.s * u

    def _split(self, u):
        return float(self.s), np.zeros_like(u)


@dataclass(frozen=True)
class LogP(OrFunction):
    """(1 + log t)^e"""

    e: float

    def _eval(self, t):
        return (1.0 + np.log(t)) ** self.e

    def _logu(self, u):
        return self.e * np.log1p(u)


@dataclass(frozen=True)
class LogLogP(OrFunction):
    """(1 + log(1 + log t))^e"""

    e: float

    def _eval(self, t):
        return (1.0 + np.log1p(np.log(t))) ** self.e

    def _logu(self, u):
        return self.e * np.log1p(np.log1p(u))


@dataclass(frozen=True)
class LogStar(OrFunction):
    """max{1, log t}"""

    def _eval(self, t):
        return np.maximum(1.0, np.log(t))

    def _logu(self, u):
        return np.log(np.maximum(1.0, u))


@dataclass(frozen=True)
class Log1p(OrFunction):
    """(log(1 + t))^e"""

    e: float

    def _eval(self, t):
        return np.log1p(t) ** self.e

    def _logu(self, u):
        # log(1 + e^u) = u + log(1 + e^-u)
        return self.e * np.log(u + np.log1p(np.exp(-u)))


@dataclass(frozen=True)
class LogLog2(OrFunction):
    """(log log(2 + t))^e"""

    e: float

    def _eval(self, t):
        return np.log(np.log(2.0 + t)) ** self.e

    def _logu(self, u):
        return self.e * np.log(np.log(u + np.log1p(2.0 * np.exp(-u))))


@dataclass(frozen=True)
class Const(OrFunction):
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Const requires a positive value")

    def _eval(self, t):
        return np.full_like(t, self.c)

    def _logu(self, u):
        return np.full_like(u, np.log(self.c))


@dataclass(frozen=True)
class Product(OrFunction):
    lhs: OrFunction
    rhs: OrFunction

    def _eval(self, t):
        return self.lhs._eval(t) * self.rhs._eval(t)

    def _logu(self, u):
        return self.lhs._logu(u) + self.rhs._logu(u)

    def _split(self, u):
        a, r = self.lhs._split(u)
        b, q = self.rhs._split(u)
        return a + b, r + q


@dataclass(frozen=True)
class Quotient(OrFunction):
    lhs: OrFunction
    rhs: OrFunction

    def _eval(self, t):
        den = self.rhs._eval(t)
        if np.any(den == 0):
            raise ZeroDivisionError(f"denominator {self.rhs} vanishes")
        return self.lhs._eval(t) / den

    def _logu(self, u):
        return self.lhs._logu(u) - self.rhs._logu(u)

    def _split(self, u):
        a, r = self.lhs._split(u)
        b, q = self.rhs._split(u)
        return a - b, r - q


@dataclass(frozen=True)
class Rescale(OrFunction):
    """f(t^p), p > 0."""

    f: OrFunction
    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("Rescale requires p > 0")

    def _eval(self, t):
        return self.f._eval(t ** self.p)

    def _logu(self, u):
        return self.f._logu(self.p * u)

    def _split(self, u):
        a, r = self.f._split(self.p * u)
        return a * self.p, r


@dataclass(frozen=True)
class Tabulated(OrFunction):
    """Knot table interpolated linearly in (log t, log f).

    Knots are stored as log t so tables can reach far past float range.
    Beyond the last knot the last segment is extended (power law).
    """

    log_grid: tuple
    log_values: tuple

    def __post_init__(self):
        g = np.asarray(self.log_grid, dtype=float)
        v = np.asarray(self.log_values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise TabulatedDataError("need matching 1-d knot arrays with at least 2 knots")
        if g[0] != 0.0:
            raise TabulatedDataError("first knot must be t = 1")
        if np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
            raise TabulatedDataError("knots must be strictly increasing and finite")
        if not np.all(np.isfinite(v)):
            raise TabulatedDataError("values must be positive and finite")
        object.__setattr__(self, "log_grid", tuple(float(x) for x in g))
        object.__setattr__(self, "log_values", tuple(float(x) for x in v))

    @classmethod
    def from_values(cls, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(~(values > 0)):
            raise TabulatedDataError("non-positive tabulated value")
        if grid.size and grid[0] != 1.0:
            raise TabulatedDataError("first knot must be t = 1")
        return cls(tuple(np.log(grid)), tuple(np.log(values)))

    @property
    def grid(self):
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(self.log_grid))

    @property
    def values(self):
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(self.log_values))

    def _eval(self, t):
        return np.exp(self._logu(np.log(t)))

    def _logu(self, u):
        g = np.asarray(self.log_grid)
        v = np.asarray(self.log_values)
        out = np.interp(u, g, v)
        beyond = u > g[-1]
        if np.any(beyond):
            slope = (v[-1] - v[-2]) / (g[-1] - g[-2])
            out = np.where(beyond, v[-1] + slope * (u - g[-1]), out)
        return out


@dataclass(frozen=True)
class PsiParameter:
    """Interpolation parameter on (0, inf).

    Equal to ``base`` on [1, inf) and to base(1) on (0, 1). With
    ``linear_below = nu`` the function is further replaced on (0, nu) by the
    line psi(nu) * tau / nu, which leaves values on [nu, inf) untouched.
    """

    base: OrFunction
    linear_below: Optional[float] = field(default=None)

    def __post_init__(self):
        if self.linear_below is not None and not self.linear_below > 0:
            raise ValueError("linear_below must be positive")

    def __call__(self, tau):
        arr, scalar = _as_array(tau)
        if np.any(~(arr > 0)):
            raise DomainError("interpolation parameters are defined for tau > 0")
        return _out(np.exp(self._logv(np.log(arr))), scalar)

    def log_at(self, v):
        """Return log psi(exp(v)) for real v."""
        arr, scalar = _as_array(v)
        return _out(self._logv(arr), scalar)

    def _logv(self, v):
        out = self.base._logu(np.maximum(v, 0.0))
        if self.linear_below is not None:
            lnu = np.log(self.linear_below)
            at_nu = self.base._logu(np.maximum(lnu, 0.0))
            out = np.where(v < lnu, at_nu + (v - lnu), out)
        return out

    def with_linear_below(self, nu):
        return PsiParameter(self.base, float(nu))

    def __str__(self):
        from .dsl import render

        return render(self)


@dataclass(frozen=True)
class Interpolated(OrFunction):
    """f0(t) * psi(f1(t) / f0(t))"""

    f0: OrFunction
    f1: OrFunction
    psi: PsiParameter

    def _eval(self, t):
        a = self.f0._eval(t)
        return a * self.psi(self.f1._eval(t) / a)

    def _logu(self, u):
        l0 = self.f0._logu(u)
        return l0 + self.psi._logv(self.f1._logu(u) - l0)


def evaluate(f, t):
    """Evaluate an OR function (t >= 1) or an interpolation parameter (t > 0)."""
    return f(t)
