"""Interpolation parameters: construction, composition and their constants."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import Interpolated, Power, Product, PsiParameter, Rescale
from .indices import STANDARD_GRID, interpolation_membership


class HypothesisViolation(ValueError):
    """Inputs break an assumption the construction depends on."""


def make_interpolation_parameter(f, s0, s1, check=True):
    """psi(tau) = tau^(-s0/(s1-s0)) f(tau^(1/(s1-s0))) on [1, inf), f(1) below."""
    if not s0 < s1:
        raise ValueError("need s0 < s1")
    if check and not interpolation_membership(f, s0, s1):
        raise HypothesisViolation(f"{f} does not satisfy the power bound with ({s0}, {s1})")
    width = s1 - s0
    base = Rescale(f, 1.0 / width)
    if s0 != 0:
        base = Product(Power(-s0 / width), base)
    return PsiParameter(base)


def compose_parameterized(f0, f1, psi, grid=None, bound=1e6, points=None):
    """The function t -> f0(t) psi(f1(t)/f0(t)); requires f0/f1 bounded.

    Boundedness is checked on the grid, or on ``points`` (t values) if given.
    """
    if points is None:
        x = (grid or STANDARD_GRID).t_logs()
    else:
        x = np.log(np.asarray(points, dtype=float))
    sup_ratio = float(np.exp(np.max(f0.log_at(x) - f1.log_at(x))))
    if not sup_ratio <= bound:
        raise HypothesisViolation(f"sup f0/f1 = {sup_ratio:.3g} exceeds {bound:.3g}")
    return Interpolated(f0, f1, psi)


def _psi_logs(lo, hi, n, extra):
    v = np.linspace(np.log(lo), np.log(hi), n)
    if extra is not None:
        e = np.log(np.asarray(extra, dtype=float).ravel())
        v = np.concatenate([v, e[e >= np.log(lo)]])
    return np.unique(v)


def pseudoconcavity_constant(psi, domain_lo, grid=None, t_max=None, n=256, extra=None):
    """sup of psi(t) / (psi(tau) max{1, t/tau}) over grid pairs in [domain_lo, t_max].

    ``extra`` adds points (e.g. a model's multipliers) to the grid.
    """
    if not domain_lo > 0:
        raise ValueError("domain_lo must be positive")
    if t_max is None:
        t_max = (grid or STANDARD_GRID).t_max
    t_max = max(t_max, domain_lo * np.e)
    v = _psi_logs(domain_lo, t_max, n, extra)
    lp = psi.log_at(v)
    # t <= tau: psi(t)/psi(tau); the sup over tau >= t is a suffix minimum
    suffix_min = np.minimum.accumulate(lp[::-1])[::-1]
    below = np.max(lp - suffix_min)
    # t > tau: (psi(t)/t) / (psi(tau)/tau); the sup over tau < t is a prefix minimum
    h = lp - v
    prefix_min = np.minimum.accumulate(h)
    above = np.max(h[1:] - prefix_min[:-1]) if h.size > 1 else 0.0
    return float(np.exp(max(below, above, 0.0)))


def dilation_function(psi, lam, lo=1e-6, hi=1e6, n=1025, extra=None):
    """sup over grid t of psi(lam t) / psi(t)."""
    v = _psi_logs(lo, hi, n, extra)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr > 0)):
        raise ValueError("lam must be positive")
    shift = np.log(lam_arr)[..., None]
    out = np.max(psi.log_at(v + shift) - psi.log_at(v), axis=-1)
    out = np.exp(out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PiecewiseLinear:
    x: np.ndarray
    y: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.x, self.y)
        lo_slope = (self.y[1] - self.y[0]) / (self.x[1] - self.x[0])
        hi_slope = (self.y[-1] - self.y[-2]) / (self.x[-1] - self.x[-2])
        out = np.where(t < self.x[0], self.y[0] + lo_slope * (t - self.x[0]), out)
        out = np.where(t > self.x[-1], self.y[-1] + hi_slope * (t - self.x[-1]), out)
        return float(out) if out.ndim == 0 else out


def least_concave_majorant(tau, values):
    """Upper concave envelope of the points (tau_i, values_i)."""
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if tau.size < 2 or tau.shape != values.shape:
        raise ValueError("need at least 2 samples of matching shape")
    if np.any(np.diff(tau) <= 0):
        raise ValueError("tau must be strictly increasing")
    hull = []
    for p in zip(tau, values):
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx, hy = (np.array(c) for c in zip(*hull))
    return PiecewiseLinear(hx, hy)
