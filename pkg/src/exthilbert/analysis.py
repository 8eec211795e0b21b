"""Convergence criteria for improper integrals of OR functions and the rate factorization.

All integrals are taken in the variable u = log t, with integrands held as
logarithms, so panels far beyond the float range of t are usable.

The tail test runs on three panel families. Level 0 uses panels of width
log 2 in u (dyadic in t), level 1 panels dyadic in u, level 2 panels dyadic
in log u. A family decides when its panel contributions decay
geometrically (ratio below 0.9 over three consecutive panels and the Aitken
extrapolated total settled) or are non-decreasing at the far end of its
range. Slowly varying integrands that stall at one level become geometric
or flat at the next.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .orfun import Tabulated

LOG2 = float(np.log(2.0))
NODES = 32
RATIO_MAX = 0.9
RUN = 3
SETTLED_RTOL = 1e-6
LOOSE_RTOL = 1e-2
LEVEL_PANELS = (60, 60, None)
LEVEL2_WMAX = 600.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(NODES)
_LOG_GL_W = np.log(_GL_W)


class PreconditionError(ValueError):
    """A certificate required before an operation did not pass."""


class MonotonicityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Verdict:
    kind: str
    value: float | None
    tail_ratio: float
    truncation: float
    grid_spec: dict = field(default_factory=dict)
    log_value: float | None = None

    def as_dict(self):
        out = {"kind": self.kind}
        if self.value is not None:
            out["value"] = self.value
        out["tail_ratio"] = self.tail_ratio
        out["truncation"] = self.truncation
        out["grid_spec"] = dict(self.grid_spec)
        return out


def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.ravel()[0])


def _level_map(level, z):
    """u(z) and log |du/dz| for each panel family."""
    if level == 0:
        return z, np.zeros_like(z)
    if level == 1:
        return np.exp(z), z
    w = np.exp(z)
    return np.exp(w), w + z


def _log_panels(logh, level, edges):
    """log of the integral over each [edges[i], edges[i+1]] in the level variable."""
    a, b = edges[:-1, None], edges[1:, None]
    half = (b - a) / 2
    z = a + half * (_GL_X[None, :] + 1.0)
    u, jac = _level_map(level, z)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = logh(u) + jac
    if np.any(np.isnan(vals)) or np.any(vals == np.inf):
        bad = u[~np.isfinite(vals) & ~(vals == -np.inf)]
        raise OverflowError(f"integrand not finite near log t = {float(bad.ravel()[0]):.6g}")
    return _logsumexp(vals + _LOG_GL_W[None, :], axis=1) + np.log(half[:, 0])


def _log_integral(logh, u_lo, u_hi):
    """Plain composite integral over [u_lo, u_hi] in u."""
    if u_hi <= u_lo:
        return -np.inf
    m = max(1, int(np.ceil((u_hi - u_lo) / LOG2)))
    edges = np.linspace(u_lo, u_hi, m + 1)
    return _logsumexp(_log_panels(logh, 0, edges))


def _scan_level(logh, level, u_lo):
    """Run one panel family; return (kind, log_value, ratio, log t reached, info)."""
    if level == 0:
        start, prefix = u_lo, -np.inf
        count = LEVEL_PANELS[0]
    elif level == 1:
        u_start = max(u_lo, 1.0)
        start, prefix = np.log(u_start), _log_integral(logh, u_lo, u_start)
        count = LEVEL_PANELS[1]
    else:
        u_start = max(u_lo, np.e)
        w_start = np.log(u_start)
        start, prefix = np.log(w_start), _log_integral(logh, u_lo, u_start)
        count = int(np.floor(np.log(LEVEL2_WMAX / w_start) / LOG2))
    if count < RUN + 1:
        return "Inconclusive", None, float("nan"), float(_level_map(level, np.array(start))[0]), {}
    edges = start + LOG2 * np.arange(count + 1)
    lp = _log_panels(logh, level, edges)
    u_edges = _level_map(level, edges)[0]

    log_s = prefix
    est_prev = None
    ratios = []
    drift = np.inf
    for k in range(count):
        log_s = np.logaddexp(log_s, lp[k])
        if k == 0:
            continue
        if lp[k] == -np.inf:
            r = 0.0
        else:
            r = float(np.exp(lp[k] - lp[k - 1]))
        ratios.append(r)
        if r < 1.0:
            log_tail = lp[k] + np.log(r) - np.log1p(-r) if r > 0 else -np.inf
            est = np.logaddexp(log_s, log_tail)
        else:
            est = np.inf
        if est_prev is not None and np.isfinite(est) and np.isfinite(est_prev):
            drift = abs(float(np.expm1(est - est_prev)))
        elif est_prev is not None and est == est_prev == -np.inf:
            drift = 0.0
        else:
            drift = np.inf
        est_prev = est
        info = {"level": level, "panels": k + 1, "nodes": NODES, "value_rtol": drift}
        recent = ratios[-RUN:]
        geometric = len(recent) == RUN and all(x < RATIO_MAX for x in recent)
        if geometric and drift <= SETTLED_RTOL:
            return "Converges", float(est), r, float(u_edges[k + 1]), info
    info = {"level": level, "panels": count, "nodes": NODES, "value_rtol": drift}
    recent = ratios[-RUN:]
    tail_lp = lp[-RUN - 1:]
    if all(x < RATIO_MAX for x in recent) and drift <= LOOSE_RTOL:
        return "Converges", float(est_prev), ratios[-1], float(u_edges[-1]), info
    if np.all(np.diff(tail_lp) >= np.log1p(-1e-9)):
        return "Diverges", None, ratios[-1], float(u_edges[-1]), info
    return "Inconclusive", None, ratios[-1], float(u_edges[-1]), info


def _adaptive(logh, u_lo, label):
    last = None
    for level in (0, 1, 2):
        kind, log_value, ratio, reach, info = _scan_level(logh, level, u_lo)
        last = (ratio, reach, info)
        if kind != "Inconclusive":
            break
    ratio, reach, info = last
    spec = {"integral": label, "lower_log_t": u_lo, **info}
    if kind == "Converges":
        value = float(np.exp(log_value))
        return Verdict(kind, value, ratio, reach, spec, log_value)
    return Verdict(kind, None, ratio, reach, spec)


def _criterion_integrand(phi, power):
    def logh(u):
        a, r = phi.log_split(u)
        return (power - 2.0 * a) * u - 2.0 * r

    return logh


def criterion_integral(phi, q, n, lower=1.0):
    """Verdict on the integral of t^(2q+n-1) / phi(t)^2 over [lower, inf)."""
    if q < 0 or n < 1 or int(q) != q or int(n) != n:
        raise ValueError("q must be a nonnegative integer and n a positive integer")
    if not lower >= 1.0:
        raise ValueError("lower limit must be >= 1")
    logh = _criterion_integrand(phi, 2 * q + n)
    return _adaptive(logh, float(np.log(lower)), f"criterion(q={q},n={n})")


def is_nondecreasing(phi, grid_logs=None):
    x = np.linspace(0.0, np.log(1e6), 256) if grid_logs is None else grid_logs
    return bool(np.all(np.diff(phi.log_at(x)) >= -1e-12))


def orlicz_integral(phi, lower=2.0):
    """Verdict on the integral of 1 / (t log t phi(t)^2) over [lower, inf)."""
    if not lower > 1.0:
        raise ValueError("lower limit must exceed 1")
    if not is_nondecreasing(phi):
        warnings.warn(f"{phi} is not nondecreasing on the grid", MonotonicityWarning)

    def logh(u):
        a, r = phi.log_split(u)
        return -np.log(u) - 2.0 * a * u - 2.0 * r

    return _adaptive(logh, float(np.log(lower)), "orlicz")


@dataclass(frozen=True)
class RateFactorization:
    phi1: Tabulated
    phi2: Tabulated
    epsilon: float
    eta_table: Tabulated
    checks: dict

    @property
    def verified(self):
        return all(self.checks[k]["passed"] for k in self.checks)


def _eta_knots(logh, n_knots, u_max):
    # knots uniform in log(1 + u); each gap is split into panels of width <= log 2
    knots = np.expm1(np.linspace(0.0, np.log1p(u_max), n_knots))
    knots[0] = 0.0
    gaps = np.array([_log_integral(logh, a, b) for a, b in zip(knots[:-1], knots[1:])])
    tail = _adaptive(logh, float(knots[-1]), "eta tail")
    if tail.kind != "Converges":
        raise PreconditionError(f"tail of the criterion integral beyond log t = {knots[-1]:.6g} is {tail.kind}")
    log_eta = np.empty_like(knots)
    log_eta[-1] = tail.log_value
    for i in range(len(gaps) - 1, -1, -1):
        log_eta[i] = np.logaddexp(gaps[i], log_eta[i + 1])
    return knots, log_eta


def rate_factorization(phi, q, n, epsilon, log_t_max=1e4, n_knots=257):
    """Split phi = phi1 * phi2 with phi1 = eta^-eps unbounded and phi2 = phi eta^eps."""
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    verdict = criterion_integral(phi, q, n)
    if verdict.kind != "Converges":
        raise PreconditionError(f"criterion integral for {phi} is {verdict.kind}")
    logh = _criterion_integrand(phi, 2 * q + n)
    knots, log_eta = _eta_knots(logh, n_knots, log_t_max)
    log_phi = phi.log_at(knots)
    phi1 = Tabulated(tuple(knots), tuple(-epsilon * log_eta))
    phi2 = Tabulated(tuple(knots), tuple(log_phi + epsilon * log_eta))
    eta = Tabulated(tuple(knots), tuple(log_eta))

    product_gap = float(np.max(np.abs(np.expm1(phi1.log_at(knots) + phi2.log_at(knots) - log_phi))))
    log_growth = float(phi1.log_at(knots[-1]) - phi1.log_at(0.0))
    phi2_verdict = criterion_integral(phi2, q, n)
    checks = {
        "product": {"value": product_gap, "tolerance": 1e-8, "passed": product_gap <= 1e-8},
        "phi1_growth": {"log_ratio": log_growth, "threshold": 10.0,
                        "passed": log_growth > np.log(10.0)},
        "phi2_criterion": {"value": phi2_verdict.kind, "passed": phi2_verdict.kind == "Converges"},
    }
    return RateFactorization(phi1, phi2, float(epsilon), eta, checks)
