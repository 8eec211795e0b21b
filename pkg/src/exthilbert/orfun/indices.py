"""Grid certificates for the OR bounds and Matuszewska index estimates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np


class BoundaryWarning(UserWarning):
    """Membership decided at the edge of an index, where attainment matters."""


@dataclass(frozen=True)
class GridSpec:
    t_max: float = 1e6
    n_t: int = 256
    lam_max: float = 1e3
    n_lam: int = 64

    def t_logs(self):
        return np.linspace(0.0, np.log(self.t_max), self.n_t)

    def lam_logs(self):
        return np.linspace(0.0, np.log(self.lam_max), self.n_lam)

    def refined(self):
        return replace(self, n_t=2 * self.n_t - 1, n_lam=2 * self.n_lam - 1)

    def extended(self):
        return replace(self, t_max=self.t_max ** 2, lam_max=self.lam_max ** 2,
                       n_t=2 * self.n_t, n_lam=2 * self.n_lam)

    def as_dict(self):
        return {"t_range": [1.0, self.t_max], "lambda_range": [1.0, self.lam_max],
                "counts": [self.n_t, self.n_lam]}


STANDARD_GRID = GridSpec()


@dataclass(frozen=True)
class IndexEstimate:
    sigma0: float
    sigma1: float
    grid_spec: GridSpec
    residual: float
    inconclusive: bool = False
    drift: float = 0.0


def _log_ratios(f, x, L):
    """log f(lam t) - log f(t) on the (log t, log lam) mesh."""
    return f.log_at(x[:, None] + L[None, :]) - f.log_at(x)[:, None]


def verify_or_membership(f, a, grid=None):
    """Smallest c with 1/c <= f(lam t)/f(t) <= c over grid t and lam in [1, a]."""
    if not a > 1:
        raise ValueError("a must exceed 1")
    grid = grid or STANDARD_GRID
    x = grid.t_logs()
    L = np.linspace(0.0, np.log(a), grid.n_lam)
    r = _log_ratios(f, x, L)
    if not np.all(np.isfinite(r)):
        raise OverflowError(f"non-finite ratio for {f}; check tabulated extrapolation")
    return float(np.exp(np.max(np.abs(r))))


def _slope_bracket(f, grid):
    # Slopes of log f over windows with t in the upper half of the grid and
    # lam in the upper half of its range, regressed on 1/(1 + window centre).
    # The intercept is the asymptotic slope; the residual spread is kept as
    # the gap between the lower and upper index.
    x = grid.t_logs()
    L = grid.lam_logs()
    x = x[x >= x[-1] / 2]
    L = L[L >= L[-1] / 2]
    s = (_log_ratios(f, x, L) / L[None, :]).ravel()
    w = (1.0 / (1.0 + x[:, None] + L[None, :] / 2)).ravel()
    design = np.column_stack([np.ones_like(w), w])
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    resid = s - design @ coef
    return float(coef[0] + resid.min()), float(coef[0] + resid.max())


def _bound_constants(f, s0, s1, grid):
    x = grid.t_logs()
    L = grid.lam_logs()
    r = _log_ratios(f, x, L)
    log_c1 = np.max(r - s1 * L[None, :])
    log_c0 = np.min(r - s0 * L[None, :])
    return float(log_c0), float(log_c1)


def _bound_violation(f, s0, s1, log_c0, log_c1, grid):
    # verification points sit midway between the fitting grid points
    x = grid.t_logs()
    L = grid.lam_logs()
    xm = (x[1:] + x[:-1]) / 2
    Lm = (L[1:] + L[:-1]) / 2
    r = _log_ratios(f, xm, Lm)
    over = np.max(r - s1 * Lm[None, :] - log_c1)
    under = np.max(log_c0 + s0 * Lm[None, :] - r)
    return float(max(0.0, np.expm1(max(over, under))))


def matuszewska_indices(f, grid_spec=None, drift_tol=0.02):
    """Estimate the lower and upper Matuszewska indices of f."""
    grid = grid_spec or STANDARD_GRID
    if grid.lam_max < 1e3 or grid.t_max < 1e6:
        raise ValueError("grid must reach lambda >= 1e3 and t >= 1e6")
    s0, s1 = _slope_bracket(f, grid)
    r0, r1 = _slope_bracket(f, grid.refined())
    drift = max(abs(r0 - s0), abs(r1 - s1)) / max(1.0, abs(s0), abs(s1))
    log_c0, log_c1 = _bound_constants(f, s0, s1, grid)
    residual = _bound_violation(f, s0, s1, log_c0, log_c1, grid)
    return IndexEstimate(s0, s1, grid, residual, inconclusive=drift > drift_tol, drift=drift)


def _constant_is_stable(f, s, side, grid, growth):
    # the constant of the one-sided bound must not keep growing as the grid
    # is extended; a bound that only holds with a grid-dependent constant is
    # treated as failing
    log_c0, log_c1 = _bound_constants(f, s, s, grid)
    ext0, ext1 = _bound_constants(f, s, s, grid.extended())
    if side == "lower":
        return log_c0 - ext0 <= np.log(growth)
    return ext1 - log_c1 <= np.log(growth)


def interpolation_membership(f, s0, s1, margin=1e-3, band=0.05, grid=None, growth=1.05):
    """Decide whether f satisfies the two-sided power bound with exponents (s0, s1).

    Clear cases follow the index estimate with ``margin``. When an exponent
    sits within ``band`` of the estimated index on the wrong side, the bound
    is re-certified directly on an extended grid and a BoundaryWarning is
    issued, since attainment of the index cannot be settled from samples.
    """
    if not s0 < s1:
        raise ValueError("need s0 < s1")
    grid = grid or STANDARD_GRID
    est = matuszewska_indices(f, grid)
    verdict = True
    if not s0 <= est.sigma0 - margin:
        if s0 > est.sigma0 + band:
            return False
        warnings.warn(f"s0={s0} is at the lower index of {f}; checked directly", BoundaryWarning)
        verdict = verdict and _constant_is_stable(f, s0, "lower", grid, growth)
    if not est.sigma1 + margin <= s1:
        if s1 < est.sigma1 - band:
            return False
        warnings.warn(f"s1={s1} is at the upper index of {f}; checked directly", BoundaryWarning)
        verdict = verdict and _constant_is_stable(f, s1, "upper", grid, growth)
    return bool(verdict)
