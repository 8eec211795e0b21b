"""Trigonometric fields on the n-torus with A = (1 - Laplacian)^(1/2).

A field is a cube of Fourier coefficients c_k, |k_i| <= M, representing
f(x) = sum_k c_k exp(i k.x) on [0, 2 pi)^n. The torus carries the
normalized measure (total mass 1), so the exponentials are orthonormal and
the L2 norm is the l2 norm of the coefficients.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analysis import PreconditionError, criterion_integral
from .report import FitRecord, RATE_COLUMNS, to_csv

PROFILES = ("single_mode", "radial_decay", "random_in_ball")
PHI1_GROWTH_LOG_T = 1e4


@dataclass(frozen=True, eq=False)
class EigenEnumeration:
    """Modes of the cube sorted by <k> = (1 + |k|^2)^(1/2), ties broken lexicographically."""

    n: int
    M: int
    k: np.ndarray
    nu: np.ndarray
    flat_index: np.ndarray

    def __len__(self):
        return self.nu.size

    def index_points(self):
        """j^(1/n) for j = 1..N."""
        return np.arange(1, len(self) + 1, dtype=float) ** (1.0 / self.n)

    def weyl_ratios(self):
        """nu_j / j^(1/n) for j > 1."""
        return self.nu[1:] / self.index_points()[1:]

    def weyl_bracket(self):
        r = self.weyl_ratios()
        if r.size == 0:
            return (1.0, 1.0)
        return float(r.min()), float(r.max())


def _check_shape(n, M):
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")


@lru_cache(maxsize=16)
def enumerate_modes(n, M):
    _check_shape(n, M)
    axis = np.arange(-M, M + 1)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=1)
    sq = np.sum(k * k, axis=1)
    # lexsort: last key is primary
    order = np.lexsort(tuple(k[:, i] for i in range(n - 1, -1, -1)) + (sq,))
    k = k[order]
    nu = np.sqrt(1.0 + sq[order])
    for arr in (k, nu, order):
        arr.flags.writeable = False
    return EigenEnumeration(n, int(M), k, nu, order)


@dataclass(frozen=True, eq=False)
class TorusField:
    n: int
    M: int
    coefficients: np.ndarray

    def __post_init__(self):
        _check_shape(self.n, self.M)
        c = np.array(self.coefficients, dtype=complex)
        if c.shape != (2 * self.M + 1,) * self.n:
            raise ValueError(f"coefficient cube must have shape {(2 * self.M + 1,) * self.n}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, n, M):
        return cls(n, M, np.zeros((2 * M + 1,) * n, dtype=complex))

    @classmethod
    def from_sequence(cls, n, M, kappa):
        """Build from coefficients listed in enumeration order."""
        en = enumerate_modes(n, M)
        kappa = np.asarray(kappa, dtype=complex)
        if kappa.shape != (len(en),):
            raise ValueError(f"need {len(en)} coefficients")
        flat = np.zeros(len(en), dtype=complex)
        flat[en.flat_index] = kappa
        return cls(n, M, flat.reshape((2 * M + 1,) * n))

    def enumeration(self):
        return enumerate_modes(self.n, self.M)

    def sequence(self):
        """Coefficients in enumeration order."""
        return self.coefficients.ravel()[self.enumeration().flat_index]

    def coefficient(self, k):
        idx = tuple(int(x) + self.M for x in k)
        if any(not 0 <= i <= 2 * self.M for i in idx):
            return 0j
        return complex(self.coefficients[idx])

    def __mul__(self, scalar):
        return TorusField(self.n, self.M, self.coefficients * scalar)

    __rmul__ = __mul__

    def __sub__(self, other):
        _same_cube(self, other)
        return TorusField(self.n, self.M, self.coefficients - other.coefficients)


def _same_cube(f, g):
    if (f.n, f.M) != (g.n, g.M):
        raise ValueError(f"fields differ in shape: (n, M) = {(f.n, f.M)} vs {(g.n, g.M)}")


def synthesize_field(n, M, profile, **params):
    """Test fields.

    single_mode(k0, c); radial_decay(phi, delta) with c = j^(-(1+delta)/2) / phi(<k>)
    in enumeration order; random_in_ball(phi, seed, radius, delta=1) with random
    phases, the same decay shape and ||f||_phi = radius * U, U uniform in (0, 1].
    """
    en = enumerate_modes(n, M)
    if profile == "single_mode":
        k0 = params.get("k0", (0,) * n)
        k0 = (k0,) * n if np.ndim(k0) == 0 else tuple(k0)
        if len(k0) != n or any(abs(x) > M for x in k0):
            raise ValueError(f"k0 must be an index in the cube |k_i| <= {M}")
        cube = np.zeros((2 * M + 1,) * n, dtype=complex)
        cube[tuple(x + M for x in k0)] = params.get("c", 1.0)
        return TorusField(n, M, cube)
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    phi = params.get("phi")
    if phi is None:
        raise ValueError(f"profile {profile} needs phi")
    delta = float(params.get("delta", 1.0))
    if not delta > 0:
        raise ValueError("delta must be positive")
    j = np.arange(1, len(en) + 1, dtype=float)
    decay = j ** (-(1.0 + delta) / 2.0) / phi(en.nu)
    if profile == "radial_decay":
        return TorusField.from_sequence(n, M, decay)
    radius = float(params.get("radius", 1.0))
    if not radius > 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(params.get("seed", 0))
    z = rng.standard_normal(len(en)) + 1j * rng.standard_normal(len(en))
    kappa = z * decay
    norm = np.sqrt(np.sum((phi(en.nu) * np.abs(kappa)) ** 2))
    scale = radius * (1.0 - rng.random()) / norm
    return TorusField.from_sequence(n, M, kappa * scale)


def field_norm(f, phi, scheme="eigen"):
    """sqrt(sum phi(<k>)^2 |c_k|^2), or with phi(j^(1/n)) in enumeration order for 'index'."""
    en = f.enumeration()
    if scheme == "eigen":
        w = phi(en.nu)
    elif scheme == "index":
        w = phi(en.index_points())
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return float(np.sqrt(np.sum((w * np.abs(f.sequence())) ** 2)))


def norm_equivalence_constant(n, M, phi):
    """Smallest c with phi(j^(1/n)) / phi(nu_j) in [1/c, c] over the cube."""
    en = enumerate_modes(n, M)
    gap = phi.log_at(np.log(en.index_points())) - phi.log_at(np.log(en.nu))
    return float(np.exp(np.max(np.abs(gap))))


def _permutation(en, order):
    if order is None or isinstance(order, EigenEnumeration):
        return np.arange(len(en))
    perm = np.asarray(order)
    if perm.shape != (len(en),) or not np.array_equal(np.sort(perm), np.arange(len(en))):
        raise ValueError("order must be a permutation of the enumeration positions")
    return perm


def partial_sum(f, k, order=None):
    """Keep the first k modes in enumeration order, or in the order of an explicit permutation."""
    en = f.enumeration()
    if int(k) != k or not 0 <= k <= len(en):
        raise ValueError(f"k must be an integer in [0, {len(en)}]")
    perm = _permutation(en, order)
    keep = en.flat_index[perm[: int(k)]]
    flat = np.zeros(len(en), dtype=complex)
    flat[keep] = f.coefficients.ravel()[keep]
    return TorusField(f.n, f.M, flat.reshape(f.coefficients.shape))


def default_grid(M):
    return 4 * M + 1


def _check_grid(M, grid):
    if grid is None:
        return default_grid(M)
    if grid < 2 * M + 1:
        raise ValueError(f"grid_per_axis must be >= 2M+1 = {2 * M + 1} to avoid aliasing")
    return int(grid)


def _multi_indices(n, q):
    return [a for a in itertools.product(range(q + 1), repeat=n) if sum(a) <= q]


def _derivative_cube(f, alpha):
    axis = np.arange(-f.M, f.M + 1)
    c = f.coefficients
    for i, a in enumerate(alpha):
        if a:
            shape = [1] * f.n
            shape[i] = -1
            c = c * ((1j * axis) ** a).reshape(shape)
    return c


def evaluate(f, grid_per_axis=None, alpha=None, method="fft"):
    """Samples of d^alpha f at x_m = 2 pi m / G, m in {0..G-1}^n."""
    G = _check_grid(f.M, grid_per_axis)
    c = f.coefficients if alpha is None else _derivative_cube(f, alpha)
    if method == "fft":
        buf = np.zeros((G,) * f.n, dtype=complex)
        idx = np.arange(-f.M, f.M + 1) % G
        buf[np.ix_(*([idx] * f.n))] = c
        return np.fft.ifftn(buf) * G ** f.n
    if method == "direct":
        x = 2.0 * np.pi * np.arange(G) / G
        axis = np.arange(-f.M, f.M + 1)
        out = c
        # contract one axis at a time against exp(i k x)
        for _ in range(f.n):
            out = np.tensordot(out, np.exp(1j * np.outer(axis, x)), axes=([0], [0]))
        return out
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SupError:
    value: float
    l1_bound: float
    refinement_factor: float | None
    grid_per_axis: int

    @property
    def upper_bound(self):
        if self.refinement_factor is None:
            return self.l1_bound
        return min(self.l1_bound, self.value * self.refinement_factor)


def sup_error(f, g, q=0, grid_per_axis=None):
    """Grid C^q norm of f - g: sum over |alpha| <= q of the grid max of |d^alpha (f - g)|.

    The grid value is a lower bound. A trigonometric polynomial of degree M
    exceeds its grid max on a grid of G points per axis by at most the factor
    1 / (1 - n pi M / G); that factor is reported when G > n pi M.
    """
    _same_cube(f, g)
    if int(q) != q or q < 0:
        raise ValueError("q must be a nonnegative integer")
    G = _check_grid(f.M, grid_per_axis)
    d = f - g
    total = 0.0
    l1 = 0.0
    for alpha in _multi_indices(f.n, int(q)):
        total += float(np.max(np.abs(evaluate(d, G, alpha))))
        l1 += float(np.sum(np.abs(_derivative_cube(d, alpha))))
    x = f.n * np.pi * f.M / G
    factor = 1.0 / (1.0 - x) if x < 1.0 else None
    return SupError(total, l1, factor, G)


def _phi1_unbounded(phi1):
    return float(phi1.log_at(PHI1_GROWTH_LOG_T) - phi1.log_at(0.0)) > np.log(10.0)


@dataclass(frozen=True)
class RateTable:
    rows: list
    c_star: float
    norm: float
    grid_per_axis: int

    def to_csv(self):
        return to_csv(RATE_COLUMNS, [(r["k"], r["error"], r["bound"], r["ratio"]) for r in self.rows])

    def fit(self, stability=float("nan")):
        return FitRecord("rate constant c*", self.c_star, stability)


def rate_experiment(phi1, phi2, f, q, ks, grid_per_axis=None):
    """Measured errors e_k of the sorted partial sums against the bound
    ||f||_phi * sup_{j>k} 1/phi1(j^(1/n)) * theta_k, theta_k = ||(I-P_k)g|| / ||g||, g = phi(A) f.
    """
    if not _phi1_unbounded(phi1):
        raise PreconditionError(f"phi1 = {phi1} does not grow by a factor 10 up to log t = 1e4")
    verdict = criterion_integral(phi2, q, f.n)
    if verdict.kind != "Converges":
        raise PreconditionError(f"criterion integral for phi2 is {verdict.kind}")
    en = f.enumeration()
    N = len(en)
    phi = phi1 * phi2
    norm = field_norm(f, phi)
    if norm == 0.0:
        raise ValueError("f vanishes")
    g2 = (phi(en.nu) * np.abs(f.sequence())) ** 2
    tail_g = np.sqrt(np.cumsum(g2[::-1])[::-1])
    inv_phi1 = 1.0 / phi1(en.index_points())
    # sup over j >= k+1 (1-based) = suffix max starting at position k (0-based)
    sup_inv = np.maximum.accumulate(inv_phi1[::-1])[::-1]
    G = _check_grid(f.M, grid_per_axis)
    rows = []
    for k in ks:
        k = int(k)
        if not 1 <= k <= N:
            raise ValueError(f"k = {k} outside [1, {N}]")
        err = sup_error(f, partial_sum(f, k), q, G).value
        if k == N:
            theta, sup_k = 0.0, 0.0
        else:
            theta, sup_k = tail_g[k] / tail_g[0], sup_inv[k]
        bound = norm * sup_k * theta
        ratio = err / bound if bound > 0 else 0.0
        rows.append({"k": k, "error": float(err), "bound": float(bound), "ratio": float(ratio),
                     "theta": float(theta)})
    c_star = max(r["ratio"] for r in rows)
    return RateTable(rows, c_star, norm, G)


def _checkpoints(K, count):
    pts = np.unique(np.round(np.geomspace(1, K, count)).astype(int))
    return pts[pts >= 1]


def _order_errors(f_full, modes, coeffs, checkpoints, q, G):
    errors = []
    for k in checkpoints:
        flat = np.zeros(f_full.coefficients.size, dtype=complex)
        flat[modes[:k]] = coeffs[:k]
        part = TorusField(f_full.n, f_full.M, flat.reshape(f_full.coefficients.shape))
        errors.append(sup_error(f_full, part, q, G).value)
    return np.array(errors)


def _k_needed(checkpoints, errors, eps):
    # first checkpoint after which every later error is within eps
    ok = errors <= eps
    tail_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    hits = np.nonzero(tail_ok)[0]
    return int(checkpoints[hits[0]]) if hits.size else None


def unconditional_probe(f, phi, q=0, num_perms=20, seed=0, eps_levels=(1e-1, 1e-2, 1e-3),
                        inner=None, grid_per_axis=None, checkpoints=64):
    """Partial sums over the modes of the inner cube |k_i| <= inner, taken in sorted
    order and in seeded random orders, measured in the grid C^q norm against the full field.

    For each order and each eps the smallest checkpoint k is recorded after which the
    error stays <= eps. Levels below the error of the whole inner cube cannot be reached
    by any order; they are reported as truncation artifacts with that residual.
    """
    verdict = criterion_integral(phi, q, f.n)
    if verdict.kind != "Converges":
        raise PreconditionError(f"criterion integral for {phi} is {verdict.kind}")
    inner = f.M // 2 if inner is None else int(inner)
    if not 0 <= inner <= f.M:
        raise ValueError(f"inner must lie in [0, {f.M}]")
    G = _check_grid(f.M, grid_per_axis)
    en = f.enumeration()
    inside = np.all(np.abs(en.k) <= inner, axis=1)
    modes = en.flat_index[inside]
    coeffs = f.coefficients.ravel()[modes]
    K = modes.size
    cps = _checkpoints(K, checkpoints)
    residual = sup_error(f, _restrict(f, modes), q, G)
    rng = np.random.default_rng(seed)
    orders = [("sorted", np.arange(K))]
    for i in range(num_perms):
        orders.append((f"perm{i}", rng.permutation(K)))
    results = []
    for name, perm in orders:
        errors = _order_errors(f, modes[perm], coeffs[perm], cps, q, G)
        needed = {float(e): _k_needed(cps, errors, e) for e in eps_levels}
        results.append({"order": name, "k_needed": needed, "final_error": float(errors[-1])})
    artifacts = [float(e) for e in eps_levels if residual.value > e]
    reached = all(
        r["k_needed"][float(e)] is not None for r in results for e in eps_levels if float(e) not in artifacts
    )
    return {
        "inner": inner,
        "modes": int(K),
        "grid_per_axis": G,
        "seed": seed,
        "checkpoints": cps.tolist(),
        "orders": results,
        "residual_tail": {"grid": residual.value, "l1_bound": residual.l1_bound},
        "truncation_artifacts": artifacts,
        "all_reached": bool(reached),
    }


def _restrict(f, modes):
    flat = np.zeros(f.coefficients.size, dtype=complex)
    flat[modes] = f.coefficients.ravel()[modes]
    return TorusField(f.n, f.M, flat.reshape(f.coefficients.shape))


def majorant(f, grid_per_axis=None, chunk=256):
    """S*(f, x) = max over k of |k-th sorted partial sum at x|, on the grid."""
    G = _check_grid(f.M, grid_per_axis)
    en = f.enumeration()
    x = 2.0 * np.pi * np.arange(G) / G
    pts = np.stack([a.ravel() for a in np.meshgrid(*([x] * f.n), indexing="ij")], axis=1)
    kappa = f.sequence()
    running = np.zeros(pts.shape[0], dtype=complex)
    best = np.zeros(pts.shape[0])
    for start in range(0, len(en), chunk):
        stop = min(start + chunk, len(en))
        terms = kappa[start:stop, None] * np.exp(1j * (en.k[start:stop] @ pts.T))
        partial = running[None, :] + np.cumsum(terms, axis=0)
        best = np.maximum(best, np.max(np.abs(partial), axis=0))
        running = partial[-1]
    return best.reshape((G,) * f.n)


def mr_sum(kappa):
    """sum_j log^2(j+1) |kappa_j|^2 (j from 1)."""
    j = np.arange(1, len(kappa) + 1, dtype=float)
    return float(np.sum(np.log1p(j) ** 2 * np.abs(kappa) ** 2))


def orlicz_coefficient_sum(kappa, phi, n):
    """sum_{j>=2} log^2(j) phi(j^(1/n))^2 |kappa_j|^2."""
    j = np.arange(1, len(kappa) + 1, dtype=float)
    omega = phi(j ** (1.0 / n)) ** 2
    return float(np.sum((np.log(j) ** 2 * omega * np.abs(kappa) ** 2)[1:]))


def orlicz_weight_partial_sums(phi, n, terms=10 ** 6, checkpoints=None):
    """Partial sums of sum_{j>=3} 1 / (j log j phi(j^(1/n))^2) at the given term counts.

    Default checkpoints are the last three decades ending at ``terms``.
    """
    if checkpoints is None:
        checkpoints = (terms // 100, terms // 10, terms)
    j = np.arange(3, terms + 1, dtype=float)
    vals = 1.0 / (j * np.log(j) * np.exp(2.0 * phi.log_at(np.log(j) / n)))
    cum = np.cumsum(vals)
    return {int(c): float(cum[c - 3]) for c in checkpoints if 3 <= c <= terms}


def plateau(partial_sums, rtol=1e-2):
    """True when the last decade of partial sums grows by less than rtol relative."""
    keys = sorted(partial_sums)
    if len(keys) < 2:
        raise ValueError("need at least two partial sums")
    a, b = partial_sums[keys[-2]], partial_sums[keys[-1]]
    return bool((b - a) <= rtol * b)


def ae_diagnostics(f, phi, grid_per_axis=None, weight_terms=10 ** 6):
    """Majorant, Menshov-Rademacher and Orlicz sums and the fitted constant ||S*|| / ||f||_log*."""
    from .orfun import LogStar

    G = _check_grid(f.M, grid_per_axis)
    smax = majorant(f, G)
    s_l2 = float(np.sqrt(np.mean(smax ** 2)))
    kappa = f.sequence()
    lognorm = field_norm(f, LogStar())
    weights = orlicz_weight_partial_sums(phi, f.n, weight_terms)
    return {
        "majorant_sup": float(smax.max()),
        "majorant_l2": s_l2,
        "mr_sum": mr_sum(kappa),
        "orlicz_coefficient_sum": orlicz_coefficient_sum(kappa, phi, f.n),
        "orlicz_weight_partial_sums": {str(k): v for k, v in weights.items()},
        "orlicz_weight_plateau": plateau(weights),
        "log_star_norm": lognorm,
        "fitted_c": s_l2 / lognorm if lognorm > 0 else float("nan"),
        "grid_per_axis": G,
    }


def fit_stability(values):
    """max / min of a fitted constant across refinements."""
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.min())


def field_to_json(f):
    en = f.enumeration()
    modes = []
    flat = f.coefficients.ravel()
    for k, idx in zip(en.k, en.flat_index):
        c = flat[idx]
        if c != 0:
            modes.append({"k": [int(x) for x in k], "re": float(c.real), "im": float(c.imag)})
    return {"n": f.n, "M": f.M, "modes": modes}


def field_from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    n, M = int(doc["n"]), int(doc["M"])
    _check_shape(n, M)
    cube = np.zeros((2 * M + 1,) * n, dtype=complex)
    for m in doc.get("modes", []):
        k = m["k"]
        if len(k) != n or any(abs(int(x)) > M for x in k):
            raise ValueError(f"mode {k} outside the cube")
        cube[tuple(int(x) + M for x in k)] = complex(m.get("re", 0.0), m.get("im", 0.0))
    return TorusField(n, M, cube)
