"""Diagonal spectral models: graded norms, the generating multiplier and interpolational inequalities.

An operator is represented by its eigenvalues and a vector by its
coefficients in the eigenbasis, so every function of the operator acts
entrywise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .orfun import (
    HypothesisViolation,
    Interpolated,
    Power,
    PsiParameter,
    compose_parameterized,
    dilation_function,
    pseudoconcavity_constant,
)
from .report import SlackRecord, digest

DEFAULT_SEED = 0xC0FFEE
SLACK_TOL = 1e-10
CONCAVITY_POINTS = 128
CONCAVITY_TOL = 1e-9


def _frozen(arr):
    arr = np.array(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("need a nonempty 1-d eigenvalue sequence")
        if not np.all(np.isfinite(lam)) or lam[0] < 1.0:
            raise ValueError("eigenvalues must be finite and >= 1")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", _frozen(lam))

    def __len__(self):
        return self.eigenvalues.size

    @classmethod
    def log_uniform(cls, size, lam_max, seed=DEFAULT_SEED):
        rng = np.random.default_rng(seed)
        return cls(np.sort(np.exp(rng.uniform(0.0, np.log(lam_max), size))))


@dataclass(frozen=True, eq=False)
class CoeffVector:
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be a finite 1-d sequence")
        object.__setattr__(self, "coefficients", _frozen(c))

    def __len__(self):
        return self.coefficients.size

    @classmethod
    def basis(cls, size, j):
        e = np.zeros(size, dtype=complex)
        e[j] = 1.0
        return cls(e)

    @classmethod
    def random(cls, size, rng):
        return cls(rng.standard_normal(size) + 1j * rng.standard_normal(size))


@dataclass(frozen=True, eq=False)
class DiagonalMap:
    multipliers: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.multipliers, dtype=complex)
        if m.ndim != 1 or not np.all(np.isfinite(m)):
            raise ValueError("multipliers must be a finite 1-d sequence")
        object.__setattr__(self, "multipliers", _frozen(m))

    def __len__(self):
        return self.multipliers.size


def _check(A, x):
    if len(A) != len(x):
        raise ValueError(f"length mismatch: operator has {len(A)} eigenvalues, vector has {len(x)}")


def apply_spectral_function(A, f, u):
    _check(A, u)
    return CoeffVector(f(A.eigenvalues) * u.coefficients)


def _weighted_norm(weights, u):
    return float(np.sqrt(np.sum((weights * np.abs(u.coefficients)) ** 2)))


def index_points(size, n):
    return np.arange(1, size + 1, dtype=float) ** (1.0 / n)


def graded_norm(A, phi, u, scheme="eigen", n=None):
    """sqrt(sum phi(lambda_j)^2 |u_j|^2); scheme 'index' weights by phi(j^(1/n))."""
    _check(A, u)
    if scheme == "eigen":
        points = A.eigenvalues
    elif scheme == "index":
        if n is None:
            raise ValueError("scheme 'index' needs the dimension n")
        points = index_points(len(A), n)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return _weighted_norm(phi(points), u)


def index_scheme_constant(A, phi, n):
    """Smallest c with phi(j^(1/n)) / phi(lambda_j) in [1/c, c] for all j."""
    gap = phi.log_at(np.log(index_points(len(A), n))) - phi.log_at(np.log(A.eigenvalues))
    return float(np.exp(np.max(np.abs(gap))))


def generating_multiplier(phi0, phi1, A, bound=1e6):
    """Multipliers phi1(lambda_j) / phi0(lambda_j) of the generating operator."""
    m = phi1(A.eigenvalues) / phi0(A.eigenvalues)
    if not np.max(1.0 / m) <= bound:
        raise HypothesisViolation(f"sup phi0/phi1 on the spectrum exceeds {bound:.3g}")
    return DiagonalMap(m)


def spectral_kappa(phi0, phi1, A):
    """inf of phi1/phi0 over the spectrum."""
    return float(np.min(phi1(A.eigenvalues) / phi0(A.eigenvalues)))


def interpolation_norm_identity(phi0, phi1, psi, A, u):
    """(norm in the interpolation space, norm in H^phi) on the diagonal model."""
    _check(A, u)
    lam = A.eigenvalues
    m = generating_multiplier(phi0, phi1, A).multipliers.real
    lhs = _weighted_norm(psi(m) * phi0(lam), u)
    phi = compose_parameterized(phi0, phi1, psi, points=lam)
    rhs = graded_norm(A, phi, u)
    return lhs, rhs


@dataclass(frozen=True)
class _Model:
    lam: np.ndarray
    m: np.ndarray
    kappa: float
    n0: float
    n1: float
    n: float


def _model(phi0, phi1, psi, A, u):
    _check(A, u)
    lam = A.eigenvalues
    m = generating_multiplier(phi0, phi1, A).multipliers.real
    n0 = graded_norm(A, phi0, u)
    n1 = graded_norm(A, phi1, u)
    n = graded_norm(A, Interpolated(phi0, phi1, psi), u)
    return _Model(lam, m, float(m.min()), n0, n1, n)


def _pc_constant(psi, lo, points):
    points = np.asarray(points, dtype=float)
    return pseudoconcavity_constant(psi, lo, t_max=float(points.max()) * np.e, extra=points)


def _slack(inequality, lhs, rhs, parts):
    scale = lhs if lhs > 0 else 1.0
    return SlackRecord(inequality, float((rhs - lhs) / scale), digest(*parts), SLACK_TOL, float(lhs), float(rhs))


def tau_inequality_check(phi0, phi1, psi, A, u, tau, c=None):
    """Slack of ||u||_phi <= c psi(tau) sqrt(||u||_0^2 + tau^-2 ||u||_1^2) for one tau >= kappa."""
    md = _model(phi0, phi1, psi, A, u)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < md.kappa):
        raise ValueError(f"tau must be >= kappa = {md.kappa:.17g}")
    if c is None:
        c = _pc_constant(psi, md.kappa, np.concatenate([md.m, taus]))
    records = []
    for t in taus:
        rhs = c * psi(t) * np.sqrt(md.n0 ** 2 + md.n1 ** 2 / t ** 2)
        records.append(_slack("tau-bound", md.n, rhs, (u.coefficients, A.eigenvalues, str(psi), t)))
    return records[0] if np.ndim(tau) == 0 else records


def chi_is_concave(psi, lo, hi, points=CONCAVITY_POINTS, tol=CONCAVITY_TOL):
    """Grid certificate that tau -> psi(sqrt(tau))^2 is concave on [lo, hi]."""
    hi = max(hi, lo * np.e)
    tau = np.exp(np.linspace(np.log(lo), np.log(hi), points))
    chi = np.exp(2.0 * psi.log_at(0.5 * np.log(tau)))
    slopes = np.diff(chi) / np.diff(tau)
    scale = np.max(np.abs(slopes))
    return bool(np.all(np.diff(slopes) <= tol * max(scale, 1e-300)))


def _power_case(phi0, phi1, psi):
    """(s0, s1, theta) when phi0, phi1 are powers and psi is tau^theta on [1, inf), else None."""
    if not (isinstance(phi0, Power) and isinstance(phi1, Power) and phi0.s < phi1.s):
        return None
    v = np.linspace(0.0, 40.0, 65)
    lv = psi.log_at(v)
    theta = float(lv[-1] / v[-1])
    if not 0.0 <= theta <= 1.0 or np.max(np.abs(lv - theta * v)) > 1e-12 * (1.0 + v[-1]):
        return None
    return phi0.s, phi1.s, theta


def power_scale_inequality(A, u, s0, s1, theta):
    """Slack of ||u||_s <= ||u||_s0^(1-theta) ||u||_s1^theta, s = (1-theta)s0 + theta s1."""
    s = (1.0 - theta) * s0 + theta * s1
    lhs = graded_norm(A, Power(s), u)
    rhs = graded_norm(A, Power(s0), u) ** (1.0 - theta) * graded_norm(A, Power(s1), u) ** theta
    return _slack("power-scale", lhs, rhs, (u.coefficients, A.eigenvalues, s0, s1, theta))


@dataclass(frozen=True)
class SelfTunedRecord:
    tau: float
    constant: float
    concave: bool
    slack_a: SlackRecord
    slack_b: Optional[SlackRecord]
    slack_c: Optional[SlackRecord]

    @property
    def records(self):
        return [r for r in (self.slack_a, self.slack_b, self.slack_c) if r is not None]


def self_tuned_inequalities(phi0, phi1, psi, A, u):
    """Inequalities with tau = ||u||_1 / ||u||_0: the c*sqrt(2) form, the concave form, the power form."""
    if not np.any(u.coefficients):
        raise ValueError("u must be nonzero")
    md = _model(phi0, phi1, psi, A, u)
    tau = md.n1 / md.n0
    tau = max(tau, md.kappa)
    c = _pc_constant(psi, md.kappa, np.append(md.m, tau))
    parts = (u.coefficients, A.eigenvalues, str(phi0), str(phi1), str(psi))
    slack_a = _slack("self-tuned", md.n, c * np.sqrt(2.0) * md.n0 * psi(tau), parts)
    concave = chi_is_concave(psi, md.kappa ** 2, max(md.m.max(), tau) ** 2)
    slack_b = _slack("self-tuned-concave", md.n, md.n0 * psi(tau), parts) if concave else None
    power = _power_case(phi0, phi1, psi)
    slack_c = power_scale_inequality(A, u, *power) if power else None
    return SelfTunedRecord(float(tau), float(c), concave, slack_a, slack_b, slack_c)


@dataclass(frozen=True)
class OperatorNormRecord:
    norm0: float
    norm1: float
    norm: float
    nu: float
    constant: float
    dilation: float
    argmax0: int
    slack: SlackRecord


def operator_norm_interpolation(T, phi0, phi1, eta0, eta1, psi, A):
    """Check ||T|| <= c^2 sqrt(8) ||T||_0 dil(||T||_1 / ||T||_0) for a diagonal T."""
    _check(A, T)
    lam = A.eigenvalues
    mag = np.abs(T.multipliers)
    r0 = mag * eta0(lam) / phi0(lam)
    r1 = mag * eta1(lam) / phi1(lam)
    norm0, norm1 = float(r0.max()), float(r1.max())
    if norm0 == 0.0:
        raise ValueError("||T||_0 vanishes")
    mphi = phi1(lam) / phi0(lam)
    meta = eta1(lam) / eta0(lam)
    nu = float(min(mphi.min(), meta.min()))
    psi_nu = psi.with_linear_below(nu)
    phi = Interpolated(phi0, phi1, psi_nu)
    eta = Interpolated(eta0, eta1, psi_nu)
    norm = float(np.max(mag * eta(lam) / phi(lam)))
    ratio = norm1 / norm0
    points = np.concatenate([mphi, meta, mphi * ratio, meta * ratio])
    c = _pc_constant(psi_nu, nu, points)
    lo = nu * min(1.0, 1.0 / ratio) / 10.0
    hi = float(points.max()) * max(1.0, 1.0 / ratio) * 10.0
    dil = dilation_function(psi_nu, ratio, lo=lo, hi=hi, n=2049,
                            extra=np.concatenate([mphi, meta, mphi / ratio, meta / ratio]))
    bound = c ** 2 * np.sqrt(8.0) * norm0 * dil
    rec = _slack("operator-norm", norm, bound, (T.multipliers, lam, str(phi0), str(phi1), str(eta0),
                                        str(eta1), str(psi)))
    return OperatorNormRecord(norm0, norm1, norm, nu, float(c), float(dil), int(np.argmax(r0)), rec)


def model_to_json(A, u=None):
    doc = {"lambda": A.eigenvalues.tolist()}
    if u is not None:
        _check(A, u)
        doc["coeff_re"] = u.coefficients.real.tolist()
        doc["coeff_im"] = u.coefficients.imag.tolist()
    return doc


def model_from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    A = SpectralOperator(doc["lambda"])
    u = None
    if "coeff_re" in doc:
        im = doc.get("coeff_im", [0.0] * len(doc["coeff_re"]))
        u = CoeffVector(np.asarray(doc["coeff_re"], float) + 1j * np.asarray(im, float))
        _check(A, u)
    return A, u
