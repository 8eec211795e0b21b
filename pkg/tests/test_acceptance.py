"""Acceptance suite: one test per criterion, each timed against its runtime budget.

Every criterion records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and also to stdout when run with -s.
"""
import time
from contextlib import contextmanager

import numpy as np
import pytest

from exthilbert.analysis import criterion_integral, orlicz_integral, rate_factorization
from exthilbert.orfun import (
    Const,
    Log1p,
    LogLog2,
    LogP,
    LogStar,
    Power,
    Product,
    PsiParameter,
    Quotient,
    Rescale,
    compose_parameterized,
    make_interpolation_parameter,
    matuszewska_indices,
)
from exthilbert.spectral import (
    CoeffVector,
    DiagonalMap,
    SpectralOperator,
    interpolation_norm_identity,
    operator_norm_interpolation,
    power_scale_inequality,
    self_tuned_inequalities,
    spectral_kappa,
    tau_inequality_check,
)
from exthilbert.torus import (
    ae_diagnostics,
    enumerate_modes,
    field_norm,
    fit_stability,
    orlicz_coefficient_sum,
    orlicz_weight_partial_sums,
    plateau,
    rate_experiment,
    synthesize_field,
    unconditional_probe,
)

RESULTS = []


@contextmanager
def criterion(label, budget):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        _record(label, False, elapsed, budget, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    elapsed = time.perf_counter() - t0
    _record(label, elapsed < budget, elapsed, budget, "" if elapsed < budget else "over budget")
    assert elapsed < budget, f"{label}: {elapsed:.2f} s exceeds {budget} s"


def _record(label, ok, elapsed, budget, note):
    line = f"{'PASS' if ok else 'FAIL'} {label} ({elapsed:.2f} s / {budget} s)" + (f" {note}" if note else "")
    RESULTS.append(line)
    print(line)


def rand_vec(rng, size):
    decay = np.exp(-rng.uniform(0, 10) * np.arange(size) / size)
    return CoeffVector((rng.standard_normal(size) + 1j * rng.standard_normal(size)) * decay)


def random_pair(rng):
    """Random (phi0, phi1, psi) with log-refined power endpoints and a psi built from a target."""
    s0 = rng.uniform(-1.0, 1.0)
    s1 = s0 + rng.uniform(0.5, 3.0)
    a0, a1 = rng.uniform(-0.5, 0.5, 2)
    phi0 = Product(Power(s0), LogP(a0))
    phi1 = Product(Power(s1), LogP(a1))
    target = Product(Power(rng.uniform(s0 + 0.1, s1 - 0.1)), LogP(rng.uniform(-1.0, 1.0)))
    return phi0, phi1, make_interpolation_parameter(target, s0, s1)


def test_1_interpolation_norm_identity():
    with criterion("1 interpolation norm identity", 5):
        rng = np.random.default_rng(101)
        spectra = [SpectralOperator.log_uniform(10 ** 4, 1e4, seed=s) for s in range(3)]
        worst = 0.0
        for i in range(100):
            phi0, phi1, psi = random_pair(rng)
            A = spectra[i % 3]
            lhs, rhs = interpolation_norm_identity(phi0, phi1, psi, A, rand_vec(rng, len(A)))
            worst = max(worst, abs(lhs - rhs) / rhs)
        assert worst <= 1e-12, worst


GRID64 = np.exp(np.linspace(0.0, np.log(1e6), 64))


def combinator_phis():
    base = [
        (Power(1), 0, 2), (Product(Power(1), LogP(1)), 0, 2), (Product(Power(0.5), Log1p(1)), 0, 1),
        (LogStar(), -1, 1), (LogP(-2), -1, 1), (Product(Power(-0.5), LogP(0.5)), -1, 0),
        (Product(Product(Power(0.5), Log1p(0.5)), LogLog2(1)), 0, 1), (Rescale(Power(1.5), 2.0), 2, 4),
        (Quotient(Power(2), LogP(1)), 1, 3), (Product(Power(1), Const(3)), 0, 2),
    ]
    more = []
    for f, s0, s1 in base:
        more.append((Product(f, Power(0.25)), s0 + 0.25 - 0.1, s1 + 0.25 + 0.1))
    return base + more


def test_2_round_trip():
    cases = combinator_phis()
    assert len(cases) == 20
    with criterion("2 parameter round trip", 1):
        worst = 0.0
        for f, s0, s1 in cases:
            psi = make_interpolation_parameter(f, s0, s1)
            phi = compose_parameterized(Power(s0), Power(s1), psi)
            worst = max(worst, float(np.max(np.abs(phi(GRID64) / f(GRID64) - 1))))
        assert worst <= 1e-12, worst


def test_3_inequality_suite():
    with criterion("3 inequality suite", 30):
        rng = np.random.default_rng(303)
        spectra = [SpectralOperator.log_uniform(200, 1e4, seed=s) for s in (1, 2, 3)]
        psis = [(Power(0), Power(2), make_interpolation_parameter(Product(Power(1), LogP(1)), 0, 2)),
                (Power(0), Power(2), PsiParameter(Power(0.5))),
                (Power(0.5), Power(1.5), make_interpolation_parameter(Product(Power(1), LogP(-1)), 0.5, 1.5)),
                (Power(-1), Product(Power(1), LogP(1)), make_interpolation_parameter(LogStar(), -1, 1))]
        worst = {}
        concave_samples = 0

        def note(rec):
            worst[rec.inequality] = min(worst.get(rec.inequality, np.inf), rec.slack)

        for i in range(1000):
            A = spectra[i % 3]
            phi0, phi1, psi = psis[i % len(psis)]
            u = rand_vec(rng, len(A))
            taus = spectral_kappa(phi0, phi1, A) * np.geomspace(1.0, 1e6, 6)
            for rec in tau_inequality_check(phi0, phi1, psi, A, u, taus):
                note(rec)
            tuned = self_tuned_inequalities(phi0, phi1, psi, A, u)
            note(tuned.slack_a)
            if tuned.concave:
                concave_samples += 1
                note(tuned.slack_b)
            s0 = rng.uniform(-1, 1)
            note(power_scale_inequality(A, u, s0, s0 + rng.uniform(0.1, 3), rng.uniform(0, 1)))
            lam = A.eigenvalues
            scale = phi0(lam) / phi0(lam) ** 0.5 * np.exp(rng.uniform(-3, 3, len(A)))
            T = DiagonalMap(rng.standard_normal(len(A)) * scale)
            note(operator_norm_interpolation(T, phi0, phi1, Power(0.5), Power(1.5), psi, A).slack)
        assert concave_samples > 0
        assert set(worst) == {"tau-bound", "self-tuned", "self-tuned-concave", "power-scale", "operator-norm"}
        assert min(worst.values()) >= -1e-10, worst


@pytest.mark.parametrize("q,n", [(0, 1), (1, 2), (0, 3)])
def test_4_criterion_boundary(q, n):
    with criterion(f"4 criterion boundary (q={q}, n={n})", 5):
        s = q + n / 2
        assert criterion_integral(Power(s + 0.1), q, n).kind == "Converges"
        assert criterion_integral(Power(s), q, n).kind == "Diverges"
        v = criterion_integral(Power(s + 0.5), q, n)
        assert v.value == pytest.approx(1.0 / (2 * (s + 0.5) - 2 * q - n), rel=1e-4)


def test_5_log_refined_criteria():
    with criterion("5 log-refined criteria", 10):
        for rho in (0.25, 1.0):
            assert criterion_integral(Product(Power(0.5), Log1p(rho + 0.5)), 0, 1).kind == "Converges"
        refined2 = Product(Product(Power(0.5), Log1p(0.5)), LogLog2(1.0))
        assert criterion_integral(refined2, 0, 1).kind == "Converges"
        assert orlicz_integral(Const(1)).kind == "Diverges"
        # the boundary cases may not converge; they must never be reported as convergent
        assert criterion_integral(Product(Power(0.5), Log1p(0.5)), 0, 1).kind != "Converges"


def _rate_cstar(M):
    fac = rate_factorization(Power(1), 0, 1, 0.25)
    assert fac.verified
    f = synthesize_field(1, M, "radial_decay", phi=Power(1), delta=0.5)
    ks = [16 * 2 ** i for i in range(8)]
    return rate_experiment(fac.phi1, fac.phi2, f, 0, ks)


def test_6_rate_bound():
    with criterion("6 rate bound", 60):
        a, b = _rate_cstar(2048), _rate_cstar(4096)
        assert [r["k"] for r in a.rows] == [16, 32, 64, 128, 256, 512, 1024, 2048]
        assert np.isfinite(a.c_star) and np.isfinite(b.c_star)
        assert all(r["error"] <= a.c_star * r["bound"] * (1 + 1e-12) for r in a.rows)
        assert 0.5 < b.c_star / a.c_star < 2.0, (a.c_star, b.c_star)


def test_7_unconditional_convergence():
    with criterion("7 unconditional convergence", 60):
        phi = Product(Power(0.5), Log1p(1.0))
        f = synthesize_field(1, 1024, "radial_decay", phi=phi, delta=2.0)
        rep = unconditional_probe(f, phi, 0, num_perms=20, seed=7, eps_levels=(1e-3,))
        assert len(rep["orders"]) == 21
        assert rep["all_reached"] and not rep["truncation_artifacts"], rep["residual_tail"]


def _fitted_c(M, seeds):
    fitted = []
    for seed in seeds:
        f = synthesize_field(1, M, "random_in_ball", phi=LogStar(), seed=seed, radius=1.0)
        assert field_norm(f, LogStar()) <= 1.0 + 1e-12
        fitted.append(ae_diagnostics(f, LogStar(), weight_terms=10 ** 4)["fitted_c"])
    return max(fitted)


def test_8a_majorant_constant_and_coefficient_sum():
    with criterion("8a majorant constant and coefficient Orlicz sum", 120):
        seeds = range(20)
        cs = [_fitted_c(M, seeds) for M in (256, 512, 1024)]
        assert all(np.isfinite(cs)), cs
        assert fit_stability(cs) < 2.0, cs
        weight = Product(LogStar(), LogStar())
        sums = []
        for M in (256, 512, 1024, 2048):
            f = synthesize_field(1, M, "radial_decay", phi=weight, delta=1.0)
            sums.append(orlicz_coefficient_sum(f.sequence(), LogStar(), 1))
        assert np.all(np.diff(sums) >= 0) and sums[-1] - sums[-2] < 1e-2 * sums[-1], sums


@pytest.mark.xfail(strict=True, reason="sum 1/(j log^3 j) converges, so its partial sums plateau")
def test_8b_orlicz_weight_sum_grows():
    with criterion("8b weight Orlicz sum grows without plateau", 120):
        sums = orlicz_weight_partial_sums(LogStar(), 1, 10 ** 6)
        assert not plateau(sums), sums


def test_9_matuszewska_indices():
    with criterion("9 Matuszewska indices", 5):
        cases = [(Power(s), s, s) for s in (-2, 0, 0.5, 3)]
        cases += [(Product(Power(1), LogP(3)), 1, 1), (LogStar(), 0, 0)]
        for f, lo, hi in cases:
            est = matuszewska_indices(f)
            assert abs(est.sigma0 - lo) <= 0.05 and abs(est.sigma1 - hi) <= 0.05, (f, est)


# nu_j / j^(1/n) brackets from the brute-force enumeration oracle in test_torus.py
WEYL_BRACKETS = {1: (0.447213595499958, 0.7071067811865476), 2: (0.5345224838248488, 1.0),
                 3: (0.6114871668848691, 1.122462048309373)}


def test_10_weyl_enumeration():
    with criterion("10 Weyl enumeration", 1):
        for n, (lo, hi) in WEYL_BRACKETS.items():
            for M in (1, 2, 4, 8, 16, 32):
                r_lo, r_hi = enumerate_modes(n, M).weyl_bracket()
                assert lo - 1e-15 <= r_lo and r_hi <= hi + 1e-15, (n, M, r_lo, r_hi)
