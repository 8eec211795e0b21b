import itertools
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from exthilbert.orfun import (
    BoundaryWarning,
    Const,
    DomainError,
    DslError,
    GridSpec,
    HypothesisViolation,
    Interpolated,
    Log1p,
    LogLog2,
    LogLogP,
    LogP,
    LogStar,
    Power,
    Product,
    PsiParameter,
    Quotient,
    Rescale,
    Tabulated,
    TabulatedDataError,
    compose_parameterized,
    dilation_function,
    evaluate,
    interpolation_membership,
    least_concave_majorant,
    make_interpolation_parameter,
    matuszewska_indices,
    parse,
    parse_psi,
    pseudoconcavity_constant,
    render,
    verify_or_membership,
)

GRID64 = np.exp(np.linspace(0.0, np.log(1e6), 64))
exps = st.floats(-3, 3, allow_nan=False).map(lambda x: round(x, 3))


def leaves():
    return st.one_of(
        exps.map(Power),
        exps.map(LogP),
        exps.map(LogLogP),
        st.just(LogStar()),
        st.floats(0.1, 10).map(lambda c: Const(round(c, 3))),
        exps.map(Log1p),
        exps.map(LogLog2),
    )


functions = st.recursive(
    leaves(),
    lambda inner: st.one_of(
        st.tuples(inner, inner).map(lambda p: Product(*p)),
        st.tuples(inner, inner).map(lambda p: Quotient(*p)),
        st.tuples(inner, st.floats(0.25, 4).map(lambda p: round(p, 3))).map(lambda p: Rescale(*p)),
    ),
    max_leaves=4,
)


# --- evaluation ----------------------------------------------------------


def test_atoms_match_closed_forms():
    t = np.array([1.0, 2.0, 10.0, 1e5])
    np.testing.assert_allclose(Power(1.5)(t), t ** 1.5)
    np.testing.assert_allclose(LogP(2)(t), (1 + np.log(t)) ** 2)
    np.testing.assert_allclose(LogLogP(1)(t), 1 + np.log(1 + np.log(t)))
    np.testing.assert_allclose(LogStar()(t), np.maximum(1, np.log(t)))
    np.testing.assert_allclose(Log1p(0.5)(t), np.log(1 + t) ** 0.5)
    np.testing.assert_allclose(LogLog2(2)(t), np.log(np.log(2 + t)) ** 2)
    np.testing.assert_allclose(Const(3)(t), 3.0)


def test_log_form_matches_direct_evaluation():
    f = Product(Power(0.5), Quotient(Log1p(1.5), Rescale(LogLog2(0.7), 2.0)))
    u = np.linspace(0, 30, 50)
    np.testing.assert_allclose(f.log_at(u), np.log(f(np.exp(u))), rtol=1e-12, atol=1e-12)


def test_log_split_keeps_linear_part_exact():
    f = Product(Power(1.5), Rescale(Product(Power(2), Log1p(2)), 3.0))
    a, r = f.log_split(np.array([1e300]))
    assert a == 7.5
    assert np.isfinite(r[0])


def test_domain_is_enforced():
    with pytest.raises(DomainError):
        Power(1)(0.5)
    with pytest.raises(DomainError):
        LogP(1).log_at(-1.0)
    with pytest.raises(DomainError):
        PsiParameter(Power(0.5))(0.0)
    with pytest.raises(ValueError):
        Const(0)
    with pytest.raises(ValueError):
        Rescale(Power(1), 0)


def test_evaluate_dispatches():
    assert evaluate(Power(2), 3.0) == 9.0
    assert evaluate(PsiParameter(Power(0.5)), 0.25) == 1.0


def test_tabulated_interpolates_log_log_and_extends():
    tab = Tabulated.from_values([1.0, 10.0, 100.0], [1.0, 10.0, 1000.0])
    assert tab(10.0) == pytest.approx(10.0)
    assert tab(np.sqrt(10.0)) == pytest.approx(10 ** 0.5)
    # beyond the last knot the last segment continues as t^2
    assert tab(1000.0) == pytest.approx(1e5)
    np.testing.assert_allclose(tab.grid, [1, 10, 100])


@pytest.mark.parametrize(
    "grid,values",
    [([1.0], [1.0]), ([2.0, 3.0], [1.0, 1.0]), ([1.0, 1.0], [1.0, 2.0]), ([1.0, 2.0], [1.0, -1.0])],
)
def test_tabulated_rejects_bad_tables(grid, values):
    with pytest.raises(TabulatedDataError):
        Tabulated.from_values(grid, values)


@given(functions)
def test_combinators_are_positive_on_the_grid(f):
    with np.errstate(all="ignore"):
        lv = f.log_at(np.log(GRID64))
    assert np.all(np.isfinite(lv))


# --- DSL -----------------------------------------------------------------


@given(functions)
def test_render_parse_round_trip(f):
    assert parse(render(f)) == f


def test_parse_examples():
    assert parse("mul(pow:0.5,log1p:1)") == Product(Power(0.5), Log1p(1.0))
    assert parse("rescale(logp:1, 0.5)") == Rescale(LogP(1.0), 0.5)
    psi = parse_psi("psi(pow:0.5,0.25)")
    assert psi == PsiParameter(Power(0.5), 0.25)
    f = parse("interp(pow:0,pow:2,psi(pow:0.5))")
    assert isinstance(f, Interpolated)
    assert f(4.0) == pytest.approx(4.0)
    assert render(Tabulated((0.0, 1.0), (0.0, 2.0))) == "tab(0.0:0.0,1.0:2.0)"


@pytest.mark.parametrize("text,col", [("pow:", 5), ("mul(pow:1)", 10), ("foo:1", 1), ("pow:1x", 6)])
def test_parse_errors_report_position(text, col):
    with pytest.raises(DslError) as info:
        parse(text)
    assert info.value.pos + 1 == col


# --- OR certificates and indices -----------------------------------------


def test_or_membership_constant_for_power_is_exact():
    assert verify_or_membership(Power(2), 2.0) == pytest.approx(4.0)
    assert verify_or_membership(Const(5), 3.0) == 1.0


@given(functions)
def test_products_stay_or(f):
    # closure: product of OR functions has a finite certificate
    g = Product(f, LogP(1.0))
    with np.errstate(all="ignore"):
        c = verify_or_membership(g, 2.0)
    assert np.isfinite(c) and c >= 1.0


@pytest.mark.parametrize("s", [-2.0, 0.0, 0.5, 3.0])
def test_power_indices_are_exact(s):
    est = matuszewska_indices(Power(s))
    assert est.sigma0 == pytest.approx(s, abs=1e-9)
    assert est.sigma1 == pytest.approx(s, abs=1e-9)
    assert not est.inconclusive


def test_log_factor_indices_bracket_the_power():
    est = matuszewska_indices(Product(Power(1), LogP(3)))
    assert abs(est.sigma0 - 1) <= 0.05 and abs(est.sigma1 - 1) <= 0.05
    assert est.sigma0 <= est.sigma1


def test_indices_reject_small_grid():
    with pytest.raises(ValueError):
        matuszewska_indices(Power(1), GridSpec(t_max=100.0))


def test_membership_clear_cases():
    assert interpolation_membership(Power(1), 0, 2)
    assert not interpolation_membership(Power(1), 2, 3)
    assert not interpolation_membership(Power(3), 0, 2)


def test_membership_at_index_warns():
    with pytest.warns(BoundaryWarning):
        assert interpolation_membership(LogP(1), 0.0, 0.1)


# --- interpolation parameter and composition -----------------------------


def test_psi_for_power_is_power():
    psi = make_interpolation_parameter(Power(1.0), 0.0, 2.0)
    tau = np.array([1.0, 4.0, 100.0])
    np.testing.assert_allclose(psi(tau), tau ** 0.5)
    assert psi(0.5) == 1.0


def test_psi_rejects_bad_exponents():
    with pytest.raises(ValueError):
        make_interpolation_parameter(Power(1), 2, 1)
    with pytest.raises(HypothesisViolation):
        make_interpolation_parameter(Power(5), 0, 1)


@pytest.mark.parametrize("s0,s1,theta", [(0, 2, 0.5), (-1, 3, 0.25), (1, 2, 0.9)])
def test_compose_powers(s0, s1, theta):
    phi = compose_parameterized(Power(s0), Power(s1), PsiParameter(Power(theta)))
    np.testing.assert_allclose(phi(GRID64), GRID64 ** ((1 - theta) * s0 + theta * s1), rtol=1e-12)


def test_compose_with_trivial_psi_is_f0():
    phi = compose_parameterized(LogP(2), Power(1), PsiParameter(Const(1)))
    np.testing.assert_allclose(phi(GRID64), LogP(2)(GRID64), rtol=1e-14)


def test_compose_rejects_unbounded_ratio():
    with pytest.raises(HypothesisViolation):
        compose_parameterized(Power(3), Power(1), PsiParameter(Power(0.5)))


@pytest.mark.parametrize(
    "f,s0,s1",
    [(Product(Power(1), LogP(1)), 0, 2), (LogStar(), -1, 1), (Product(Power(0.5), Log1p(1)), 0, 1)],
)
def test_round_trip(f, s0, s1):
    psi = make_interpolation_parameter(f, s0, s1)
    phi = compose_parameterized(Power(s0), Power(s1), psi)
    np.testing.assert_allclose(phi(GRID64), f(GRID64), rtol=1e-12)


# --- pseudoconcavity, dilation, majorant ---------------------------------


def _brute_pc(psi, lo, hi, n):
    t = np.exp(np.linspace(np.log(lo), np.log(hi), n))
    p = psi(t)
    return max(p[i] / (p[j] * max(1.0, t[i] / t[j])) for i in range(n) for j in range(n))


def test_pseudoconcavity_power_is_one():
    assert pseudoconcavity_constant(PsiParameter(Power(0.3)), 1e-3) == pytest.approx(1.0, abs=1e-10)


def test_pseudoconcavity_log_case_matches_brute_force():
    psi = make_interpolation_parameter(LogP(1), 0, 1)
    # frozen from the O(n^2) pair search on the same 256-point grid
    assert pseudoconcavity_constant(psi, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert _brute_pc(psi, 1.0, 1e6, 256) == pytest.approx(1.0, abs=1e-12)


def test_pseudoconcavity_detects_a_bump():
    # psi rises like tau^2 on [1, e]: ratio psi(t)/(psi(tau) t/tau) exceeds one
    psi = PsiParameter(Power(2.0))
    c = pseudoconcavity_constant(psi, 1.0, t_max=10.0, n=64)
    assert c == pytest.approx(_brute_pc(psi, 1.0, 10.0, 64), rel=1e-12)
    assert c == pytest.approx(10.0, rel=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.01, 1.0))
def test_pseudoconcavity_matches_brute_force(theta, lo):
    psi = PsiParameter(Product(Power(theta), LogP(1.0)))
    fast = pseudoconcavity_constant(psi, lo, t_max=1e3, n=40)
    assert fast == pytest.approx(_brute_pc(psi, lo, 1e3, 40), rel=1e-12)
    assert fast >= 1.0


def test_dilation_power_and_identity():
    psi = PsiParameter(Power(0.4))
    assert dilation_function(psi, 10.0) == pytest.approx(10 ** 0.4, rel=1e-12)
    psi = make_interpolation_parameter(LogP(1), 0, 1)
    assert dilation_function(psi, 1.0) == 1.0


def test_dilation_log_case_matches_brute_force():
    psi = make_interpolation_parameter(LogP(1), 0, 1)
    t = np.exp(np.linspace(np.log(1e-6), np.log(1e6), 1025))
    brute = max(psi(10 * x) / psi(x) for x in t)
    value = dilation_function(psi, 10.0)
    assert value == pytest.approx(brute, rel=1e-14)
    # frozen: attained near tau = 1, where psi climbs from 1 to 1 + log 10
    assert value == pytest.approx(1 + np.log(10.0), rel=1e-12)


@given(st.floats(1e-3, 1e3))
def test_dilation_bounded_by_pseudoconcavity(lam):
    psi = make_interpolation_parameter(Product(Power(1), LogP(1)), 0, 2)
    psi = psi.with_linear_below(0.5)
    c = pseudoconcavity_constant(psi, 0.5 * min(1, 1 / lam) / 10, t_max=1e7)
    assert dilation_function(psi, lam, lo=0.5, hi=1e6) <= c * max(1.0, lam) * (1 + 1e-12)


def test_majorant_of_concave_samples_is_identity():
    tau = np.linspace(0.1, 5, 30)
    hull = least_concave_majorant(tau, np.sqrt(tau))
    np.testing.assert_allclose(hull(tau), np.sqrt(tau), rtol=1e-14)


def test_majorant_of_convex_samples_is_chord():
    tau = np.linspace(0, 1, 11)
    hull = least_concave_majorant(tau, tau ** 2)
    np.testing.assert_allclose(hull(tau), tau, atol=1e-15)
    assert hull.x.tolist() == [0.0, 1.0]


def test_majorant_rejects_bad_samples():
    with pytest.raises(ValueError):
        least_concave_majorant([1.0], [1.0])
    with pytest.raises(ValueError):
        least_concave_majorant([1.0, 1.0], [1.0, 2.0])


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=40, unique=True), st.data())
def test_majorant_majorizes_and_is_concave(tau, data):
    tau = np.sort(np.array(tau))
    assume(np.all(np.diff(tau) > 1e-6))
    values = np.array(data.draw(st.lists(st.floats(0.01, 100), min_size=len(tau), max_size=len(tau))))
    hull = least_concave_majorant(tau, values)
    assert np.all(hull(tau) >= values - 1e-9 * np.abs(values).max())
    slopes = np.diff(hull.y) / np.diff(hull.x)
    assert np.all(np.diff(slopes) <= 1e-9 * (1 + np.abs(slopes).max()))


def test_majorant_sandwich_for_log_parameter():
    psi = make_interpolation_parameter(LogP(1), 0, 1)
    tau = np.exp(np.linspace(0, np.log(1e6), 200))
    chi = psi(np.sqrt(tau)) ** 2
    c = pseudoconcavity_constant(psi, 1.0)
    hull = least_concave_majorant(tau, chi)
    assert np.all(hull(tau) / (2 * c ** 2) <= chi * (1 + 1e-12))
    assert np.all(chi <= hull(tau) * (1 + 1e-12))


def test_linear_branch_keeps_values_above_nu():
    psi = make_interpolation_parameter(LogP(1), 0, 1)
    lin = psi.with_linear_below(2.0)
    tau = np.array([2.0, 5.0, 50.0])
    np.testing.assert_allclose(lin(tau), psi(tau))
    assert lin(1.0) == pytest.approx(psi(2.0) / 2)
    with pytest.raises(ValueError):
        psi.with_linear_below(0.0)


def test_boundary_warning_is_a_user_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(BoundaryWarning):
            interpolation_membership(LogP(1), 0.0, 0.1)


def test_all_atoms_render_distinctly():
    atoms = [Power(1), LogP(1), LogLogP(1), LogStar(), Const(1), Log1p(1), LogLog2(1)]
    names = [render(a) for a in atoms]
    assert len(set(names)) == len(names)
    for a, b in itertools.combinations(atoms, 2):
        assert parse(render(a)) != b
