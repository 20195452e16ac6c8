import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wvlab.growth import (GrowthProfile, RadiusGrid, central_index, characteristic,
                          counting_from_valence, derived_seed, diverging_order, growth_profile,
                          hyper_order_estimate, is_diverging, max_term, norms_profile, order_estimate, order_slopes,
                          proximity, sphere_log_integral, valence_jensen)
from wvlab.sampling import max_modulus_sphere
from wvlab.series import (PowerSeries, Quotient, UntrustedRadiusError, exp_series, is_trusted,
                          make_exp_of_linear, make_polynomial)

Z1 = make_polynomial(2, [((1, 0), 1)])
EXP2 = make_exp_of_linear([1, 1], 120)


# -- maximum term and central index ---------------------------------------


def test_max_term_of_polynomial_for_large_r():
    p = make_polynomial(2, [((0, 0), 7), ((1, 0), -3), ((3, 0), 2), ((1, 2), 1j)])
    for r in (1e3, 1e5):
        assert max_term(p.norms, r) == pytest.approx(math.log(3.0) + 3 * math.log(r), rel=1e-14)
        assert central_index(p.norms, r) == 3


def test_max_term_and_central_index_at_one():
    assert max_term(EXP2.norms, 1.0) == pytest.approx(math.log(2.0), rel=1e-14)
    assert central_index(EXP2.norms, 1.0) == 2


def test_constant_max_term():
    c = PowerSeries.constant(2, 3 - 4j)
    for r in (0.1, 1.0, 50.0):
        assert max_term(c.norms, r) == pytest.approx(math.log(5))
        assert central_index(c.norms, r) == 0


def test_zero_series_max_term_and_central_index():
    z = PowerSeries.zero(2)
    assert max_term(z.norms, 2.0) == -math.inf
    with pytest.raises(ValueError):
        central_index(z.norms, 2.0)


@given(st.floats(1.3, 25.0))
def test_central_index_of_exp_sum(r):
    nu = central_index(EXP2.norms, r)
    assert nu in {math.floor(2 * r) - 1, math.floor(2 * r), math.floor(2 * r) + 1}


def test_max_term_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        max_term(EXP2.norms, 0.0)


# -- proximity and sphere integrals ---------------------------------------


def test_proximity_of_constant_e():
    e = proximity(PowerSeries.constant(3, math.e), 2.0, count=500, seed=1)
    assert e.value == pytest.approx(1.0, abs=1e-15) and e.stderr == 0.0


@pytest.mark.parametrize("r", [1.0, 1.5, 3.0])
def test_proximity_of_z1(r):
    e = proximity(Z1, r, count=100_000, seed=2)
    assert e.agrees_with(math.log(r) - 0.5 + 0.5 / r ** 2)


@pytest.mark.parametrize("r", [1.5, 4.0])
def test_proximity_of_reciprocal_z1(r):
    q = Quotient(PowerSeries.constant(2, 1.0), Z1)
    e = proximity(q, r, count=100_000, seed=3)
    assert abs(e.value - 0.5 / r ** 2) <= 3 * e.stderr + 1e-3


def test_proximity_is_nonnegative():
    for f in (Z1, EXP2, make_polynomial(2, [((0, 0), 1e-3)])):
        assert proximity(f, 2.0, count=2000, seed=0).value >= 0.0


def test_proximity_refuses_untrusted_radius():
    with pytest.raises(UntrustedRadiusError):
        proximity(make_exp_of_linear([1, 1], 20), 40.0)


def test_sphere_log_integral_of_constant():
    e = sphere_log_integral(PowerSeries.constant(2, -2.0), 3.0, count=100, seed=0)
    assert e.value == pytest.approx(math.log(2.0))


@pytest.mark.parametrize("r", [0.5, 2.0, 10.0])
def test_sphere_log_integral_of_z1(r):
    e = sphere_log_integral(Z1, r, count=50_000, seed=4)
    assert e.agrees_with(math.log(r) - 0.5)


def test_sphere_log_integral_of_z1z2():
    f = make_polynomial(2, [((1, 1), 1)])
    r = 2.0
    e = sphere_log_integral(f, r, count=20_000, seed=5)
    # brute-force reference with an independent stream
    ref = sphere_log_integral(f, r, count=1_000_000, seed=99)
    assert abs(e.value - ref.value) <= 3 * math.hypot(e.stderr, ref.stderr)
    # linearity of expectation gives the closed form as well
    assert ref.agrees_with(2 * (math.log(r) - 0.5))


def test_sphere_log_integral_rejects_underflow():
    # |exp(z1)| = e^{Re z1} underflows past the rejection floor on part of S(1200)
    f = exp_series(make_polynomial(1, [((1,), 1.0)]), 4000)
    e = sphere_log_integral(f, 1100.0, count=200, seed=0, allow_untrusted=True)
    assert e.rejected > 0 and 0 < e.rejection_rate < 1


# -- valence and counting --------------------------------------------------


@pytest.mark.parametrize("r0, r", [(1.25, 2.0), (1.5, 6.0)])
def test_valence_of_hyperplane(r0, r):
    e = valence_jensen(Z1, r, r0, count=20_000, seed=6)
    assert e.agrees_with(math.log(r / r0))


def test_valence_of_zero_free_function():
    e = valence_jensen(EXP2, 5.0, 1.25, count=20_000, seed=7)
    assert e.agrees_with(0.0)


def test_valence_of_constant_is_zero():
    e = valence_jensen(PowerSeries.constant(2, 3.0), 5.0, 1.25, count=100, seed=0)
    assert e.value == 0.0


def test_valence_argument_checks():
    with pytest.raises(ValueError):
        valence_jensen(Z1, 2.0, 3.0)
    with pytest.raises(ValueError):
        valence_jensen(Z1, 2.0, 0.5)
    with pytest.raises(ValueError):
        valence_jensen(PowerSeries.zero(2), 2.0)


@pytest.mark.parametrize("f, n", [
    (Z1, 1.0),
    (EXP2, 0.0),
    (make_polynomial(2, [((2, 0), 1)]), 2.0),
])
def test_counting_function(f, n):
    e = counting_from_valence(f, 1.5, 4.0, count=20_000, seed=8)
    assert e.agrees_with(n)


def test_counting_argument_checks():
    with pytest.raises(ValueError):
        counting_from_valence(Z1, 3.0, 2.0)


def test_first_main_theorem_for_hyperplane():
    # m(r, 1/z1) + N(r, 0; z1) - m(r, z1) does not depend on r
    rec = Quotient(PowerSeries.constant(2, 1.0), Z1)
    vals, errs = [], []
    for k, r in enumerate([1.5, 2.0, 3.0, 5.0, 8.0]):
        a = proximity(rec, r, 40_000, seed=10 + k)
        b = valence_jensen(Z1, r, 1.25, 40_000, seed=20 + k)
        c = proximity(Z1, r, 40_000, seed=30 + k)
        vals.append(a.value + b.value - c.value)
        errs.append(math.sqrt(a.stderr ** 2 + b.stderr ** 2 + c.stderr ** 2))
    for v, e in zip(vals, errs):
        assert abs(v - vals[0]) <= 3 * math.hypot(e, errs[0])
    assert vals[0] == pytest.approx(0.5 - math.log(1.25), abs=3 * errs[0] + 1e-9)


def test_characteristic_of_entire_function_is_proximity():
    a = characteristic(Z1, 2.0, 1000, 0)
    b = proximity(Z1, 2.0, 1000, 0)
    assert a == b


def test_characteristic_adds_pole_valence():
    q = Quotient(PowerSeries.constant(2, 1.0), Z1)
    t = characteristic(q, 3.0, 40_000, 1)
    # T(r, 1/z1) = T(r, z1) + O(1) = log r + O(1)
    assert t.value == pytest.approx(math.log(3.0) - math.log(1.25) + 0.5 / 9, abs=3 * t.stderr + 1e-9)


# -- inequalities of the maximum term -------------------------------------


def _random_exp_poly(coefs, D):
    terms = [((1, 0), coefs[0]), ((0, 1), coefs[1]), ((1, 1), coefs[2])]
    return exp_series(make_polynomial(2, [t for t in terms if t[1] != 0] or [((1, 0), 1.0)]), D)


FUNCS = [make_exp_of_linear([1, 1], 120), make_exp_of_linear([2, -0.5j, 1], 90),
         exp_series(make_polynomial(2, [((2, 0), 1), ((0, 2), 1)]), 120),
         make_polynomial(2, [((0, 0), 1), ((3, 2), 2), ((1, 0), -5)])]


@pytest.mark.parametrize("f", FUNCS)
def test_maximum_modulus_bounded_by_maximum_term(f):
    # log M(r) <= log mu(r) + log(nu(R) + R/(R - r)) with R = 2r
    for r in (1.5, 2.0, 3.0, 4.0):
        R = 2 * r
        if not (is_trusted(f, r, sphere=True) and is_trusted(f, R)):
            continue
        M, _ = max_modulus_sphere(f, r, restarts=16, seed=0)
        rhs = max_term(f.norms, r) + math.log(central_index(f.norms, R) + R / (R - r))
        assert M <= rhs + 1e-6


@pytest.mark.parametrize("f", FUNCS)
def test_maximum_term_bounded_by_maximum_modulus(f):
    m = f.dimension
    for r in (1.5, 2.5, 4.0):
        if not (is_trusted(f, r) and is_trusted(f, math.sqrt(m) * r, sphere=True)):
            continue
        M, _ = max_modulus_sphere(f, math.sqrt(m) * r, restarts=16, seed=1)
        assert max_term(f.norms, r) <= m * M + 1e-6


@settings(max_examples=25)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(1.01, 4), st.floats(1.05, 3))
def test_central_index_bound(coefs, r, t):
    f = _random_exp_poly(coefs, 60)
    R = r * t
    if not (is_trusted(f, r) and is_trusted(f, R)):
        return
    lhs = central_index(f.norms, r) * math.log(R / r)
    assert lhs <= max_term(f.norms, R) - max_term(f.norms, r) + 1e-9


@settings(max_examples=25)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_monotone_on_trusted_radii(coefs):
    f = _random_exp_poly(coefs, 60)
    radii = [r for r in np.linspace(1.01, 6, 30) if is_trusted(f, r)]
    nu = [central_index(f.norms, r) for r in radii]
    mu = [max_term(f.norms, r) for r in radii]
    assert all(b >= a for a, b in zip(nu, nu[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(mu, mu[1:]))


# -- grids and profiles ------------------------------------------------------


def test_radius_grid():
    g = RadiusGrid(1.5, 2.0, 3)
    np.testing.assert_allclose(g.radii, [1.5, 3, 6, 12])
    assert len(g) == 4 and g.log_length == pytest.approx(3 * math.log(2))
    h = RadiusGrid.from_range(2.0, 20.0, 10)
    assert h.radii[0] == 2.0 and h.radii[-1] == pytest.approx(20.0)
    assert np.all(np.diff(h.radii) > 0)


@pytest.mark.parametrize("args", [(1.0, 2.0, 3), (0.5, 2.0, 3), (2.0, 1.0, 3), (2.0, 1.5, -1)])
def test_radius_grid_validation(args):
    with pytest.raises(ValueError):
        RadiusGrid(*args)


def test_derived_seed_is_deterministic_and_distinct():
    assert derived_seed(1, 2) == derived_seed(1, 2)
    assert len({derived_seed(1, k) for k in range(50)}) == 50


def test_growth_profile_is_deterministic_across_jobs():
    f = make_exp_of_linear([1, 1], 80)
    grid = RadiusGrid.from_range(1.5, 12, 4)
    a = growth_profile(f, grid, samples=500, restarts=4, seed=3, jobs=1)
    b = growth_profile(f, grid, samples=500, restarts=4, seed=3, jobs=3)
    assert a == b
    assert all(p.trusted for p in a)
    assert list(a[0].as_row()) == list(GrowthProfile.CSV_COLUMNS)
    for p in a:
        assert p.proximity >= 0
        assert p.log_M_torus <= p.log_M_sphere + 1e-9 or p.r > 0
        assert p.log_M_sphere == pytest.approx(math.sqrt(2) * p.r, rel=1e-3)


def test_untrusted_radii_are_flagged_not_used():
    f = make_exp_of_linear([1, 1], 30)
    ps = growth_profile(f, [2.0, 50.0], samples=200, restarts=2, seed=0)
    assert ps[0].trusted and not ps[1].trusted
    assert math.isnan(ps[1].log_M_sphere) and math.isnan(ps[1].proximity)


# -- order estimators -------------------------------------------------------


def test_order_of_exp_sum_from_three_sources():
    # log log mu(r) has slope about 1 + log(r)/(4r), so the grid starts where that is within 0.1
    f = make_exp_of_linear([1, 1], 200)
    grid = RadiusGrid.from_range(5, 40, 16)
    ps = growth_profile(f, grid, samples=200, restarts=16, seed=0)
    for src in ("max_term", "central_index", "max_modulus"):
        assert order_estimate(ps, src) == pytest.approx(1.0, abs=0.1)


def test_hyper_order_of_exp_sum():
    # log log nu(r) has slope about 1/log(2r): below 0.15 only for r in the hundreds.
    # exp(2 z1) has the same homogeneous norms as exp(z1 + z2) and is cheap at high degree.
    f = make_exp_of_linear([1, 1], 120)
    g = make_exp_of_linear([2, 0], 8100)
    np.testing.assert_allclose(f.norms.log_values[1:], g.norms.log_values[1:121], rtol=1e-12)
    ps = norms_profile(g, RadiusGrid.from_range(200, 2000, 12).radii)
    assert all(p.trusted for p in ps)
    assert hyper_order_estimate(ps) <= 0.15


def test_order_of_polynomial():
    p = make_polynomial(2, [((0, 0), 1), ((4, 1), 2), ((2, 0), -1)])
    # the slopes decay like 1/log r
    ps = norms_profile(p, RadiusGrid.from_range(1e2, 1e8, 12).radii)
    assert order_estimate(ps, "central_index") <= 0.1
    assert order_estimate(ps, "max_term") <= 0.1
    assert hyper_order_estimate(ps) <= 0.1


def test_order_of_exp_of_squares():
    f = exp_series(make_polynomial(2, [((2, 0), 1), ((0, 2), 1)]), 400)
    radii = RadiusGrid.from_range(3.0, 9.0, 16).radii
    ps = norms_profile(f, radii)
    assert sum(p.trusted for p in ps) >= 8
    assert order_estimate(ps, "central_index") == pytest.approx(2.0, abs=0.2)
    assert order_estimate(ps, "max_term") == pytest.approx(2.0, abs=0.2)


def test_hyper_order_of_exp_exp():
    f = exp_series(make_exp_of_linear([1, 0], 1500), 1500)
    ps = norms_profile(f, RadiusGrid.from_range(1.5, 3.5, 12).radii)
    assert sum(p.trusted for p in ps) >= 8
    assert hyper_order_estimate(ps) == pytest.approx(1.0, abs=0.3)
    # infinite order: the plain order slopes are far above any small finite value
    assert np.min(order_slopes(ps, trailing=False)) > 3.0


def test_estimators_need_eight_trusted_radii():
    ps = norms_profile(EXP2, [2.0, 3.0, 4.0])
    with pytest.raises(ValueError, match="8"):
        order_estimate(ps)
    with pytest.raises(ValueError):
        order_estimate(norms_profile(EXP2, np.linspace(2, 9, 10)), "nope")


def test_divergence_signature():
    assert is_diverging(np.array([1.0, 1.5, 2.0, 2.6, 3.1]))
    assert not is_diverging(np.array([1.0, 1.01, 0.99, 1.0]))
    assert not is_diverging(np.array([0.5, 0.8, 0.95, 0.99, 1.0]))
    assert not is_diverging(np.array([1.0, 5.0]))
    assert not diverging_order(norms_profile(EXP2, RadiusGrid.from_range(1.5, 40, 16).radii))
