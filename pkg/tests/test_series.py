import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wvlab import series as S
from wvlab.series import (DimensionError, PowerSeries, antiderivative_z1, evaluate, exp_series,
                          homogeneous_l1_norms, is_trusted, make_exp_of_linear, make_polynomial,
                          partial_derivative)


def poly(m, terms, D=None):
    return make_polynomial(m, terms, D)


def values(s, Z):
    mant, shift = S.evaluate_batch(s, Z)
    return mant * np.exp(shift)


def assert_series_close(a, b, rel=1e-13):
    assert a.dimension == b.dimension and a.truncation_degree == b.truncation_degree
    assert set(a.coefficients) == set(b.coefficients)
    for k, v in a.coefficients.items():
        assert b.coefficient(k) == pytest.approx(v, rel=rel)


# -- construction ---------------------------------------------------------


def test_monomial_and_constants():
    z1 = poly(2, [((1, 0), 1)])
    assert z1.truncation_degree == 1 and z1.coefficients == {(1, 0): 1 + 0j}
    s = poly(2, [((2, 0), 1), ((0, 2), 1)])
    assert s.truncation_degree == 2 and s.n_terms == 2
    c = poly(1, [((0,), 3)])
    assert c.truncation_degree == 0 and c.coefficient((0,)) == 3


def test_duplicate_indices_are_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        poly(2, [((1, 0), 1), ((1, 0), 2)])


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ValueError):
        poly(2, [((1, 0, 0), 1)])
    with pytest.raises(DimensionError):
        poly(2, [((1, 0), 1)]) + poly(3, [((1, 0, 0), 1)])


def test_zero_coefficients_are_not_stored():
    s = poly(2, [((1, 0), 0), ((0, 1), 2)])
    assert s.n_terms == 1


def test_canonical_order_is_degree_then_lexicographic():
    s = poly(2, [((0, 2), 1), ((2, 0), 1), ((1, 0), 1), ((1, 1), 1), ((0, 0), 1)])
    assert [tuple(a) for a in s.alphas] == [(0, 0), (1, 0), (0, 2), (1, 1), (2, 0)]


def test_same_function_gives_identical_series():
    a = poly(2, [((1, 0), 1), ((0, 1), 2)])
    b = poly(2, [((0, 1), 2), ((1, 0), 1)])
    assert a == b and hash(a) == hash(b)


def test_exp_of_linear_small_case():
    s = make_exp_of_linear([1, 1], 2)
    want = {(0, 0): 1, (1, 0): 1, (0, 1): 1, (2, 0): 0.5, (1, 1): 1, (0, 2): 0.5}
    assert s.coefficients.keys() == want.keys()
    for k, v in want.items():
        assert s.coefficient(k) == pytest.approx(v, rel=1e-15)


def test_exp_of_zero_linear_form_is_one():
    s = make_exp_of_linear([0, 0], 8)
    assert s.coefficients == {(0, 0): 1 + 0j}


@pytest.mark.parametrize("k", [0, 1, 5, 17, 60])
def test_exp_linear_norms_brute_force(k):
    s = make_exp_of_linear([1, 1], 60)
    brute = sum(1.0 / (math.factorial(a) * math.factorial(k - a)) for a in range(k + 1))
    assert s.norms.values[k] == pytest.approx(brute, rel=1e-12)
    assert brute == pytest.approx(2 ** k / math.factorial(k), rel=1e-12)


def test_exp_linear_coefficients_deep_in_extended_range():
    s = make_exp_of_linear([1, 1], 400)
    # coefficient of z1^200 z2^200 is 1/(200!)^2, far below the double range
    want = -2 * math.lgamma(201)
    assert s.log_abs_coefficients[s.n_terms - 201] == pytest.approx(want, rel=1e-13)


# -- exp_series -----------------------------------------------------------


def test_exp_of_zero_series_is_one():
    assert exp_series(PowerSeries.zero(2)).coefficients == {(0, 0): 1 + 0j}


def test_exp_of_z_in_one_variable():
    s = exp_series(poly(1, [((1,), 1)], 3))
    assert [s.coefficient((k,)) for k in range(4)] == pytest.approx([1, 1, 0.5, 1 / 6], rel=1e-15)


def test_exp_series_matches_exp_of_linear():
    a = exp_series(poly(2, [((1, 0), 1), ((0, 1), 1)]), 30)
    b = make_exp_of_linear([1, 1], 30)
    for k, v in b.coefficients.items():
        assert a.coefficient(k) == pytest.approx(v, rel=1e-13)


def test_exp_series_univariate_path_matches_general_path():
    g = poly(2, [((1, 0), 0.7), ((3, 0), -0.2j)])
    fast = exp_series(g, 25)
    # the same exponent with an inert second variable forces the general path
    g2 = poly(2, [((1, 0), 0.7), ((3, 0), -0.2j), ((0, 25), 1e-30)])
    slow = exp_series(g2, 25)
    for k in range(26):
        assert fast.coefficient((k, 0)) == pytest.approx(slow.coefficient((k, 0)), rel=1e-13, abs=1e-300)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_exp_is_a_homomorphism(a, b, c, d):
    g = poly(2, [((1, 0), complex(a, b))], 12)
    h = poly(2, [((0, 1), complex(c, d)), ((1, 1), 0.5)], 12)
    lhs = exp_series(g + h, 12)
    rhs = exp_series(g, 12) * exp_series(h, 12)
    for k, v in lhs.coefficients.items():
        assert rhs.coefficient(k) == pytest.approx(v, rel=1e-10, abs=1e-12)


def test_exp_series_constant_term():
    s = exp_series(poly(1, [((0,), 2.0), ((1,), 1.0)], 5))
    assert s.coefficient((0,)) == pytest.approx(math.e ** 2)
    assert s.coefficient((3,)) == pytest.approx(math.e ** 2 / 6)


# -- arithmetic -----------------------------------------------------------


def test_add_cancellation_gives_zero():
    z1 = poly(2, [((1, 0), 1)])
    assert (z1 + (-1) * z1).is_zero


def test_mul_of_monomials():
    z1, z2 = poly(2, [((1, 0), 1)]), poly(2, [((0, 1), 1)])
    assert (z1 * z2).coefficients == {(1, 1): 1 + 0j}


def test_difference_of_squares():
    p = poly(1, [((0,), 1), ((1,), 1)]) * poly(1, [((0,), 1), ((1,), -1)])
    assert p.coefficients == {(0,): 1 + 0j, (2,): -1 + 0j}
    assert p.truncation_degree == 2


def test_mul_truncates_to_smaller_degree_for_series():
    a = make_exp_of_linear([1, 0], 10)
    b = make_exp_of_linear([0, 1], 6)
    assert (a * b).truncation_degree == 6
    assert (a * poly(2, [((1, 1), 1)])).truncation_degree == 10


def test_scale_by_complex():
    s = 2j * poly(2, [((1, 0), 1)])
    assert s.coefficient((1, 0)) == 2j


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.floats(-3, 3)), min_size=1, max_size=6,
                unique_by=lambda t: t[:2]),
       st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.floats(-3, 3)), min_size=1, max_size=6,
                unique_by=lambda t: t[:2]))
def test_product_norms_bounded_by_convolution(ta, tb):
    a = poly(2, [((i, j), c) for i, j, c in ta], 6)
    b = poly(2, [((i, j), c) for i, j, c in tb], 6)
    na, nb, nab = (x.norms.values for x in (a, b, a * b))
    for k in range(len(nab)):
        conv = sum(na[i] * nb[k - i] for i in range(k + 1) if i < len(na) and k - i < len(nb))
        assert nab[k] <= conv * (1 + 1e-12) + 1e-300


# -- calculus -------------------------------------------------------------


def test_partial_derivative_examples():
    s = poly(2, [((2, 1), 1)])
    assert partial_derivative(s, (0, 0)) is s
    assert partial_derivative(s, (1, 0)).coefficients == {(1, 1): 2 + 0j}
    assert partial_derivative(poly(2, [((0, 0), 5)]), (1, 0)).is_zero


def test_partial_derivative_lowers_truncation():
    s = make_exp_of_linear([1, 1], 20)
    assert partial_derivative(s, (1, 2)).truncation_degree == 17
    assert partial_derivative(make_exp_of_linear([1], 2), (5,)).truncation_degree == 0


@given(st.integers(0, 3), st.integers(0, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_derivative_is_linear(i, j, a, b):
    f = make_exp_of_linear([1, 0.5], 15)
    g = make_exp_of_linear([-0.3, 2], 15)
    lhs = partial_derivative(a * f + b * g, (i, j))
    rhs = a * partial_derivative(f, (i, j)) + b * partial_derivative(g, (i, j))
    for k, v in rhs.coefficients.items():
        assert lhs.coefficient(k) == pytest.approx(v, rel=1e-12, abs=1e-14)


def test_mixed_partials_commute():
    s = exp_series(poly(2, [((1, 1), 1), ((2, 0), 0.3)]), 16)
    a = partial_derivative(partial_derivative(s, (1, 0)), (0, 1))
    b = partial_derivative(partial_derivative(s, (0, 1)), (1, 0))
    assert_series_close(a, b)


def test_product_rule():
    f = make_exp_of_linear([1, 2], 12)
    g = poly(2, [((0, 0), 1), ((2, 1), 3), ((0, 3), -1)])
    lhs = partial_derivative(f * g, (1, 0))
    rhs = f * partial_derivative(g, (1, 0)) + g * partial_derivative(f, (1, 0))
    D = min(lhs.truncation_degree, rhs.truncation_degree)
    for k, v in rhs.truncate(D).coefficients.items():
        assert lhs.coefficient(k) == pytest.approx(v, rel=1e-12)


def test_antiderivative_examples():
    one = PowerSeries.constant(2, 1.0)
    assert antiderivative_z1(one).coefficients == {(1, 0): 1 + 0j}
    a = antiderivative_z1(poly(2, [((1, 0), 1)]))
    assert a.coefficients == {(2, 0): 0.5 + 0j}
    assert antiderivative_z1(make_exp_of_linear([1, 1], 9)).truncation_degree == 10


def test_derivative_undoes_antiderivative():
    s = exp_series(poly(3, [((0, 1, 1), 1), ((1, 0, 0), 0.5)]), 10)
    assert_series_close(partial_derivative(antiderivative_z1(s), (1, 0, 0)), s)


def _exact_exp_sum(z, D):
    """Truncated exp(z1 + z2) at a complex point, in exact rational arithmetic."""
    from fractions import Fraction as Fr
    re = Fr(z[0].real) + Fr(z[1].real)
    im = Fr(z[0].imag) + Fr(z[1].imag)
    # sum_k (z1 + z2)^k / k! equals the truncated double series term by term
    tr, ti, sr, si = Fr(1), Fr(0), Fr(1), Fr(0)
    for k in range(1, D + 1):
        tr, ti = (tr * re - ti * im) / k, (tr * im + ti * re) / k
        sr, si = sr + tr, si + ti
    return sr, si


def test_mixed_derivative_matches_finite_differences(rng):
    D = 60
    f = make_exp_of_linear([1, 1], D)
    g = partial_derivative(f, (1, 1))
    h = 1e-5
    for _ in range(5):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        st_ = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
        fr = fi = 0
        for s1, s2, sign in st_:
            a, b = _exact_exp_sum(z + np.array([s1 * h, s2 * h]), D)
            fr, fi = fr + sign * a, fi + sign * b
        fd = complex(float(fr), float(fi)) / (4 * h * h)
        assert abs(values(g, z[None])[0] - fd) <= 1e-6 * abs(fd)


def test_first_derivatives_match_finite_differences_in_unit_ball(rng):
    f = exp_series(poly(2, [((1, 0), 1), ((1, 1), -0.5), ((0, 2), 0.25j)]), 40)
    Z = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    Z *= (rng.uniform(size=100) / np.linalg.norm(Z, axis=1))[:, None]
    h = 1e-6
    for j, I in enumerate([(1, 0), (0, 1)]):
        e = np.zeros(2)
        e[j] = h
        fd = (values(f, Z + e) - values(f, Z - e)) / (2 * h)
        ser = values(partial_derivative(f, I), Z)
        assert np.max(np.abs(ser - fd) / np.abs(ser)) <= 1e-5


# -- norms and evaluation --------------------------------------------------


def test_norms_of_polynomial():
    p = poly(2, [((0, 0), 1), ((3, 0), 2), ((1, 2), -3j)])
    v = homogeneous_l1_norms(p).values
    assert v[3] == pytest.approx(5.0)
    assert v[1] == 0 and v[2] == 0


def test_norms_of_zero_series():
    assert np.all(PowerSeries.zero(3, 4).norms.values == 0)


def test_eval_examples():
    m, s = evaluate(poly(2, [((1, 0), 1)]), (2, 0))
    assert S.to_value(m, s) == pytest.approx(2)
    m, s = evaluate(PowerSeries.constant(2, 3 - 1j), (5, 7j))
    assert S.to_value(m, s) == pytest.approx(3 - 1j)
    assert evaluate(PowerSeries.zero(2), (1, 1)) == (0j, -math.inf)


def test_eval_exp_linear_at_r10():
    f = make_exp_of_linear([1, 1], 60)
    m, s = evaluate(f, (10, 10))
    assert math.log(abs(m)) + s == pytest.approx(20.0, abs=1e-8)


def test_eval_with_scale_degree_is_the_same_value():
    f = make_exp_of_linear([1, 1], 80)
    z = (3 + 4j, -2j)
    a = evaluate(f, z)
    b = evaluate(f, z, scale_degree=7)
    assert S.to_value(*a) == pytest.approx(S.to_value(*b), rel=1e-13)


def test_eval_beyond_double_range():
    f = make_exp_of_linear([1, 1], 2000)
    # e^{800} overflows a double; the split form does not
    m, s = evaluate(f, (400, 0))
    assert math.log(abs(m)) + s == pytest.approx(400.0, rel=1e-12)


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.floats(-5, 5), st.floats(-5, 5)),
                min_size=1, max_size=8, unique_by=lambda t: t[:2]),
       st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_eval_matches_direct_sum(terms, a, b, c, d):
    p = poly(2, [((i, j), complex(x, y)) for i, j, x, y in terms])
    z = np.array([complex(a, b), complex(c, d)])
    direct = sum(complex(x, y) * z[0] ** i * z[1] ** j for i, j, x, y in terms)
    scale = sum(abs(complex(x, y)) * abs(z[0]) ** i * abs(z[1]) ** j for i, j, x, y in terms)
    got = S.to_value(*evaluate(p, z))
    assert abs(got - direct) <= 1e-13 * max(scale, 1e-300)


def test_log_abs_bounds_flag_cancellation():
    f = make_exp_of_linear([1, 1], 160)
    # |f| = e^{-60} while the terms reach e^{60}: the value is lost to rounding
    b = S.log_abs_bounds(f, np.array([[-30.0, -30.0]]))
    assert b.width[0] > 1.0
    ok = S.log_abs_bounds(f, np.array([[5.0, 5.0]]))
    assert ok.width[0] < 1e-10


# -- trust ------------------------------------------------------------------


def test_exact_series_are_always_trusted():
    assert is_trusted(poly(2, [((5, 0), 1)]), 1e9)


def test_trust_rule_for_exp_linear():
    f = make_exp_of_linear([1, 1], 60)
    # central index ~ 2r and the tail ratio 2r/k must be <= 1/2 near k = D
    assert is_trusted(f, 10.0)
    assert not is_trusted(f, 20.0)


def test_trust_requires_margin_below_D():
    f = make_exp_of_linear([1], 30)
    assert not is_trusted(f, 25.0)
    assert is_trusted(f, 5.0)


def test_sphere_norms_bound_sphere_values(rng):
    f = exp_series(poly(2, [((1, 1), 1), ((2, 0), -0.5)]), 30)
    Z = rng.normal(size=(200, 2)) + 1j * rng.normal(size=(200, 2))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    A = f.alphas
    mono = np.abs(np.prod(Z[:, None, :] ** A[None, :, :], axis=2))
    k = A.sum(axis=1)
    bound = f.sphere_norms.values[k]
    # each monomial's sphere majorant dominates its values on the unit sphere
    per_term = np.exp(f.log_abs_coefficients) * mono
    for deg in range(31):
        sel = k == deg
        if sel.any():
            assert np.all(per_term[:, sel].sum(axis=1) <= bound[sel][0] * (1 + 1e-12))


def test_all_multi_indices_counts():
    for m, D in product([1, 2, 3], [0, 1, 5]):
        assert len(S.all_multi_indices(m, D)) == math.comb(D + m, m)
