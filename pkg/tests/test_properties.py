import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qent._series import Laurent
from qent.cumulants import CumulantSet, cumulants_from_moments, hs_cumulants, moments_from_cumulants
from qent.ensemble import StreamingStats
from qent.kernel import laguerre_all
from qent.specfun import hermite_he, polygamma, polygamma_int

small = st.floats(-1.0, 1.0, allow_nan=False)


@given(st.tuples(small, st.floats(1e-3, 1.0), small, small))
def test_moment_round_trip(k):
    back = cumulants_from_moments(moments_from_cumulants(k)).as_tuple()
    assert np.allclose(back, k, rtol=0, atol=1e-13)


@given(st.integers(0, 3), st.floats(0.05, 200.0))
def test_polygamma_recurrence(order, x):
    lhs = polygamma(order, x + 1) - polygamma(order, x)
    rhs = (-1) ** order * math.factorial(order) / x ** (order + 1)
    scale = abs(polygamma(order, x)) + abs(rhs)
    assert abs(lhs - rhs) <= 1e-13 * scale


@given(st.integers(0, 3), st.integers(1, 500))
def test_polygamma_int_matches_real_path(order, l):
    assert math.isclose(polygamma_int(order, l), polygamma(order, float(l)), rel_tol=1e-13)


@given(st.floats(-6.0, 6.0))
def test_hermite_recurrence(x):
    # He_{k+1} = x He_k - k He_{k-1}, with He_2 = x^2 - 1
    he2 = x * x - 1
    assert math.isclose(hermite_he(3, x), x * he2 - 2 * x, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(hermite_he(4, x), x * hermite_he(3, x) - 3 * he2, rel_tol=1e-12, abs_tol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5.0, 5.0), min_size=8, max_size=60), st.integers(1, 7), st.floats(-3, 3))
def test_power_sum_merge_order(xs, cut, shift):
    cut = min(cut, len(xs) - 1)
    a = StreamingStats(shift).update(xs[:cut])
    b = StreamingStats(-shift).update(xs[cut:])
    whole = StreamingStats(0.0).update(xs).total().k_statistics()
    for merged in (a.merge(b), b.merge(a)):
        got = merged.total().k_statistics()
        assert np.allclose(got, whole, rtol=1e-9, atol=1e-9)


coeffs = st.lists(st.floats(-3.0, 3.0), min_size=6, max_size=6)


@given(coeffs, coeffs, st.integers(-2, 2))
def test_laurent_product_matches_pointwise(a, b, val):
    eps = 1e-3
    x, y = Laurent(a, val=val), Laurent(b, val=0)
    ev = lambda s: math.fsum(c * eps ** (s.val + i) for i, c in enumerate(s.coef))
    prod = x * y
    assert math.isclose(ev(prod), ev(x) * ev(y), rel_tol=1e-9, abs_tol=1e-9 * eps**val)


@given(st.floats(0.2, 3.0), coeffs)
def test_laurent_reciprocal(lead, rest):
    s = Laurent([lead] + rest[:5], val=1)
    one = s * s.reciprocal()
    assert math.isclose(one.coeff(0), 1.0, rel_tol=1e-12)
    for k in range(1, 5):
        assert abs(one.coeff(k)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.floats(0.0, 5.0), st.floats(0.0, 60.0))
def test_laguerre_three_term(k, a, x):
    L = laguerre_all(k + 1, a, np.array([x]))[:, 0]
    resid = (k + 1) * L[k + 1] - (2 * k + 1 + a - x) * L[k] + (k + a) * L[k - 1]
    scale = abs((k + 1) * L[k + 1]) + abs((2 * k + 1 + a - x) * L[k]) + abs((k + a) * L[k - 1])
    assert abs(resid) <= 1e-12 * scale + 1e-300


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 30))
def test_mean_and_variance_physical(m, extra):
    k = hs_cumulants(m, m + extra)
    assert 0 < k.k1 < math.log(m)
    assert k.k2 > 0
