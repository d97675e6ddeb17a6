import math

import mpmath
import numpy as np
import pytest

from qent.specfun import (
    EULER_GAMMA,
    PSI_AT_ONE,
    ZETA3,
    PolyGammaTable,
    complete_bell,
    hermite_he,
    log_factorial,
    pochhammer,
    polygamma,
    polygamma_int,
)


def test_constants_at_one():
    assert polygamma_int(0, 1) == pytest.approx(-0.5772156649015329, rel=1e-15)
    assert polygamma_int(1, 1) == pytest.approx(math.pi**2 / 6, rel=1e-15)
    assert polygamma_int(2, 1) == pytest.approx(-2 * ZETA3, rel=1e-15)
    assert polygamma_int(3, 1) == pytest.approx(math.pi**4 / 15, rel=1e-15)
    assert PSI_AT_ONE[0] == -EULER_GAMMA


def test_harmonic_example():
    assert polygamma_int(0, 5) == pytest.approx(25 / 12 - EULER_GAMMA, rel=1e-15)


@pytest.mark.parametrize("order", range(4))
@pytest.mark.parametrize("arg", [1, 2, 3, 7, 11, 12, 13, 50, 1000, 10**6])
def test_against_mpmath(order, arg):
    ref = float(mpmath.polygamma(order, arg))
    assert polygamma_int(order, arg) == pytest.approx(ref, rel=1e-14, abs=0)


@pytest.mark.parametrize("order", range(4))
def test_recurrence_up_to_1e4(order):
    l = np.arange(1, 10_001)
    tab = PolyGammaTable(10_001)
    lhs = tab(order, l + 1) - tab(order, l)
    rhs = (-1) ** order * math.factorial(order) / l.astype(float) ** (order + 1)
    # differences of nearby values lose digits, so compare on the scale of the values
    scale = np.maximum(np.abs(tab(order, l + 1)), np.abs(rhs))
    assert np.max(np.abs(lhs - rhs) / scale) < 1e-13


def test_monotonicity():
    tab = PolyGammaTable(200)
    l = np.arange(1, 200)
    assert np.all(np.diff(tab(0, l)) > 0)
    p1 = tab(1, l)
    assert np.all(np.diff(p1) < 0) and np.all(p1 > 0)


def test_table_matches_direct_and_grows():
    tab = PolyGammaTable(4)
    assert tab.max_arg >= 4
    v = tab(2, 300)
    assert tab.max_arg >= 300
    assert v == pytest.approx(polygamma_int(2, 300), rel=1e-15)


def test_domain_errors():
    with pytest.raises(ValueError):
        polygamma_int(0, 0)
    with pytest.raises(ValueError):
        polygamma_int(0, 2.5)
    with pytest.raises(ValueError):
        polygamma_int(4, 1)
    with pytest.raises(ValueError):
        PolyGammaTable()(0, 0)


def test_polygamma_real_arguments():
    for order in range(4):
        for x in (0.5, 1.25, 3.7, 22.1):
            assert polygamma(order, x) == pytest.approx(float(mpmath.polygamma(order, x)), rel=1e-13)
    assert math.isnan(polygamma(0, -2.0))


def test_hermite():
    assert hermite_he(3, 0.0) == 0.0
    assert hermite_he(4, 0.0) == 3.0
    assert hermite_he(3, 2.0) == 2.0
    x = np.linspace(-5, 5, 101)
    assert np.allclose(hermite_he(4, x), x * hermite_he(3, x) - 3 * (x * x - 1), atol=1e-10)
    with pytest.raises(ValueError):
        hermite_he(2, 1.0)


def test_log_factorial():
    assert log_factorial(0) == 0.0
    assert log_factorial(1) == 0.0
    assert log_factorial(5) == pytest.approx(math.log(120), rel=1e-15)
    assert log_factorial(5000) == pytest.approx(float(mpmath.loggamma(5001)), rel=1e-14)
    with pytest.raises(ValueError):
        log_factorial(-1)


def test_pochhammer_and_bell():
    assert pochhammer(4, 4) == 840
    y = [2.0, 3.0, 5.0, 7.0]
    # B1 = y1, B2 = y1^2 + y2, B3 = y1^3 + 3 y1 y2 + y3
    assert complete_bell(1, y) == 2.0
    assert complete_bell(2, y) == 7.0
    assert complete_bell(3, y) == 8 + 18 + 5
    assert complete_bell(4, y) == 16 + 6 * 4 * 3 + 4 * 2 * 5 + 3 * 9 + 7
