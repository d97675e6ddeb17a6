import math

import numpy as np
import pytest
from scipy import integrate

from qent.cumulants import CumulantSet, DegenerateDistributionError, hs_cumulants
from qent.density import (
    DEFAULT_EDGES,
    DensityApprox,
    Histogram,
    HistogramSink,
    bin_average,
    empirical_histogram,
    gram_charlier_pdf,
    standardize,
    tail_compare,
)
from qent.ensemble import monte_carlo

K44 = hs_cumulants(4, 4)
PHI0 = 1 / math.sqrt(2 * math.pi)


def test_standardize():
    assert standardize(K44.k1, K44) == 0.0
    assert standardize(K44.k1 + math.sqrt(K44.k2), K44) == pytest.approx(1.0)
    x = standardize(math.log(4), K44)
    assert x == pytest.approx((math.log(4) - K44.k1) / math.sqrt(K44.k2))
    with pytest.raises(DegenerateDistributionError):
        standardize(0.0, hs_cumulants(1, 5))


def test_pdf_at_zero():
    g2 = K44.kurtosis
    assert gram_charlier_pdf(0.0, K44, "gaussian") == pytest.approx(PHI0)
    assert gram_charlier_pdf(0.0, K44, "k3") == pytest.approx(PHI0)
    assert gram_charlier_pdf(0.0, K44, "k4") == pytest.approx(PHI0 * (1 + g2 / 8))
    with pytest.raises(ValueError):
        gram_charlier_pdf(0.0, K44, "k5")


@pytest.mark.parametrize("order", ["gaussian", "k3", "k4"])
def test_normalization(order):
    val = integrate.quad(lambda x: gram_charlier_pdf(x, K44, order), -12, 12, epsabs=1e-13, limit=200)[0]
    assert val == pytest.approx(1.0, abs=1e-8)


def test_moment_matching():
    g1, g2 = K44.skewness, K44.kurtosis
    m3 = integrate.quad(lambda x: x**3 * gram_charlier_pdf(x, K44, "k3"), -12, 12, limit=200)[0]
    e4 = integrate.quad(lambda x: (x**4 - 3) * gram_charlier_pdf(x, K44, "k4"), -12, 12, limit=200)[0]
    assert m3 == pytest.approx(g1, abs=1e-6)
    assert e4 == pytest.approx(g2, abs=1e-6)


def test_left_skew():
    assert K44.skewness < 0
    g = gram_charlier_pdf(-3.0, K44, "gaussian")
    assert gram_charlier_pdf(-3.0, K44, "k3") > g
    assert gram_charlier_pdf(-3.0, K44, "k4") > g


def test_negative_values_not_clipped():
    k = CumulantSet(0.0, 1.0, 2.0, 0.0)
    assert gram_charlier_pdf(-3.0, k, "k3") < 0


def test_histogram_bookkeeping():
    h = Histogram([0.0, 1.0, 2.0])
    h.update([0.5, 1.5, 1.7, 5.0, -1.0])
    assert h.counts.tolist() == [1, 2] and h.total == 3 and h.outside == 2
    assert np.allclose(h.density(), [1 / 5, 2 / 5])
    with pytest.raises(ValueError):
        Histogram([0.0, 0.0, 1.0])
    merged = h.merge(Histogram([0.0, 1.0, 2.0]).update([0.1]))
    assert merged.counts.tolist() == [2, 2] and merged.outside == 2
    with pytest.raises(ValueError):
        h.merge(Histogram([0.0, 2.0]))


def test_chunked_histogram_equals_whole():
    x = np.random.default_rng(0).standard_normal(10_000)
    a = empirical_histogram(x)
    b = empirical_histogram(np.array_split(x, 7))
    assert np.array_equal(a.counts, b.counts)


def test_bin_average_exact_for_polynomials():
    edges = np.array([0.0, 0.5, 2.0])
    avg = bin_average(lambda x: x**3, edges)
    assert np.allclose(avg, [0.5**3 / 4, (2**4 - 0.5**4) / 4 / 1.5])


def test_tail_metric_normal():
    x = np.random.default_rng(1).standard_normal(1_000_000)
    h = empirical_histogram(x)
    gauss = DensityApprox("gaussian", CumulantSet(0.0, 1.0, 0.0, 0.0))
    d, same = tail_compare(h, gauss, gauss, cut=2.5)
    assert d == same
    assert d < 0.003


def test_sink_standardizes():
    res = monte_carlo(4, 4, 50_000, seed=3, threads=1, sink_factory=lambda: HistogramSink(K44))
    h = res.extra[0].hist
    for s in res.extra[1:]:
        h = h.merge(s.hist)
    assert h.total + h.outside == 50_000
    assert h.outside == 0
    centers, dens = h.centers, h.density()
    mean = np.sum(centers * dens * h.widths)
    assert abs(mean) < 0.02
    assert np.array_equal(h.edges, DEFAULT_EDGES)
