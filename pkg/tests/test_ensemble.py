import math

import numpy as np
import pytest

from qent import _kernels
from qent.cumulants import hs_cumulants
from qent.ensemble import (
    EigenSample,
    InsufficientDataError,
    RngConfig,
    StreamingStats,
    accumulate,
    complex_gaussian,
    entropy_from_sample,
    hermitian_eigenvalues,
    k_statistics,
    m2_oracle_cumulants,
    m2_oracle_normalization,
    monte_carlo,
    sample_wishart_eigenvalues,
)


def test_complex_gaussian_variance():
    z = complex_gaussian(np.random.default_rng(0), 400_000)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
    assert np.var(z.real) == pytest.approx(0.5, abs=0.01)


def test_eigen_examples():
    assert np.allclose(hermitian_eigenvalues(np.diag([1.0, 2.0])), [1, 2])
    a = np.array([[2, 1j], [-1j, 2]])
    assert np.allclose(hermitian_eigenvalues(a), [1, 3], atol=1e-14)
    with pytest.raises(ValueError):
        hermitian_eigenvalues(np.array([[1, 2], [0, 1]]))


@pytest.mark.parametrize("backend", ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else []))
def test_random_wishart_eigenvalues(backend):
    rng = np.random.default_rng(3)
    for m, n in [(3, 3), (6, 9), (10, 10)]:
        x = complex_gaussian(rng, (m, n))
        w = x @ x.conj().T
        ev = hermitian_eigenvalues(w, backend=backend)
        assert np.all(ev >= -1e-12)
        assert np.all(np.diff(ev) >= 0)
        assert ev.sum() == pytest.approx(np.trace(w).real, rel=1e-10)
        assert np.allclose(ev, np.linalg.eigvalsh(w), rtol=1e-10, atol=1e-12)


def test_sample_and_entropy():
    s = sample_wishart_eigenvalues((3, 5), np.random.default_rng(1))
    assert s.lam.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(s.lam, s.theta / s.r)
    d = entropy_from_sample(s)
    assert 0 <= d.S <= math.log(3) + 1e-12
    assert d.S == pytest.approx((s.r * math.log(s.r) - d.T) / s.r, abs=1e-10)


def test_entropy_examples():
    d = entropy_from_sample(np.array([1.0, 1.0]))
    assert d.S == pytest.approx(math.log(2)) and d.T == 0.0
    assert entropy_from_sample(np.array([2.0])).S == 0.0
    d = entropy_from_sample(EigenSample(np.array([3.0, 1.0]), 4.0, np.array([0.75, 0.25])))
    assert d.T == pytest.approx(3 * math.log(3))
    assert d.S == pytest.approx(math.log(4) - 0.75 * math.log(3))
    # boundary draw with a zero eigenvalue
    assert entropy_from_sample(np.array([0.0, 1.0])).S == 0.0


@pytest.mark.parametrize("n", [1, 5])
def test_trace_is_gamma(n):
    x = complex_gaussian(np.random.default_rng(n), (400_000, 1, n))
    _, _, _, r, fails = _kernels.entropy_batch(x)
    assert fails == 0
    se_mean = math.sqrt(n / r.size)
    assert abs(r.mean() - n) < 5 * se_mean
    st = StreamingStats(shift=n, batch_size=10_000).update(r)
    ks = k_statistics(st)
    assert abs(ks.values[1] - n) < 5 * ks.stderr[1]


def test_k_statistics_small():
    st = accumulate(StreamingStats(), [2.5] * 5)
    assert np.allclose(st.total().k_statistics(), [2.5, 0, 0, 0], atol=1e-15)
    k = StreamingStats().update([1.0, 2.0, 3.0]).total().k_statistics(3)
    assert np.allclose(k, [2, 1, 0], atol=1e-15)
    with pytest.raises(InsufficientDataError):
        StreamingStats().update([1.0, 2.0, 3.0]).total().k_statistics(4)


def test_k_statistics_match_direct_formula():
    x = np.random.default_rng(5).gamma(2.0, size=1000)
    n = x.size
    d = x - x.mean()
    m2, m3, m4 = (np.mean(d**p) for p in (2, 3, 4))
    k2 = n / (n - 1) * m2
    k3 = n**2 / ((n - 1) * (n - 2)) * m3
    k4 = n**2 * ((n + 1) * m4 - 3 * (n - 1) * m2**2) / ((n - 1) * (n - 2) * (n - 3))
    got = StreamingStats(shift=1.7).update(x).total().k_statistics()
    assert np.allclose(got, [x.mean(), k2, k3, k4], rtol=1e-11)


def test_merge_order_independent():
    rng = np.random.default_rng(9)
    parts = [rng.normal(3.0, 2.0, 1000) for _ in range(3)]
    a = StreamingStats(0.0).update(parts[0])
    b = StreamingStats(1.0).update(parts[1])
    c = StreamingStats(-2.0).update(parts[2])
    left = a.merge(b).merge(c).total().k_statistics()
    right = c.merge(b.merge(a)).total().k_statistics()
    assert np.allclose(left, right, rtol=1e-12, atol=1e-12)


def test_normal_fourth_cumulant():
    st = StreamingStats(batch_size=25_000)
    rng = np.random.default_rng(21)
    for _ in range(40):
        st.update(rng.standard_normal(25_000))
    ks = k_statistics(st)
    assert ks.batches == 40
    assert abs(ks.values[3]) < 5 * ks.stderr[3]


def test_rng_streams_reproducible():
    a = [g.standard_normal(3) for g in RngConfig(7, 4).generators()]
    b = [g.standard_normal(3) for g in RngConfig(7, 4).generators()]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], a[1])


def test_mc_deterministic_across_threads():
    r1 = monte_carlo(3, 4, 20_000, seed=5, streams=8, threads=1)
    r2 = monte_carlo(3, 4, 20_000, seed=5, streams=8, threads=4)
    assert np.array_equal(r1.cumulants().values, r2.cumulants().values)
    assert np.array_equal(r1.cumulants().stderr, r2.cumulants().stderr)


def test_mc_backends_agree():
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    a = monte_carlo(3, 5, 4_000, seed=2, streams=4, threads=1, backend="numpy")
    b = monte_carlo(3, 5, 4_000, seed=2, streams=4, threads=1, backend="numba")
    assert np.allclose(a.cumulants().values, b.cumulants().values, rtol=1e-10)


def test_r_and_s_uncorrelated():
    res = monte_carlo(3, 4, 100_000, seed=13, threads=1)
    rho, se = res.r_s_correlation()
    assert abs(rho) < 5 * se
    assert max(s.max_normalization_error for s in res.sinks) < 1e-12


def test_mc_small_system_close_to_exact():
    res = monte_carlo(2, 3, 200_000, seed=1, threads=1)
    ks = res.cumulants()
    exact = hs_cumulants(2, 3).as_tuple()
    assert np.all(np.abs(ks.values - exact) <= 5 * ks.stderr)


def test_mc_rejects_too_few_samples():
    with pytest.raises(ValueError):
        monte_carlo(2, 2, 10, streams=64)


def test_jacobi_failure_is_reported():
    x = complex_gaussian(np.random.default_rng(0), (5, 4, 4))
    *_, fails = _kernels.entropy_batch(x, backend="numpy", max_sweeps=0)
    assert fails == 5


def test_m2_oracle():
    k = m2_oracle_cumulants(2)
    assert k.k1 == pytest.approx(1 / 3, rel=1e-8)
    assert k.k2 == pytest.approx(13 / 36 - math.pi**2 / 30, rel=1e-8)
    assert m2_oracle_normalization(2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        m2_oracle_cumulants(1)
