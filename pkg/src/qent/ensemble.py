"""Monte Carlo sampling of the Wishart-Laguerre / fixed-trace ensembles.

Sampling is split into a fixed number of independent substreams spawned from
one :class:`numpy.random.SeedSequence`. Each substream is also one batch for
the batch-means standard errors, so results depend on ``(seed, streams)``
only and never on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _kernels
from .cumulants import CumulantSet, SystemDims

__all__ = [
    "NumericalFailure",
    "InsufficientDataError",
    "RngConfig",
    "EigenSample",
    "EntropyDraw",
    "PowerSums",
    "StreamingStats",
    "KStatistics",
    "complex_gaussian",
    "hermitian_eigenvalues",
    "sample_wishart_eigenvalues",
    "entropy_from_sample",
    "accumulate",
    "k_statistics",
    "fisher_k_statistics",
    "EntropyAccumulator",
    "monte_carlo",
    "m2_oracle_cumulants",
    "m2_oracle_normalization",
    "MCResult",
    "default_threads",
]


class NumericalFailure(RuntimeError):
    """A numerical routine did not converge; ``diagnostic`` carries details."""

    def __init__(self, message: str, **diagnostic):
        super().__init__(message)
        self.diagnostic = {"error": message, **diagnostic}


class InsufficientDataError(ValueError):
    pass


def default_threads() -> int:
    env = os.environ.get("QENT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RngConfig:
    seed: int = 0
    streams: int = 64

    def __post_init__(self):
        if self.streams < 1:
            raise ValueError("streams must be positive")

    def generators(self) -> list[np.random.Generator]:
        children = np.random.SeedSequence(self.seed).spawn(self.streams)
        return [np.random.Generator(np.random.PCG64(c)) for c in children]


@dataclass(frozen=True)
class EigenSample:
    theta: np.ndarray
    r: float
    lam: np.ndarray


@dataclass(frozen=True)
class EntropyDraw:
    S: float
    T: float


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex normals with independent N(0, 1/2) real and imaginary parts."""
    shape = tuple(np.atleast_1d(shape))
    raw = rng.standard_normal(shape + (2,))
    raw *= math.sqrt(0.5)
    return raw.view(np.complex128)[..., 0]


def hermitian_eigenvalues(matrix, *, atol: float = 1e-12, backend: str | None = None) -> np.ndarray:
    """Eigenvalues (ascending) of a complex Hermitian matrix by cyclic Jacobi."""
    a = np.asarray(matrix, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > atol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    vals, ok = _kernels.jacobi_eigenvalues(0.5 * (a + a.conj().T), backend=backend)
    if not ok:
        raise NumericalFailure("Jacobi eigensolver did not converge",
                               max_sweeps=_kernels.JACOBI_MAX_SWEEPS)
    return np.sort(vals)


def sample_wishart_eigenvalues(dims, rng: np.random.Generator) -> EigenSample:
    """One draw of W = X X^dagger eigenvalues, trace and Schmidt coefficients."""
    dims = SystemDims.of(dims) if isinstance(dims, SystemDims) else SystemDims.of(*dims)
    x = complex_gaussian(rng, (dims.m, dims.n))
    theta = hermitian_eigenvalues(x @ x.conj().T)
    r = float(theta.sum())
    return EigenSample(theta=theta, r=r, lam=theta / r)


def _xlogx(v):
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def entropy_from_sample(sample) -> EntropyDraw:
    """Entropy S from lambda and induced entropy T from theta (x ln x = 0 at 0)."""
    if not isinstance(sample, EigenSample):
        theta = np.asarray(sample, dtype=np.float64)
        r = float(theta.sum())
        sample = EigenSample(theta=theta, r=r, lam=theta / r)
    S = float(-np.sum(_xlogx(sample.lam)))
    T = float(np.sum(_xlogx(sample.theta)))
    return EntropyDraw(S=max(S, 0.0), T=T)


# ------------------------------------------------------------ streaming stats


class PowerSums:
    """Shifted power sums sum (x - shift)^k, k = 1..4, with Neumaier compensation."""

    __slots__ = ("shift", "count", "sums", "_comp")

    def __init__(self, shift: float = 0.0):
        self.shift = float(shift)
        self.count = 0
        self.sums = np.zeros(4)
        self._comp = np.zeros(4)

    def _add(self, vals: np.ndarray, count: int) -> None:
        t = self.sums + vals
        big = np.abs(self.sums) >= np.abs(vals)
        self._comp += np.where(big, (self.sums - t) + vals, (vals - t) + self.sums)
        self.sums = t
        self.count += count

    def update(self, x) -> "PowerSums":
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size == 0:
            return self
        d = x - self.shift
        d2 = d * d
        # numpy sums are pairwise; chunks are then combined with compensation
        vals = np.array([d.sum(), d2.sum(), (d2 * d).sum(), (d2 * d2).sum()])
        self._add(vals, x.size)
        return self

    @property
    def totals(self) -> np.ndarray:
        return self.sums + self._comp

    def recentered(self, shift: float) -> "PowerSums":
        """Same data expressed about a different shift."""
        out = PowerSums(shift)
        out.count = self.count
        if self.count == 0:
            return out
        delta = self.shift - shift
        s = np.concatenate(([float(self.count)], self.totals))
        new = np.zeros(4)
        for k in range(1, 5):
            new[k - 1] = math.fsum(math.comb(k, j) * s[j] * delta ** (k - j) for j in range(k + 1))
        out.sums = new
        return out

    def merge(self, other: "PowerSums") -> "PowerSums":
        """Return a new accumulator holding both data sets (about self.shift)."""
        a = self.recentered(self.shift)
        b = other.recentered(self.shift)
        a._add(b.totals, b.count)
        return a

    def k_statistics(self, order: int = 4) -> np.ndarray:
        return fisher_k_statistics(self.count, self.totals, self.shift, order)


def fisher_k_statistics(n: int, sums, shift: float = 0.0, order: int = 4) -> np.ndarray:
    """Unbiased k-statistics k1..k_order from power sums about ``shift``."""
    if n < order or n < 1:
        raise InsufficientDataError(f"need at least {order} samples for k{order}, have {n}")
    s1, s2, s3, s4 = (float(v) for v in sums)
    out = np.full(order, np.nan)
    out[0] = s1 / n + shift
    if order >= 2:
        out[1] = (n * s2 - s1 * s1) / (n * (n - 1.0))
    if order >= 3:
        out[2] = (2.0 * s1**3 - 3.0 * n * s1 * s2 + n * n * s3) / (n * (n - 1.0) * (n - 2.0))
    if order >= 4:
        num = (-6.0 * s1**4 + 12.0 * n * s1 * s1 * s2 - 3.0 * n * (n - 1.0) * s2 * s2
               - 4.0 * n * (n + 1.0) * s1 * s3 + n * n * (n + 1.0) * s4)
        out[3] = num / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
    return out


@dataclass
class StreamingStats:
    """Single-pass accumulator with batch bookkeeping for standard errors.

    ``batch_size`` closes a batch automatically after that many values;
    otherwise call :meth:`new_batch` (the Monte Carlo driver uses one batch
    per substream).
    """

    shift: float = 0.0
    batch_size: int | None = None
    batches: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return sum(b.count for b in self.batches)

    def new_batch(self) -> PowerSums:
        b = PowerSums(self.shift)
        self.batches.append(b)
        return b

    def _current(self) -> PowerSums:
        if not self.batches:
            return self.new_batch()
        return self.batches[-1]

    def update(self, x) -> "StreamingStats":
        x = np.asarray(x, dtype=np.float64).ravel()
        if self.batch_size is None:
            self._current().update(x)
            return self
        pos = 0
        while pos < x.size:
            cur = self._current()
            if cur.count >= self.batch_size:
                cur = self.new_batch()
            take = min(self.batch_size - cur.count, x.size - pos)
            cur.update(x[pos:pos + take])
            pos += take
        return self

    def total(self) -> PowerSums:
        out = PowerSums(self.shift)
        for b in self.batches:
            out = out.merge(b)
        return out

    def merge(self, other: "StreamingStats") -> "StreamingStats":
        return StreamingStats(self.shift, self.batch_size,
                              [b.recentered(self.shift) for b in self.batches + other.batches])


def accumulate(stats: StreamingStats, x) -> StreamingStats:
    return stats.update(x)


@dataclass(frozen=True)
class KStatistics:
    values: np.ndarray
    stderr: np.ndarray
    count: int
    batches: int

    def as_dict(self):
        return {
            "k": [float(v) for v in self.values],
            "se": [float(v) for v in self.stderr],
            "count": self.count,
            "batches": self.batches,
        }


def k_statistics(stats: StreamingStats, order: int = 4, min_batches: int = 2) -> KStatistics:
    """k-statistics of all data plus batch-means standard errors.

    The standard error of k_i is the spread of the per-batch k_i divided by
    sqrt(number of batches); ``nan`` when fewer than ``min_batches`` batches
    hold enough data.
    """
    total = stats.total()
    vals = total.k_statistics(order)
    usable = [b for b in stats.batches if b.count >= max(order, 2)]
    if len(usable) >= max(2, min_batches):
        per = np.array([b.k_statistics(order) for b in usable])
        se = per.std(axis=0, ddof=1) / math.sqrt(len(usable))
    else:
        se = np.full(order, np.nan)
    return KStatistics(values=vals, stderr=se, count=total.count, batches=len(usable))


# ---------------------------------------------------------------- driver


class EntropyAccumulator:
    """Per-stream sink for S and T plus the r-S cross moment."""

    def __init__(self, shift_s: float = 0.0, shift_t: float = 0.0):
        self.S = PowerSums(shift_s)
        self.T = PowerSums(shift_t)
        self.r = PowerSums(0.0)
        self.rs = 0.0
        self.max_normalization_error = 0.0

    def consume(self, theta, S, T, r):
        self.S.update(S)
        self.T.update(T)
        self.r.update(r)
        self.rs += float(np.dot(r, S))
        err = np.max(np.abs(theta.sum(axis=1) / r - 1.0)) if len(r) else 0.0
        self.max_normalization_error = max(self.max_normalization_error, float(err))


@dataclass
class MCResult:
    dims: SystemDims
    samples: int
    rng: RngConfig
    S: StreamingStats
    T: StreamingStats
    sinks: list
    failures: int
    backend: str
    extra: list = field(default_factory=list)

    def cumulants(self) -> KStatistics:
        return k_statistics(self.S)

    def induced(self) -> KStatistics:
        return k_statistics(self.T)

    def r_s_correlation(self) -> tuple[float, float]:
        """Pearson correlation of r and S with its batch-means standard error."""
        def corr(sinks):
            n = sum(s.r.count for s in sinks)
            sr = sum(s.r.totals[0] for s in sinks)
            srr = sum(s.r.totals[1] for s in sinks)
            ss = sum(s.S.recentered(0.0).totals[0] for s in sinks)
            sss = sum(s.S.recentered(0.0).totals[1] for s in sinks)
            srs = sum(s.rs for s in sinks)
            cov = srs / n - (sr / n) * (ss / n)
            return cov / math.sqrt((srr / n - (sr / n) ** 2) * (sss / n - (ss / n) ** 2))

        rho = corr(self.sinks)
        per = np.array([corr([s]) for s in self.sinks])
        se = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else float("nan")
        return float(rho), se


def _run_stream(dims, gen, count, chunk, backend, sink):
    failures = 0
    done = 0
    while done < count:
        c = min(chunk, count - done)
        x = complex_gaussian(gen, (c, dims.m, dims.n))
        theta, S, T, r, f = _kernels.entropy_batch(x, backend=backend)
        failures += f
        sink.consume(theta, S, T, r)
        done += c
    return failures


def monte_carlo(
    m,
    n=None,
    samples: int = 100_000,
    *,
    seed: int = 0,
    streams: int = 64,
    threads: int | None = None,
    chunk: int = 8192,
    backend: str | None = None,
    sink_factory: Callable[[], object] | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> MCResult:
    """Draw ``samples`` entropies and accumulate k-statistics.

    ``sink_factory`` builds one extra consumer per stream (for instance a
    histogram); each must provide ``consume(theta, S, T, r)``.
    """
    dims = SystemDims.of(m, n)
    if samples < streams:
        raise ValueError("need at least one sample per stream")
    cfg = RngConfig(seed=seed, streams=streams)
    gens = cfg.generators()
    base, extra = divmod(samples, streams)
    counts = [base + (1 if i < extra else 0) for i in range(streams)]
    # pilot shift near the mean keeps the power sums well conditioned
    shift_s = math.log(dims.m) - dims.m / (2.0 * dims.n) if dims.m > 1 else 0.0
    shift_t = 0.0
    try:
        from .cumulants import hs_cumulants, induced_cumulants

        shift_s = hs_cumulants(dims).k1
        shift_t = induced_cumulants(dims)[0]
    except Exception:  # pragma: no cover - shifts are only a conditioning aid
        pass

    class _Tee:
        def __init__(self):
            self.acc = EntropyAccumulator(shift_s, shift_t)
            self.extra = sink_factory() if sink_factory else None

        def consume(self, theta, S, T, r):
            self.acc.consume(theta, S, T, r)
            if self.extra is not None:
                self.extra.consume(theta, S, T, r)

    tees = [_Tee() for _ in range(streams)]
    threads = threads or default_threads()
    finished = [0]

    def job(i):
        f = _run_stream(dims, gens[i], counts[i], chunk, backend, tees[i])
        if progress is not None:
            finished[0] += 1
            progress(finished[0], streams)
        return f

    if threads <= 1:
        fails = [job(i) for i in range(streams)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            fails = list(ex.map(job, range(streams)))
    failures = int(sum(fails))
    if failures:
        raise NumericalFailure("Jacobi eigensolver did not converge", failures=failures,
                               m=dims.m, n=dims.n, seed=seed)
    S = StreamingStats(shift_s, batches=[t.acc.S for t in tees])
    T = StreamingStats(shift_t, batches=[t.acc.T for t in tees])
    return MCResult(dims=dims, samples=samples, rng=cfg, S=S, T=T,
                    sinks=[t.acc for t in tees], failures=failures,
                    backend=backend or _kernels.BACKEND,
                    extra=[t.extra for t in tees] if sink_factory else [])


# ---------------------------------------------------------------- m = 2 oracle


def _entropy2(lam):
    return -(_xlogx_scalar(lam) + _xlogx_scalar(1.0 - lam))


def _xlogx_scalar(v):
    return v * math.log(v) if v > 0 else 0.0


def m2_oracle_cumulants(n: int, *, epsabs: float = 1e-14, epsrel: float = 1e-13) -> CumulantSet:
    """Cumulants of S for m = 2 by one-dimensional adaptive quadrature.

    With m = 2 the fixed-trace density reduces to
    p(lam) proportional to (2 lam - 1)^2 (lam (1 - lam))^(n-2) on [0, 1],
    symmetric about 1/2. Central moments are integrated directly so k4 does
    not suffer from the raw-moment cancellation.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"oracle needs integer n >= 2, got {n}")
    n = int(n)

    def w(lam):
        return (2.0 * lam - 1.0) ** 2 * (lam * (1.0 - lam)) ** (n - 2)

    def quad(f):
        out = integrate.quad(lambda t: w(t) * f(t), 0.0, 0.5, epsabs=epsabs,
                             epsrel=epsrel, limit=200, full_output=1)
        if len(out) > 3 and out[1] > 1e-10:
            raise NumericalFailure("quadrature did not converge", n=n, detail=str(out[3]))
        return out[0], out[1]

    z, _ = quad(lambda t: 1.0)
    mean, _ = quad(_entropy2)
    mean /= z
    mu = [quad(lambda t, k=k: (_entropy2(t) - mean) ** k)[0] / z for k in (2, 3, 4)]
    return CumulantSet(mean, mu[0], mu[1], mu[2] - 3.0 * mu[0] ** 2)


def m2_oracle_normalization(n: int) -> float:
    """Integral of the normalized m = 2 density (should be 1)."""
    f = lambda t: (2.0 * t - 1.0) ** 2 * (t * (1.0 - t)) ** (n - 2)
    z = 2.0 * integrate.quad(f, 0.0, 0.5, epsabs=0.0, epsrel=1e-13)[0]
    # exact normalizer: int (2t-1)^2 (t(1-t))^(n-2) = B(n-1,n-1) - 4 B(n,n)
    exact = math.exp(2 * math.lgamma(n - 1) - math.lgamma(2 * n - 2)) - 4.0 * math.exp(
        2 * math.lgamma(n) - math.lgamma(2 * n))
    return z / exact
