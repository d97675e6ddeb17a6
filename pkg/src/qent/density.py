"""Standardized entropy, Gram-Charlier densities and empirical tail comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cumulants import K2_FLOOR, CumulantSet, DegenerateDistributionError
from .specfun import hermite_he

__all__ = [
    "ORDERS",
    "DEFAULT_EDGES",
    "standardize",
    "gram_charlier_pdf",
    "DensityApprox",
    "Histogram",
    "HistogramSink",
    "empirical_histogram",
    "bin_average",
    "tail_compare",
]

ORDERS = ("gaussian", "k3", "k4")
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# The upper end of the support, (ln m - k1)/sqrt(k2), is about 4 at m = n = 4
# and 8 at m = n = 8, so a window ending at 2 would clip the right tail.
DEFAULT_EDGES = np.round(np.arange(-8.0, 8.0 + 1e-9, 0.05), 10)


def _check_k2(k: CumulantSet) -> None:
    if not k.k2 > K2_FLOOR:
        raise DegenerateDistributionError(f"k2 = {k.k2} is not above {K2_FLOOR}; the distribution is degenerate")


def standardize(S, k: CumulantSet):
    """X = (S - k1)/sqrt(k2)."""
    _check_k2(k)
    return (np.asarray(S, dtype=np.float64) - k.k1) / math.sqrt(k.k2) if np.ndim(S) else \
        (float(S) - k.k1) / math.sqrt(k.k2)


def gram_charlier_pdf(x, k: CumulantSet, order: str = "k4"):
    """Gaussian density with Hermite corrections in the third and fourth cumulants.

    The corrected forms can go negative far in the tails; values are returned as-is.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {order!r}")
    _check_k2(k)
    xa = np.asarray(x, dtype=np.float64)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * xa * xa)
    corr = 1.0
    if order in ("k3", "k4"):
        corr = corr + k.k3 / (6.0 * k.k2**1.5) * hermite_he(3, xa)
    if order == "k4":
        corr = corr + k.k4 / (24.0 * k.k2**2) * hermite_he(4, xa)
    out = phi * corr
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DensityApprox:
    order: str
    cumulants: CumulantSet

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        _check_k2(self.cumulants)

    def pdf(self, x):
        return gram_charlier_pdf(x, self.cumulants, self.order)

    __call__ = pdf


@dataclass
class Histogram:
    """Fixed-edge counts; draws outside the edges are tallied separately."""

    edges: np.ndarray
    counts: np.ndarray = None
    outside: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        if self.edges.ndim != 1 or len(self.edges) < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if self.counts is None:
            self.counts = np.zeros(len(self.edges) - 1, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def update(self, x) -> "Histogram":
        x = np.asarray(x, dtype=np.float64).ravel()
        c, _ = np.histogram(x, bins=self.edges)
        self.counts += c
        self.outside += int(x.size - c.sum())
        return self

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return Histogram(self.edges.copy(), self.counts + other.counts, self.outside + other.outside)

    def density(self) -> np.ndarray:
        """Per-bin density normalized by every draw seen, including those outside."""
        n = self.total + self.outside
        if n == 0:
            return np.zeros_like(self.widths)
        return self.counts / (n * self.widths)


class HistogramSink:
    """Monte Carlo sink: standardizes S with exact cumulants and bins it."""

    def __init__(self, k: CumulantSet, edges=DEFAULT_EDGES):
        _check_k2(k)
        self.k1 = k.k1
        self.scale = 1.0 / math.sqrt(k.k2)
        self.hist = Histogram(edges)

    def consume(self, theta, S, T, r):
        self.hist.update((np.asarray(S) - self.k1) * self.scale)


def empirical_histogram(samples, edges=DEFAULT_EDGES) -> Histogram:
    """Histogram of standardized draws; ``samples`` may be an array or an iterable of chunks."""
    h = Histogram(edges)
    if isinstance(samples, np.ndarray):
        return h.update(samples)
    for chunk in samples:
        h.update(chunk)
    return h


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def bin_average(pdf, edges) -> np.ndarray:
    """Mean of pdf over each bin by 6-point Gauss-Legendre."""
    edges = np.asarray(edges, dtype=np.float64)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    return 0.5 * (np.asarray(pdf(pts)) * _GL_W[None, :]).sum(axis=1)


def tail_compare(hist: Histogram, approx_a, approx_b, cut: float = 2.5):
    """L1 distances sum |empirical - approx| * width over bins with |center| > cut."""
    emp = hist.density()
    mask = np.abs(hist.centers) > cut
    w = hist.widths[mask]

    def dist(approx):
        pdf = approx.pdf if hasattr(approx, "pdf") else approx
        model = bin_average(pdf, hist.edges)[mask]
        return float(np.sum(np.abs(emp[mask] - model) * w))

    return dist(approx_a), dist(approx_b)
