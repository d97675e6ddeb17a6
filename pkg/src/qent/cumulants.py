"""Closed-form cumulants of the entanglement entropy S and the induced entropy T.

All rational coefficients are formed exactly with :class:`fractions.Fraction`
and rounded once. The formulas are written against a small number context so
the same code runs in double precision or in mpmath; the k4 bridge between T
and S cancels roughly ten digits at m = n = 10 and is therefore evaluated in
extended precision by default.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
import math

import mpmath

from .specfun import complete_bell, pochhammer, polygamma_int

__all__ = [
    "SystemDims",
    "CumulantSet",
    "CoefficientSet",
    "MomentSet",
    "DegenerateDistributionError",
    "hs_coefficients",
    "hs_cumulants",
    "induced_cumulants",
    "r_log_moments",
    "kappa4_via_relation",
    "moments_from_cumulants",
    "cumulants_from_moments",
    "kurtosis",
    "skewness",
]

MP_DPS = 40
# Below this k2 is indistinguishable from the roundoff left when the m = 1
# formulas cancel (about 1e-17); real systems stay far above it.
K2_FLOOR = 1e-14


class DegenerateDistributionError(ValueError):
    """Raised when a standardized quantity needs k2 > 0 but k2 is zero to roundoff (m = 1)."""


@dataclass(frozen=True)
class SystemDims:
    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n:
            raise ValueError(f"dimensions must be integers, got ({self.m}, {self.n})")
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")

    @classmethod
    def of(cls, m, n=None) -> "SystemDims":
        if isinstance(m, SystemDims):
            return m
        return cls(int(m), int(n))


@dataclass(frozen=True)
class CumulantSet:
    k1: float
    k2: float
    k3: float
    k4: float

    def as_tuple(self):
        return (self.k1, self.k2, self.k3, self.k4)

    def as_dict(self):
        return asdict(self)

    @property
    def skewness(self) -> float:
        if not self.k2 > K2_FLOOR:
            raise DegenerateDistributionError(f"k2 = {self.k2} is not above {K2_FLOOR}")
        return self.k3 / self.k2**1.5

    @property
    def kurtosis(self) -> float:
        if not self.k2 > K2_FLOOR:
            raise DegenerateDistributionError(f"k2 = {self.k2} is not above {K2_FLOOR}")
        return self.k4 / self.k2**2


@dataclass(frozen=True)
class MomentSet:
    m1: float
    m2: float
    m3: float
    m4: float

    def as_tuple(self):
        return (self.m1, self.m2, self.m3, self.m4)


@dataclass(frozen=True)
class CoefficientSet:
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    b3: float
    c1: float
    c2: float
    c3: float
    c4: float
    d1: float
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- contexts


class _FloatCtx:
    @staticmethod
    def num(x):
        return float(x)

    @staticmethod
    def psi(order, arg):
        return polygamma_int(order, arg)


class _MpCtx:
    def __init__(self, dps):
        self.dps = dps

    @staticmethod
    def num(x):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)

    @staticmethod
    def psi(order, arg):
        return mpmath.psi(order, arg)


def _ctx(precise):
    return _MpCtx(MP_DPS) if precise else _FloatCtx()


# ---------------------------------------------------------- coefficients


@lru_cache(maxsize=4096)
def _coefficient_fractions(m: int, n: int) -> dict:
    F = Fraction
    N = m * n
    a = {
        "a1": F(1),
        "a2": F(-1),
        "a3": -F(m + 1, 2 * n),
    }
    b = {
        "b1": F(-1),
        "b2": F(m + n, N + 1),
        "b3": -F((m + 1) * (m + 2 * n + 1), 4 * n**2 * (N + 1)),
    }
    c4_poly = (3 * m**2 * n**2 + 2 * m**3 * n + 4 * m**2 * n + 2 * m**2 + 4 * m * n**3
               + 3 * m * n**2 + 8 * m * n + 4 * m + 10 * n**2 + 6 * n + 2)
    c = {
        "c1": F(1),
        "c2": -F(m**2 + 3 * N + n**2 + 1, (N + 1) * (N + 2)),
        "c3": F((m**2 - 1) * (N - 3 * n**2 + 1), n * (N + 1) ** 2 * (N + 2)),
        "c4": -F((m + 1) * c4_poly, 4 * n**3 * (N + 1) ** 2 * (N + 2)),
    }
    d3_poly = (6 * m**2 * n**3 - 3 * m**3 * n**2 - 9 * m**2 * n + 12 * m * n**4
               + 6 * m * n**2 - 6 * m + 20 * n**3 - 8 * n)
    d5_poly = (3 * m**4 * n**3 - 9 * m**3 * n**4 + 15 * m**3 * n**2 - 6 * m**2 * n**4
               - 21 * m**2 * n**3 + 6 * m**2 * n**2 + 24 * m**2 * n - 36 * m * n**4
               - 18 * m * n**3 - 4 * m * n**2 + 18 * m * n + 12 * m
               - 60 * n**3 - 12 * n**2 + 8 * n + 12)
    d6_poly = (15 * m**6 * n**3 + 20 * m**5 * n**4 + 45 * m**5 * n**3 + 63 * m**5 * n**2
               + 24 * m**4 * n**5 + 40 * m**4 * n**4 + 185 * m**4 * n**3 + 189 * m**4 * n**2
               + 24 * m**3 * n**6 + 24 * m**3 * n**5 + 200 * m**3 * n**4 + 295 * m**3 * n**3
               + 453 * m**3 * n**2 + 192 * m**2 * n**5 + 180 * m**2 * n**4 + 560 * m**2 * n**3
               + 591 * m**2 * n**2 + 84 * m**4 * n + 252 * m**3 * n + 396 * m**2 * n
               + 36 * m**3 + 108 * m**2 + 520 * m * n**4 + 420 * m * n**3 + 576 * m * n**2
               + 372 * m * n + 108 * m + 448 * n**3 + 312 * n**2 + 144 * n + 36)
    d = {
        "d1": F(-1),
        "d2": F((m + n) * (m**2 + 5 * N + n**2 + 5), (N + 1) * (N + 2) * (N + 3)),
        "d3": F((m - 1) * (m + 1) * d3_poly, n * (N + 1) ** 2 * (N + 2) ** 2 * (N + 3)),
        "d4": F(6 * (m**2 - 1) * (n**2 - 1), (N + 1) ** 2 * (N + 2) * (N + 3)),
        "d5": F((m**2 - 1) * d5_poly, n**2 * (N + 1) ** 3 * (N + 2) ** 2 * (N + 3)),
        "d6": -F((m + 1) * d6_poly, 8 * n**4 * (N + 1) ** 3 * (N + 2) ** 2 * (N + 3)),
    }
    return {**a, **b, **c, **d}


def hs_coefficients(m, n=None) -> CoefficientSet:
    """Rational coefficients a1..d6 of the four entropy cumulants."""
    dims = SystemDims.of(m, n)
    fr = _coefficient_fractions(dims.m, dims.n)
    return CoefficientSet(**{k: float(v) for k, v in fr.items()})


def _hs_terms(m, n, ctx):
    c = {k: ctx.num(v) for k, v in _coefficient_fractions(m, n).items()}
    N = m * n
    p = ctx.psi
    k1 = (c["a1"] * p(0, N + 1) + c["a2"] * p(0, n)) + c["a3"]
    k2 = (c["b1"] * p(1, N + 1) + c["b2"] * p(1, n)) + c["b3"]
    k3 = (c["c1"] * p(2, N + 1) + c["c2"] * p(2, n)) + c["c3"] * p(1, n) + c["c4"]
    psi1n = p(1, n)
    k4 = ((c["d1"] * p(3, N + 1) + c["d2"] * p(3, n)) + c["d3"] * p(2, n)
          + c["d4"] * psi1n * psi1n + c["d5"] * psi1n + c["d6"])
    return k1, k2, k3, k4


def hs_cumulants(m, n=None, *, precise: bool = False) -> CumulantSet:
    """First four cumulants of S under the Hilbert-Schmidt ensemble.

    Parameters
    ----------
    m, n : int or SystemDims
        Subsystem dimensions, ``m <= n``.
    precise : bool
        Evaluate in mpmath and round at the end.
    """
    dims = SystemDims.of(m, n)
    with mpmath.workdps(MP_DPS):
        vals = _hs_terms(dims.m, dims.n, _ctx(precise))
    return CumulantSet(*(float(v) for v in vals))


def _induced_terms(m, n, ctx):
    num = ctx.num
    p0, p1, p2, p3 = (ctx.psi(j, n) for j in range(4))
    N = m * n
    half = num(Fraction(1, 2))
    k1 = N * p0 + half * m * (m + 1)
    k2 = N * (m + n) * p1 + N * p0**2 + m * (m + 2 * n + 1) * p0 + half * m * (m + 1)
    k3 = (N * (m**2 + 3 * N + n**2 + 1) * p2
          + 6 * N * (m + n) * p0 * p1
          + m * (2 * m**2 + 12 * N + 3 * m + 6 * n**2 + 3 * n + 1) * p1
          + 2 * N * p0**3
          + 3 * m * (m + 3 * n + 1) * p0**2
          + 6 * m * (m + n + 1) * p0
          + m * (m + 1))
    k4 = (N * (m + n) * (m**2 + 5 * N + n**2 + 5) * p3
          + 12 * N * (m**2 + 3 * N + n**2 + 1) * p0 * p2
          + (3 * m**3 + 36 * m**2 * n + 6 * m**2 + 54 * m * n**2 + 18 * N + 9 * m
             + 12 * n**3 + 6 * n**2 + 26 * n + 6) * m * p2
          + 6 * N * (2 * m**2 + 5 * N + 2 * n**2 + 1) * p1**2
          + 36 * N * (m + n) * p0**2 * p1
          + 12 * m * (2 * m**2 + 14 * N + 3 * m + 8 * n**2 + 3 * n + 1) * p0 * p1
          + 18 * m * (2 * m**2 + 6 * N + 3 * m + 2 * n**2 + 2 * n + 1) * p1
          + 6 * N * p0**4
          + 4 * m * (3 * m + 11 * n + 3) * p0**3
          + 24 * m * (2 * m + 3 * n + 2) * p0**2
          + 12 * m * (3 * m + 2 * n + 3) * p0
          + 3 * m * (m + 1))
    return k1, k2, k3, k4


def induced_cumulants(m, n=None, *, precise: bool = False):
    """Closed-form cumulants (k1T, k2T, k3T, k4T) of T = sum theta ln theta."""
    dims = SystemDims.of(m, n)
    with mpmath.workdps(MP_DPS):
        return tuple(float(v) for v in _induced_terms(dims.m, dims.n, _ctx(precise)))


def r_log_moments(m, n=None, log_power: int = 0, *, precise: bool = False) -> float:
    """E[r^4 ln^l r] for r ~ Gamma(mn), l = 0..4."""
    dims = SystemDims.of(m, n)
    if not 0 <= log_power <= 4:
        raise ValueError(f"log_power must be in 0..4, got {log_power}")
    ctx = _ctx(precise)
    N = dims.m * dims.n
    with mpmath.workdps(MP_DPS):
        y = [ctx.psi(j, N + 4) for j in range(4)]
        return float(pochhammer(N, 4) * complete_bell(log_power, y))


def _bridge(N, kT, ctx):
    k1, k2, k3, k4 = kT
    F = Fraction

    def q(a, b):
        return ctx.num(F(a, b))

    inner = (k4
             - q(12, N) * k1 * k3
             - q(4 * (3 * N**2 + 12 * N + 11), (N + 1) * (N + 2)) * k3
             - q(6 * (2 * N + 3), N * (N + 1)) * k2**2
             + q(12 * (5 * N + 6), N**2 * (N + 1)) * k1**2 * k2
             + q(24 * (2 * N + 3) * (2 * N + 5), N * (N + 1) * (N + 2)) * k1 * k2
             + q(12 * (N + 3) * (3 * N**2 + 9 * N + 7), (N + 1) ** 2 * (N + 2)) * k2
             - q(6 * (5 * N + 6), N**3 * (N + 1)) * k1**4
             - q(8 * (2 * N + 3) * (5 * N + 12), N**2 * (N + 1) * (N + 2)) * k1**3
             - q(12 * (N + 3) * (2 * N + 3) * (3 * N + 4), N * (N + 1) ** 2 * (N + 2)) * k1**2
             - q(24 * (N + 2) * (N + 3), (N + 1) ** 2) * k1)
    return inner / ctx.num(pochhammer(N, 4)) - ctx.psi(3, N + 1)


def kappa4_via_relation(m, n=None, *, precise: bool = True, kT=None) -> float:
    """k4 of S from the induced-entropy cumulants through the bridge relation.

    ``kT`` may supply externally computed (k1T..k4T); otherwise the closed
    forms are used. The bridge loses about log10((mn)_4) digits to
    cancellation, so the default works in mpmath.
    """
    dims = SystemDims.of(m, n)
    ctx = _ctx(precise)
    with mpmath.workdps(MP_DPS):
        if kT is None:
            kT = _induced_terms(dims.m, dims.n, ctx)
        else:
            kT = tuple(ctx.num(v) for v in kT)
        return float(_bridge(dims.m * dims.n, kT, ctx))


def moments_from_cumulants(k) -> MomentSet:
    k1, k2, k3, k4 = k.as_tuple() if hasattr(k, "as_tuple") else k
    return MomentSet(
        k1,
        k2 + k1**2,
        k3 + 3 * k2 * k1 + k1**3,
        # the printed relation has 3k1^2 here; 3k2^2 is the correct term
        k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4,
    )


def cumulants_from_moments(mom) -> CumulantSet:
    m1, m2, m3, m4 = mom.as_tuple() if hasattr(mom, "as_tuple") else mom
    return CumulantSet(
        m1,
        m2 - m1**2,
        m3 - 3 * m2 * m1 + 2 * m1**3,
        m4 - 4 * m3 * m1 - 3 * m2**2 + 12 * m2 * m1**2 - 6 * m1**4,
    )


def _require_nondegenerate(dims: SystemDims):
    if dims.m < 2:
        raise DegenerateDistributionError(
            f"S is identically 0 for m = 1 (n = {dims.n}); standardized moments undefined"
        )


def kurtosis(m, n=None) -> float:
    """gamma_2 = k4 / k2^2."""
    dims = SystemDims.of(m, n)
    _require_nondegenerate(dims)
    return hs_cumulants(dims).kurtosis


def skewness(m, n=None) -> float:
    """gamma_1 = k3 / k2^(3/2)."""
    dims = SystemDims.of(m, n)
    _require_nondegenerate(dims)
    return hs_cumulants(dims).skewness
