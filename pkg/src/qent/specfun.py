"""Polygamma functions, constants, factorial helpers and Hermite polynomials.

The finite-sum form (constant at 1 plus a correctly rounded ``math.fsum`` of
reciprocal powers) is used where it does not cancel: psi_0 below
``_ASYMPTOTIC_FROM`` and every order at arguments 1 and 2.
Everything else goes through upward recurrence into the Bernoulli asymptotic
series, which stays accurate where the finite-sum form of psi_1..psi_3 would
cancel (psi_1(10**6) is about 1e-6, the finite sum subtracts two numbers of
size 1.6).
"""
from __future__ import annotations

import math
import threading
from fractions import Fraction

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "ZETA3",
    "PSI_AT_ONE",
    "PolyGammaTable",
    "polygamma",
    "polygamma_int",
    "hermite_he",
    "log_factorial",
    "pochhammer",
    "complete_bell",
]

EULER_GAMMA = 0.57721566490153286061
ZETA2 = 1.6449340668482264365  # pi^2/6
ZETA3 = 1.2020569031595942854
ZETA4 = 1.0823232337111381915  # pi^4/90

# psi_j(1) for j = 0..3
PSI_AT_ONE = (-EULER_GAMMA, ZETA2, -2.0 * ZETA3, 6.0 * ZETA4)

_ASYMPTOTIC_FROM = 12

# B_2, B_4, ..., B_24
_BERNOULLI_EVEN = tuple(
    float(Fraction(p, q))
    for p, q in [
        (1, 6), (-1, 30), (1, 42), (-1, 30), (5, 66), (-691, 2730),
        (7, 6), (-3617, 510), (43867, 798), (-174611, 330),
        (854513, 138), (-236364091, 2730),
    ]
)


def _check_order(order: int) -> int:
    order = int(order)
    if order < 0:
        raise ValueError(f"polygamma order must be non-negative, got {order}")
    return order


def _asymptotic(order: int, x: np.ndarray) -> np.ndarray:
    # valid for x >= _ASYMPTOTIC_FROM + 2*order; truncation error below 1 ulp there
    inv = 1.0 / x
    if order == 0:
        out = np.log(x) - 0.5 * inv
        inv2 = inv * inv
        p = inv2.copy()
        for j, b in enumerate(_BERNOULLI_EVEN, start=1):
            out -= b / (2 * j) * p
            p *= inv2
        return out
    k = order
    head = math.factorial(k - 1) * inv**k + 0.5 * math.factorial(k) * inv ** (k + 1)
    tail = np.zeros_like(x)
    inv2 = inv * inv
    p = inv ** (k + 2)
    for j, b in enumerate(_BERNOULLI_EVEN, start=1):
        c = b * math.factorial(2 * j + k - 1) / math.factorial(2 * j)
        term = c * p
        tail += term
        p *= inv2
    sign = -1.0 if k % 2 == 0 else 1.0
    return sign * (head + tail)


def polygamma(order: int, x):
    """Polygamma function psi_order(x) for real x off the poles.

    Parameters
    ----------
    order : int
        Non-negative derivative order; ``order = 0`` is the digamma function.
    x : float or array_like
        Real argument(s). Non-positive integers give ``nan``.

    Returns
    -------
    float or ndarray
    """
    order = _check_order(order)
    xa = np.asarray(x, dtype=np.float64)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.full(xa.shape, np.nan)
    pole = (xa <= 0) & (xa == np.floor(xa))
    ok = ~pole & np.isfinite(xa)
    xv = xa[ok]
    start = _ASYMPTOTIC_FROM + 2 * order  # high orders need a larger argument
    shift = np.maximum(0, np.ceil(start - xv)).astype(np.int64)
    acc = np.zeros_like(xv)
    if shift.size and shift.max() > 0:
        # smallest corrections first
        for i in range(int(shift.max()) - 1, -1, -1):
            live = shift > i
            acc[live] += 1.0 / (xv[live] + i) ** (order + 1)
    val = _asymptotic(order, xv + shift)
    sign = -1.0 if order % 2 == 0 else 1.0
    val = val + sign * math.factorial(order) * acc
    out[ok] = val
    out[np.isposinf(xa)] = np.inf if order == 0 else 0.0
    return float(out[0]) if scalar else out


def _finite_sum_int(order: int, l: int) -> float:
    s = math.fsum(1.0 / k ** (order + 1) for k in range(1, l))
    if order == 0:
        return math.fsum((-EULER_GAMMA, s))
    sign = 1.0 if order % 2 == 0 else -1.0
    return math.fsum((PSI_AT_ONE[order], sign * math.factorial(order) * s))


def _finite_sum_limit(order: int) -> int:
    return _ASYMPTOTIC_FROM if order == 0 else 3


def polygamma_int(order: int, arg: int) -> float:
    """psi_order(arg) at a positive integer.

    Small arguments use the finite-sum form; larger ones the asymptotic path
    (see module docstring).
    """
    order = _check_order(order)
    if order > 3:
        raise ValueError(f"polygamma_int covers orders 0..3, got {order}")
    if int(arg) != arg:
        raise ValueError(f"polygamma_int needs an integer argument, got {arg!r}")
    arg = int(arg)
    if arg < 1:
        raise ValueError(f"polygamma_int needs arg >= 1, got {arg}")
    if arg < _finite_sum_limit(order):
        return _finite_sum_int(order, arg)
    return float(polygamma(order, float(arg)))


class PolyGammaTable:
    """Lazily grown cache of psi_j(l), j = 0..3, l = 1..max_arg."""

    def __init__(self, max_arg: int = 64):
        self._lock = threading.Lock()
        self.max_arg = 0
        self.values = np.empty((4, 1))
        self._grow(max_arg)

    def _grow(self, max_arg: int) -> None:
        with self._lock:
            if max_arg <= self.max_arg:
                return
            size = max(max_arg, 2 * self.max_arg)
            vals = np.empty((4, size + 1))
            vals[:, 0] = np.nan
            args = np.arange(1, size + 1, dtype=np.float64)
            for j in range(4):
                vals[j, 1:] = polygamma(j, args)
                small = min(size, _finite_sum_limit(j) - 1)
                for l in range(1, small + 1):
                    vals[j, l] = _finite_sum_int(j, l)
            self.values = vals
            self.max_arg = size

    def __call__(self, order: int, arg):
        a = np.asarray(arg)
        if np.any(a < 1):
            raise ValueError("PolyGammaTable holds positive integer arguments only")
        top = int(np.max(a))
        if top > self.max_arg:
            self._grow(top)
        res = self.values[order, a.astype(np.int64)]
        return float(res) if np.ndim(res) == 0 else res


def hermite_he(degree: int, x):
    """Probabilist's Hermite polynomial He_3 or He_4."""
    x = np.asarray(x, dtype=np.float64) if not np.isscalar(x) else float(x)
    if degree == 3:
        return x * (x * x - 3.0)
    if degree == 4:
        x2 = x * x
        return x2 * (x2 - 6.0) + 3.0
    raise ValueError(f"unsupported Hermite degree {degree}; only 3 and 4 are used")


def log_factorial(n: int) -> float:
    """ln(n!) for a non-negative integer n."""
    if int(n) != n:
        raise ValueError(f"log_factorial needs an integer, got {n!r}")
    n = int(n)
    if n < 0:
        raise ValueError(f"log_factorial needs n >= 0, got {n}")
    if n < 2:
        return 0.0
    if n <= 1000:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def pochhammer(a, k: int):
    """Rising factorial (a)_k; works for ints, floats and mpmath numbers."""
    out = 1
    for i in range(k):
        out = out * (a + i)
    return out


def complete_bell(order: int, y):
    """Complete Bell polynomial B_order(y[0], y[1], ...).

    With ``y[j] = psi_j(a)`` this gives d^l Gamma(a)/da^l / Gamma(a).
    Works on any ring supporting ``+`` and ``*`` (floats, mpmath, series).
    """
    if order > len(y):
        raise ValueError("not enough arguments for the requested Bell order")
    b = [1]
    for n in range(order):
        acc = 0
        for k in range(n + 1):
            acc = acc + math.comb(n, k) * y[k] * b[n - k]
        b.append(acc)
    return b[order]
