"""Truncated Laurent series in a small parameter eps.

Used to take eps -> 0 limits of products like Gamma(-l + eps) * psi_j(-l + eps)
that appear when the master integral formula is evaluated at integer q.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .specfun import polygamma


class Laurent:
    """sum_{i} coef[i] * eps**(val + i), exact for orders below ``hi``."""

    __slots__ = ("val", "coef", "hi")

    def __init__(self, coef, val: int = 0, hi: int | None = None):
        coef = np.asarray(coef, dtype=np.float64)
        self.val = int(val)
        self.hi = int(hi) if hi is not None else self.val + len(coef)
        keep = max(0, self.hi - self.val)
        self.coef = coef[:keep].copy()
        if len(self.coef) < keep:
            self.coef = np.concatenate([self.coef, np.zeros(keep - len(self.coef))])

    @classmethod
    def const(cls, c: float, hi: int) -> "Laurent":
        return cls([c], 0, hi)

    def coeff(self, order: int) -> float:
        if order >= self.hi:
            raise ArithmeticError(f"eps^{order} coefficient not resolved (series known below {self.hi})")
        i = order - self.val
        if i < 0:
            return 0.0
        return float(self.coef[i])

    def pole_order(self, tol: float = 0.0) -> int:
        for i, c in enumerate(self.coef):
            if abs(c) > tol:
                return max(0, -(self.val + i))
        return 0

    def _lift(self, other):
        if isinstance(other, Laurent):
            return other
        return Laurent([float(other)], 0, max(self.hi, 1))

    def __add__(self, other):
        o = self._lift(other)
        if not isinstance(other, Laurent):
            o.hi = max(self.hi, 1)  # constants are exact to every order
        val = min(self.val, o.val)
        hi = min(self.hi, o.hi)
        out = np.zeros(max(0, hi - val))
        for s in (self, o):
            for i, c in enumerate(s.coef):
                k = s.val + i - val
                if 0 <= k < len(out):
                    out[k] += c
        return Laurent(out, val, hi)

    __radd__ = __add__

    def __neg__(self):
        return Laurent(-self.coef, self.val, self.hi)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Laurent):
            return Laurent(self.coef * float(other), self.val, self.hi)
        val = self.val + other.val
        hi = min(self.val + other.hi, other.val + self.hi)
        n = max(0, hi - val)
        out = np.convolve(self.coef, other.coef)[:n] if len(self.coef) and len(other.coef) else np.zeros(0)
        return Laurent(out, val, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Laurent):
            return self * other.reciprocal()
        return Laurent(self.coef / float(other), self.val, self.hi)

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, k):
        if not (isinstance(k, int) and k >= 0):
            raise ValueError("only non-negative integer powers")
        if k == 0:
            return Laurent([1.0], 0, max(self.hi, 1))
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    def reciprocal(self) -> "Laurent":
        # strip leading zeros so the series starts with a nonzero term
        nz = np.flatnonzero(self.coef)
        if nz.size == 0:
            raise ZeroDivisionError("series is zero to the known order")
        lead = int(nz[0])
        a = self.coef[lead:]
        v = self.val + lead
        n = self.hi - v  # number of known terms
        b = np.zeros(n)
        b[0] = 1.0 / a[0]
        for k in range(1, n):
            s = 0.0
            for j in range(1, min(k, len(a) - 1) + 1):
                s += a[j] * b[k - j]
            b[k] = -s / a[0]
        return Laurent(b, -v, -v + n)

    def exp(self) -> "Laurent":
        """exp of a series with no pole and zero constant term."""
        if self.val < 0 and np.any(self.coef[: -self.val] != 0):
            raise ValueError("exp of a series with a pole")
        if self.coeff(0) != 0.0:
            raise ValueError("exp expects a zero constant term; factor it out")
        hi = self.hi
        a = np.array([self.coeff(k) if k >= self.val else 0.0 for k in range(hi)])
        # b' = a' b  ->  k b_k = sum_j j a_j b_{k-j}
        b = np.zeros(hi)
        b[0] = 1.0
        for k in range(1, hi):
            b[k] = sum(j * a[j] * b[k - j] for j in range(1, k + 1)) / k
        return Laurent(b, 0, hi)

    def __repr__(self):
        terms = ", ".join(f"{c:.6g}e^{self.val + i}" for i, c in enumerate(self.coef))
        return f"Laurent([{terms}] + O(e^{self.hi}))"


# Series are never modified in place, so the constructors below can share
# cached results; the master integral asks for the same expansions repeatedly.


def _is_pole(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


@lru_cache(maxsize=4096)
def psi_series(order: int, x: float, hi: int) -> Laurent:
    """psi_order(x + eps) to O(eps^hi), including the poles at x = 0, -1, -2, ..."""
    if not _is_pole(x):
        coef = [polygamma(order + i, x) / math.factorial(i) for i in range(hi)]
        return Laurent(coef, 0, hi)
    l = int(-x)
    # psi_j(-l + eps) = psi_j(1 + eps) - (-1)^j j! sum_{i=0}^{l} (eps - (l - i))^-(j+1)
    sign = -1.0 if order % 2 else 1.0
    jf = math.factorial(order)
    reg = psi_series(order, 1.0, hi)
    pole = Laurent([1.0], -(order + 1), hi)
    acc = pole
    for a in range(1, l + 1):
        # (eps - a)^-(j+1) = (-a)^-(j+1) sum_r C(j+r, r) (eps/a)^r
        base = (-float(a)) ** (-(order + 1))
        coef = [base * math.comb(order + r, r) / a**r for r in range(hi)]
        acc = acc + Laurent(coef, 0, hi)
    return reg - acc * (sign * jf)


@lru_cache(maxsize=4096)
def gamma_series(x: float, hi: int) -> Laurent:
    """Gamma(x + eps) to O(eps^hi)."""
    if not _is_pole(x):
        logs = Laurent([0.0] + [polygamma(j - 1, x) / math.factorial(j) for j in range(1, hi + 1)], 0, hi + 1)
        return logs.exp() * math.gamma(x)
    l = int(-x)
    # Gamma(-l + eps) = Gamma(1 + eps) / (eps (eps - 1) ... (eps - l))
    den = Laurent([1.0], 1, hi + l + 2)
    for j in range(1, l + 1):
        den = den * Laurent([-float(j), 1.0], 0, hi + l + 2)
    num = gamma_series(1.0, hi + l + 2)
    out = num * den.reciprocal()
    return Laurent(out.coef, out.val, min(out.hi, hi))


@lru_cache(maxsize=4096)
def rgamma_series(x: float, hi: int) -> Laurent:
    """1/Gamma(x + eps) to O(eps^hi); entire, vanishes at the poles of Gamma."""
    if not _is_pole(x):
        return gamma_series(x, hi).reciprocal()
    l = int(-x)
    poly = Laurent([1.0], 1, hi + 1)
    for j in range(1, l + 1):
        poly = poly * Laurent([-float(j), 1.0], 0, hi + 1)
    out = poly * gamma_series(1.0, hi + 1).reciprocal()
    return Laurent(out.coef, out.val, min(out.hi, hi))
