"""Hot loops for the Monte Carlo path: Wishart formation, complex Jacobi, entropies.

Two interchangeable backends. The numba one compiles the per-matrix loops;
the numpy one runs the same cyclic Jacobi vectorized across a batch of
matrices. Set ``QENT_DISABLE_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 30

_disabled = os.environ.get("QENT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError("numba disabled by QENT_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in CI
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return deco


BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numba path


@njit(cache=True, nogil=True)
def _jacobi_inplace(a, tol, max_sweeps):
    """Cyclic Jacobi on a complex Hermitian matrix; returns sweeps used or -1."""
    m = a.shape[0]
    fro2 = 0.0
    for i in range(m):
        for j in range(m):
            fro2 += a[i, j].real * a[i, j].real + a[i, j].imag * a[i, j].imag
    thresh2 = tol * tol * fro2
    # entries this small cannot keep the off-norm above the threshold on their own
    skip2 = thresh2 / (m * m)
    for sweep in range(max_sweeps + 1):
        off2 = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                off2 += 2.0 * (a[i, j].real * a[i, j].real + a[i, j].imag * a[i, j].imag)
        if off2 <= thresh2:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                g2 = apq.real * apq.real + apq.imag * apq.imag
                if g2 <= skip2:
                    continue
                g = np.sqrt(g2)
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * g)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                e = apq / g
                ec = e.conjugate()
                for r in range(m):
                    if r == p or r == q:
                        continue
                    arp = a[r, p]
                    arq = a[r, q] * ec
                    nrp = c * arp - s * arq
                    nrq = s * arp + c * arq
                    a[r, p] = nrp
                    a[p, r] = nrp.conjugate()
                    a[r, q] = nrq
                    a[q, r] = nrq.conjugate()
                a[p, p] = app - t * g
                a[q, q] = aqq + t * g
                a[p, q] = 0.0
                a[q, p] = 0.0
    return -1


@njit(cache=True, nogil=True)
def _entropy_batch_numba(x, tol, max_sweeps, theta_out, s_out, t_out, r_out):
    count, m, n = x.shape
    w = np.empty((m, m), dtype=np.complex128)
    failures = 0
    for b in range(count):
        for i in range(m):
            for j in range(i, m):
                acc = 0.0 + 0.0j
                for k in range(n):
                    acc += x[b, i, k] * x[b, j, k].conjugate()
                w[i, j] = acc
                w[j, i] = acc.conjugate()
            w[i, i] = w[i, i].real
        if _jacobi_inplace(w, tol, max_sweeps) < 0:
            failures += 1
        r = 0.0
        for i in range(m):
            th = w[i, i].real
            theta_out[b, i] = th
            r += th
        tsum = 0.0
        ssum = 0.0
        for i in range(m):
            th = theta_out[b, i]
            if th > 0.0:
                tsum += th * np.log(th)
                lam = th / r
                ssum -= lam * np.log(lam)
        s_out[b] = ssum
        t_out[b] = tsum
        r_out[b] = r
    return failures


# ---------------------------------------------------------------- numpy path


def _jacobi_batch_numpy(a: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    """Vectorized cyclic Jacobi over a stack of Hermitian matrices (modified in place).

    Returns a boolean array flagging matrices that failed to converge.
    """
    count, m, _ = a.shape
    fro2 = np.einsum("bij,bij->b", a.real, a.real) + np.einsum("bij,bij->b", a.imag, a.imag)
    thresh2 = tol * tol * fro2
    iu = np.triu_indices(m, 1)
    rows = np.arange(m)
    for sweep in range(max_sweeps + 1):
        off = a[:, iu[0], iu[1]]
        off2 = 2.0 * np.sum(off.real**2 + off.imag**2, axis=1)
        live = off2 > thresh2
        if not live.any():
            return live
        if sweep == max_sweeps:
            return live
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[:, p, q]
                g = np.abs(apq)
                act = g > 0.0
                gs = np.where(act, g, 1.0)
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                theta = (aqq - app) / (2.0 * gs)
                with np.errstate(over="ignore"):  # huge theta gives t = 1/inf = 0
                    t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(theta == 0.0, 1.0, t)
                t = np.where(act, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ec = np.where(act, np.conj(apq) / gs, 1.0)
                others = rows[(rows != p) & (rows != q)]
                arp = a[:, others, p]
                arq = a[:, others, q] * ec[:, None]
                nrp = c[:, None] * arp - s[:, None] * arq
                nrq = s[:, None] * arp + c[:, None] * arq
                a[:, others, p] = nrp
                a[:, p, others] = np.conj(nrp)
                a[:, others, q] = nrq
                a[:, q, others] = np.conj(nrq)
                a[:, p, p] = app - t * g
                a[:, q, q] = aqq + t * g
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
    return live  # pragma: no cover


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def _entropy_batch_numpy(x, tol, max_sweeps, theta_out, s_out, t_out, r_out):
    w = np.einsum("bik,bjk->bij", x, np.conj(x))
    idx = np.arange(x.shape[1])
    w[:, idx, idx] = w[:, idx, idx].real
    failed = _jacobi_batch_numpy(w, tol, max_sweeps)
    theta = np.diagonal(w, axis1=1, axis2=2).real
    theta_out[:] = theta
    r = theta.sum(axis=1)
    r_out[:] = r
    t_out[:] = _xlogx(theta).sum(axis=1)
    s_out[:] = -_xlogx(theta / r[:, None]).sum(axis=1)
    return int(failed.sum())


def entropy_batch(x: np.ndarray, backend: str | None = None, tol: float = JACOBI_TOL,
                  max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues, S, T and trace for a stack of m x n complex Gaussian matrices.

    Returns ``(theta, S, T, r, failures)``; theta is unsorted.
    """
    backend = backend or BACKEND
    count, m, _ = x.shape
    theta = np.empty((count, m))
    s = np.empty(count)
    t = np.empty(count)
    r = np.empty(count)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        fails = _entropy_batch_numba(np.ascontiguousarray(x), tol, max_sweeps, theta, s, t, r)
    elif backend == "numpy":
        fails = _entropy_batch_numpy(x, tol, max_sweeps, theta, s, t, r)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return theta, s, t, r, int(fails)


def jacobi_eigenvalues(a: np.ndarray, backend: str | None = None, tol: float = JACOBI_TOL,
                       max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues of one Hermitian matrix; returns (values, converged)."""
    backend = backend or BACKEND
    w = np.array(a, dtype=np.complex128, copy=True)
    if backend == "numba" and HAVE_NUMBA:
        ok = _jacobi_inplace(w, tol, max_sweeps) >= 0
        return np.diagonal(w).real.copy(), ok
    stack = w[None]
    failed = _jacobi_batch_numpy(stack, tol, max_sweeps)
    return np.diagonal(stack[0]).real.copy(), not bool(failed[0])
