"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The two inner loops that dominate a simulation are (i) the strongly convex
box+l1 quadratic subproblem solved by every agent at every iteration and
(ii) the per-block push-sum mixing.  Both ship as numba ``@njit`` kernels
compiled lazily on first use; setting ``BLOCKSONA_BACKEND=numpy`` selects
the pure-numpy implementations instead (same math, summation order may
differ by rounding).  ``BLOCKSONA_BACKEND=numba`` makes a missing numba an
error; the default ``auto`` falls back silently.

``benchmarks/bench_kernels.py`` compares the two backends.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "fista_box_l1",
    "push_mix_phi",
    "push_mix_mass",
]


def _prox_box_l1(v, thr, lo, hi):
    return np.clip(np.sign(v) * np.maximum(np.abs(v) - thr, 0.0), lo, hi)


def _numpy_fista_box_l1(H, q, l1, lo, hi, w0, lip, mu, tol, max_iter):
    """Minimize 0.5 w'Hw + q'w + l1*||w||_1 over the box [lo, hi].

    Accelerated proximal gradient with the strongly convex momentum
    beta = (sqrt(L)-sqrt(mu)) / (sqrt(L)+sqrt(mu)).  Returns
    ``(w, residual, iterations)`` where ``residual`` is the sup-norm
    fixed-point residual of the proximal-gradient map at ``w``.
    """
    step = 1.0 / lip
    if mu > 0.0:
        sl, sm = math.sqrt(lip), math.sqrt(mu)
        beta = (sl - sm) / (sl + sm)
    else:
        beta = -1.0  # sentinel: use the (k-1)/(k+2) schedule
    thr = step * l1

    w = w0.copy()
    w_prev = w0.copy()
    z = w0.copy()
    for k in range(1, max_iter + 1):
        bk = beta if beta >= 0.0 else (k - 1.0) / (k + 2.0)
        w = _prox_box_l1(z - step * (H @ z + q), thr, lo, hi)
        # cheap trigger first, true residual only when it fires
        if np.max(np.abs(w - w_prev)) <= tol:
            t = _prox_box_l1(w - step * (H @ w + q), thr, lo, hi)
            res = float(np.max(np.abs(w - t)))
            if res <= tol:
                return w, res, k
        z = w + bk * (w - w_prev)
        w_prev = w
    t = _prox_box_l1(w - step * (H @ w + q), thr, lo, hi)
    res = float(np.max(np.abs(w - t)))
    return w, res, max_iter


def _numpy_push_mix_phi(A, sel, phi):
    """Push-sum weight mixing for every block at once.

    ``out[i, l] = sum_{j: sel[j]=l} A[i, j] phi[j, l]`` plus the held
    ``phi[i, l]`` when agent ``i`` did not select ``l``.
    """
    n, B = phi.shape
    mask = sel[:, None] == np.arange(B)[None, :]
    return A @ np.where(mask, phi, 0.0) + np.where(mask, 0.0, phi)


def _numpy_push_mix_mass(A, sel, phi, U, block_dim):
    """Phi-weighted push-sum mass mixing of block vectors ``U`` (n, B*d)."""
    n, B = phi.shape
    mask = np.repeat(sel[:, None] == np.arange(B)[None, :], block_dim, axis=1)
    weighted = np.repeat(phi, block_dim, axis=1) * U
    return A @ np.where(mask, weighted, 0.0) + np.where(mask, 0.0, weighted)


def _kernel_sources():
    # numba compiles these exact bodies; keep them nopython-friendly
    def fista_box_l1(H, q, l1, lo, hi, w0, lip, mu, tol, max_iter):
        d = w0.shape[0]
        step = 1.0 / lip
        if mu > 0.0:
            sl = math.sqrt(lip)
            sm = math.sqrt(mu)
            beta = (sl - sm) / (sl + sm)
        else:
            beta = -1.0  # sentinel: use the (k-1)/(k+2) schedule
        thr = step * l1

        w = w0.copy()
        w_prev = w0.copy()
        z = w0.copy()
        t = np.empty(d)
        res = 1e300
        for k in range(1, max_iter + 1):
            bk = beta if beta >= 0.0 else (k - 1.0) / (k + 2.0)
            delta = 0.0
            for r in range(d):
                g = q[r]
                for c in range(d):
                    g += H[r, c] * z[c]
                v = z[r] - step * g
                a = abs(v) - thr
                if a < 0.0:
                    a = 0.0
                v = a if v > 0.0 else -a
                if v < lo:
                    v = lo
                elif v > hi:
                    v = hi
                dv = abs(v - w_prev[r])
                if dv > delta:
                    delta = dv
                w[r] = v
            if delta <= tol:
                res = 0.0
                for r in range(d):
                    g = q[r]
                    for c in range(d):
                        g += H[r, c] * w[c]
                    v = w[r] - step * g
                    a = abs(v) - thr
                    if a < 0.0:
                        a = 0.0
                    v = a if v > 0.0 else -a
                    if v < lo:
                        v = lo
                    elif v > hi:
                        v = hi
                    t[r] = v
                    dr = abs(w[r] - v)
                    if dr > res:
                        res = dr
                if res <= tol:
                    return w, res, k
            for r in range(d):
                z[r] = w[r] + bk * (w[r] - w_prev[r])
                w_prev[r] = w[r]
        res = 0.0
        for r in range(d):
            g = q[r]
            for c in range(d):
                g += H[r, c] * w[c]
            v = w[r] - step * g
            a = abs(v) - thr
            if a < 0.0:
                a = 0.0
            v = a if v > 0.0 else -a
            if v < lo:
                v = lo
            elif v > hi:
                v = hi
            dr = abs(w[r] - v)
            if dr > res:
                res = dr
        return w, res, max_iter

    def push_mix_phi(A, sel, phi):
        n, B = phi.shape
        out = np.zeros((n, B))
        for j in range(n):
            l = sel[j]
            for i in range(n):
                if A[i, j] != 0.0:
                    out[i, l] += A[i, j] * phi[j, l]
            for lp in range(B):
                if lp != l:
                    out[j, lp] += phi[j, lp]
        return out

    def push_mix_mass(A, sel, phi, U, block_dim):
        n, B = phi.shape
        m = U.shape[1]
        out = np.zeros((n, m))
        for j in range(n):
            l = sel[j]
            base = l * block_dim
            for i in range(n):
                a = A[i, j]
                if a != 0.0:
                    w = a * phi[j, l]
                    for r in range(block_dim):
                        out[i, base + r] += w * U[j, base + r]
            for lp in range(B):
                if lp != l:
                    bp = lp * block_dim
                    for r in range(block_dim):
                        out[j, bp + r] += phi[j, lp] * U[j, bp + r]
        return out

    return fista_box_l1, push_mix_phi, push_mix_mass


def _select_backend():
    choice = os.environ.get("BLOCKSONA_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"BLOCKSONA_BACKEND must be auto, numba or numpy, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy", (_numpy_fista_box_l1, _numpy_push_mix_phi,
                         _numpy_push_mix_mass)
    try:
        from numba import njit
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", (_numpy_fista_box_l1, _numpy_push_mix_phi,
                         _numpy_push_mix_mass)
    jitted = tuple(njit(cache=True)(fn) for fn in _kernel_sources())
    return "numba", jitted


BACKEND, (fista_box_l1, push_mix_phi, push_mix_mass) = _select_backend()
