"""Hot sweep kernels with a numba fast path and a pure-numpy fallback.

The sequential projection sweeps are Gauss-Seidel style (each row projection
sees the updates of the previous rows), so they cannot be vectorized; the
row loop is the hot spot on packed affine systems.  Both backends implement
the same row-by-row arithmetic:

* ``cspm_sweep``: one full cyclic pass of relaxed projections onto the slabs
  ``lo_i <= A_i . x <= hi_i``; returns the largest violation seen.
* ``art3_pass``: one pass of the automatic-relaxation rule over a work queue
  of row indices (reflect when the overshoot is at most the interval width,
  project onto the midline hyperplane when it is larger); returns the indices
  that were violated at their visit.

Backend selection: the ``CFPOPT_BACKEND`` environment variable may be set to
``numba``, ``numpy`` or ``auto`` (default; numba when importable).  Use
``set_backend`` to switch at runtime, e.g. for benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["active_backend", "set_backend", "available_backends", "cspm_sweep", "art3_pass", "warmup"]


def _cspm_sweep_numpy(A, lo, hi, norm2, x, lam, tol):
    maxv = 0.0
    moves = 0
    for i in range(A.shape[0]):
        r = float(A[i] @ x)
        over = r - hi[i]
        under = lo[i] - r
        v = over if over >= under else under
        if v > maxv:
            maxv = v
        if v > tol:
            moves += 1
            coef = lam * v / norm2[i]
            if over >= under:
                x -= coef * A[i]
            else:
                x += coef * A[i]
    return maxv, moves


def _art3_pass_numpy(A, lo, hi, norm2, x, queue, tol):
    kept = np.empty(queue.shape[0], dtype=np.int64)
    nk = 0
    for qi in range(queue.shape[0]):
        i = queue[qi]
        r = float(A[i] @ x)
        if lo[i] - tol <= r <= hi[i] + tol:
            continue
        kept[nk] = i
        nk += 1
        width = hi[i] - lo[i]
        if r > hi[i]:
            viol = r - hi[i]
            if viol <= width:
                x -= (2.0 * viol / norm2[i]) * A[i]  # reflect across upper face
            else:
                x -= ((r - 0.5 * (lo[i] + hi[i])) / norm2[i]) * A[i]  # midline
        else:
            viol = lo[i] - r
            if viol <= width:
                x += (2.0 * viol / norm2[i]) * A[i]
            else:
                x -= ((r - 0.5 * (lo[i] + hi[i])) / norm2[i]) * A[i]
    return kept[:nk].copy()


_IMPLS: dict[str, tuple] = {"numpy": (_cspm_sweep_numpy, _art3_pass_numpy)}

try:
    from numba import njit

    @njit(cache=True)
    def _cspm_sweep_numba(A, lo, hi, norm2, x, lam, tol):  # pragma: no cover - jitted
        m, n = A.shape
        maxv = 0.0
        moves = 0
        for i in range(m):
            r = 0.0
            for j in range(n):
                r += A[i, j] * x[j]
            over = r - hi[i]
            under = lo[i] - r
            v = over if over >= under else under
            if v > maxv:
                maxv = v
            if v > tol:
                moves += 1
                coef = lam * v / norm2[i]
                if over >= under:
                    for j in range(n):
                        x[j] -= coef * A[i, j]
                else:
                    for j in range(n):
                        x[j] += coef * A[i, j]
        return maxv, moves

    @njit(cache=True)
    def _art3_pass_numba(A, lo, hi, norm2, x, queue, tol):  # pragma: no cover - jitted
        n = A.shape[1]
        kept = np.empty(queue.shape[0], dtype=np.int64)
        nk = 0
        for qi in range(queue.shape[0]):
            i = queue[qi]
            r = 0.0
            for j in range(n):
                r += A[i, j] * x[j]
            if lo[i] - tol <= r <= hi[i] + tol:
                continue
            kept[nk] = i
            nk += 1
            width = hi[i] - lo[i]
            if r > hi[i]:
                viol = r - hi[i]
                if viol <= width:
                    coef = 2.0 * viol / norm2[i]
                    for j in range(n):
                        x[j] -= coef * A[i, j]
                else:
                    coef = (r - 0.5 * (lo[i] + hi[i])) / norm2[i]
                    for j in range(n):
                        x[j] -= coef * A[i, j]
            else:
                viol = lo[i] - r
                if viol <= width:
                    coef = 2.0 * viol / norm2[i]
                    for j in range(n):
                        x[j] += coef * A[i, j]
                else:
                    coef = (r - 0.5 * (lo[i] + hi[i])) / norm2[i]
                    for j in range(n):
                        x[j] -= coef * A[i, j]
        return kept[:nk].copy()

    _IMPLS["numba"] = (_cspm_sweep_numba, _art3_pass_numba)
except ImportError:  # pragma: no cover - numba is an install dependency
    pass


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def _initial_backend() -> str:
    want = os.environ.get("CFPOPT_BACKEND", "auto").strip().lower()
    if want in ("", "auto"):
        return "numba" if "numba" in _IMPLS else "numpy"
    if want not in _IMPLS:
        raise RuntimeError(
            f"CFPOPT_BACKEND={want!r} is not available; choices: {available_backends()} or 'auto'"
        )
    return want


_active = _initial_backend()


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    """Switch the sweep kernel backend ('numba' or 'numpy')."""
    global _active
    name = name.strip().lower()
    if name == "auto":
        name = "numba" if "numba" in _IMPLS else "numpy"
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; choices: {available_backends()}")
    _active = name


def cspm_sweep(A, lo, hi, norm2, x, lam, tol):
    return _IMPLS[_active][0](A, lo, hi, norm2, x, lam, tol)


def art3_pass(A, lo, hi, norm2, x, queue, tol):
    return _IMPLS[_active][1](A, lo, hi, norm2, x, queue, tol)


def warmup() -> None:
    """Trigger JIT compilation of the active backend on a tiny system."""
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    lo = np.array([-np.inf, 0.0])
    hi = np.array([1.0, 1.0])
    norm2 = np.array([1.0, 1.0])
    cspm_sweep(A, lo, hi, norm2, np.array([2.0, -1.0]), 1.0, 1e-8)
    art3_pass(A, lo, hi, norm2, np.array([2.0, -1.0]), np.arange(2, dtype=np.int64), 1e-8)
