"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The package's inner loops (GP cross-covariances inside the likelihood
optimizer, the Williams-Otto steady-state Newton solve, the photobioreactor
RK4 trajectory) are compiled with ``numba.njit`` when numba is importable.
Setting ``MADAPT_DISABLE_NUMBA=1`` forces the pure-numpy path; the two paths
are interchangeable and ``benchmarks/bench_accel.py`` times them against each
other.

Modules that define their own hot loops import :func:`njit` and
``NUMBA_ENABLED`` from here so the whole package honours the same switch.
"""

from __future__ import annotations

import os

import numpy as np

_SQRT3 = np.sqrt(3.0)

KIND_SE = 0
KIND_MATERN32 = 1


def _env_disabled() -> bool:
    return os.environ.get("MADAPT_DISABLE_NUMBA", "").strip().lower() in {
        "1", "true", "yes", "on",
    }


NUMBA_ENABLED = False
if not _env_disabled():
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit when the fast path is off."""
        if args and callable(args[0]):
            return args[0]

        def decorate(fn):
            return fn

        return decorate


# ---------------------------------------------------------------------------
# GP kernel matrices
# ---------------------------------------------------------------------------

def _kernel_cross_loops(X1, X2, lengthscales, magnitude2, kind, out):
    n1 = X1.shape[0]
    n2 = X2.shape[0]
    d = X1.shape[1]
    for i in range(n1):
        for j in range(n2):
            r2 = 0.0
            for k in range(d):
                t = (X1[i, k] - X2[j, k]) / lengthscales[k]
                r2 += t * t
            if kind == KIND_SE:
                out[i, j] = magnitude2 * np.exp(-0.5 * r2)
            else:
                r = np.sqrt(r2)
                out[i, j] = magnitude2 * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    return out


def _kernel_cross_numpy(X1, X2, lengthscales, magnitude2, kind, out):
    diff = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    if kind == KIND_SE:
        out[:] = magnitude2 * np.exp(-0.5 * r2)
    else:
        r = np.sqrt(r2)
        out[:] = magnitude2 * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    return out


def _kernel_grad_point_loops(X, u, lengthscales, magnitude2, kind, out):
    # out[i, :] = d k(u, X_i) / d u
    n = X.shape[0]
    d = X.shape[1]
    for i in range(n):
        r2 = 0.0
        for k in range(d):
            t = (u[k] - X[i, k]) / lengthscales[k]
            r2 += t * t
        if kind == KIND_SE:
            kval = magnitude2 * np.exp(-0.5 * r2)
            for k in range(d):
                out[i, k] = -kval * (u[k] - X[i, k]) / (lengthscales[k] ** 2)
        else:
            r = np.sqrt(r2)
            c = -3.0 * magnitude2 * np.exp(-_SQRT3 * r)
            for k in range(d):
                out[i, k] = c * (u[k] - X[i, k]) / (lengthscales[k] ** 2)
    return out


def _kernel_grad_point_numpy(X, u, lengthscales, magnitude2, kind, out):
    diff = (u[None, :] - X) / lengthscales
    r2 = np.einsum("ij,ij->i", diff, diff)
    scaled = (u[None, :] - X) / lengthscales**2
    if kind == KIND_SE:
        kval = magnitude2 * np.exp(-0.5 * r2)
        out[:] = -kval[:, None] * scaled
    else:
        r = np.sqrt(r2)
        out[:] = (-3.0 * magnitude2 * np.exp(-_SQRT3 * r))[:, None] * scaled
    return out


kernel_cross_jit = njit(cache=True)(_kernel_cross_loops) if NUMBA_ENABLED else None
kernel_grad_point_jit = (
    njit(cache=True)(_kernel_grad_point_loops) if NUMBA_ENABLED else None
)


def kernel_cross(X1, X2, lengthscales, magnitude2, kind):
    """Cross-covariance matrix K[i, j] = k(X1_i, X2_j)."""
    out = np.empty((X1.shape[0], X2.shape[0]))
    if NUMBA_ENABLED:
        return kernel_cross_jit(X1, X2, lengthscales, magnitude2, kind, out)
    return _kernel_cross_numpy(X1, X2, lengthscales, magnitude2, kind, out)


def kernel_grad_point(X, u, lengthscales, magnitude2, kind):
    """Stacked gradients d k(u, X_i)/du, one row per training point."""
    out = np.empty((X.shape[0], X.shape[1]))
    if NUMBA_ENABLED:
        return kernel_grad_point_jit(X, u, lengthscales, magnitude2, kind, out)
    return _kernel_grad_point_numpy(X, u, lengthscales, magnitude2, kind, out)
