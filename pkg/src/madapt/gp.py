"""Gaussian-process regression of scalar mismatch functions.

Constant-mean GPs with squared-exponential or Matern-3/2 kernels, fitted by
multistart maximum likelihood.  Inputs are expected pre-scaled to the unit
box; targets are whatever mismatch the caller observes.  Models are immutable
after fitting and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import minimize
from scipy.stats import qmc

from . import accel
from .errors import ContractViolationError, GPFitError

SQUARED_EXPONENTIAL = "squared_exponential"
MATERN_3_2 = "matern_3_2"
_KIND_CODES = {SQUARED_EXPONENTIAL: accel.KIND_SE, MATERN_3_2: accel.KIND_MATERN32}

# Jitter ladder: base and ceiling, relative to the kernel magnitude.
_JITTER_BASE = 1e-10
_JITTER_MAX = 1e-6

# Log-space hyperparameter box, relative to std(y) for the amplitudes.
_LOG_LENGTHSCALE_BOUNDS = (np.log(1e-2), np.log(10.0))
_LOG_MAGNITUDE_REL_BOUNDS = (np.log(1e-3), np.log(1e3))
_LOG_NOISE_REL_BOUNDS = (np.log(1e-6), np.log(1.0))


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel: kind, magnitude sigma_n, per-dimension lengthscales.

    Lengthscales enter the weighted distance as 1/l_i**2 (inverse-squared
    lengthscale parameterization).
    """

    kind: str
    magnitude: float
    lengthscales: np.ndarray

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ContractViolationError(f"unknown kernel kind {self.kind!r}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if not np.isfinite(self.magnitude) or self.magnitude <= 0:
            raise ContractViolationError("kernel magnitude must be positive")
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ContractViolationError("lengthscales must be positive reals")

    @property
    def n_dim(self) -> int:
        return self.lengthscales.shape[0]


@dataclass(frozen=True)
class GPHyperparameters:
    """Constant mean offset, kernel, and observation-noise std."""

    mean_offset: float
    kernel: KernelSpec
    noise_std: float
    noise_fixed: bool = False

    def __post_init__(self):
        if not np.isfinite(self.mean_offset):
            raise ContractViolationError("mean_offset must be finite")
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise ContractViolationError("noise_std must be a nonnegative real")

    def to_dict(self) -> dict:
        return {
            "mean_offset": float(self.mean_offset),
            "kernel_kind": self.kernel.kind,
            "magnitude": float(self.kernel.magnitude),
            "lengthscales": [float(v) for v in self.kernel.lengthscales],
            "noise_std": float(self.noise_std),
            "noise_fixed": bool(self.noise_fixed),
        }


@dataclass(frozen=True)
class GPModel:
    """Trained GP: hyperparameters, training data and factored kernel matrix."""

    hyper: GPHyperparameters
    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel_factor: np.ndarray  # lower-triangular Cholesky factor of K(U)
    alpha: np.ndarray  # K(U)^-1 (y - 1c)

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def n_dim(self) -> int:
        return self.train_inputs.shape[1]


@dataclass(frozen=True)
class FitOptions:
    """Controls for the multistart maximum-likelihood fit."""

    kernel_kind: str = SQUARED_EXPONENTIAL
    n_starts: int = 10
    seed: int = 0
    noise_fixed: bool = False
    noise_std: float = 0.0  # used only when noise_fixed
    warm_start: Optional[GPHyperparameters] = None
    max_iter: int = 200


def kernel_eval(spec: KernelSpec, u, v) -> float:
    """Covariance between two input points."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape[0] != v.shape[0] or u.shape[0] != spec.n_dim:
        raise ContractViolationError(
            f"kernel_eval dimension mismatch: {u.shape[0]}, {v.shape[0]}, "
            f"{spec.n_dim} lengthscales"
        )
    K = accel.kernel_cross(
        u[None, :], v[None, :], spec.lengthscales, spec.magnitude**2,
        _KIND_CODES[spec.kind],
    )
    return float(K[0, 0])


def _chol_with_jitter(K_noisy, magnitude2):
    """Cholesky with an escalating diagonal jitter.

    Starts at _JITTER_BASE*sigma_n^2 and multiplies by 10 up to
    _JITTER_MAX*sigma_n^2.  Returns (L, jitter_used) or raises LinAlgError
    once the ladder is exhausted.
    """
    jitter = _JITTER_BASE * magnitude2
    last_err = None
    while jitter <= _JITTER_MAX * magnitude2 * (1 + 1e-12):
        try:
            L = linalg.cholesky(
                K_noisy + jitter * np.eye(K_noisy.shape[0]), lower=True
            )
            return L, jitter
        except linalg.LinAlgError as err:
            last_err = err
            jitter *= 10.0
    raise last_err


def _kernel_matrix(hyper: GPHyperparameters, U: np.ndarray) -> np.ndarray:
    spec = hyper.kernel
    K = accel.kernel_cross(
        U, U, spec.lengthscales, spec.magnitude**2, _KIND_CODES[spec.kind]
    )
    if hyper.noise_std > 0:
        K = K + hyper.noise_std**2 * np.eye(U.shape[0])
    return K


def build_model(hyper: GPHyperparameters, U, y) -> GPModel:
    """Factorize K(U) for the given hyperparameters and precompute alpha."""
    U = np.ascontiguousarray(np.atleast_2d(np.asarray(U, dtype=float)))
    y = np.asarray(y, dtype=float).ravel()
    if U.shape[0] != y.shape[0]:
        raise ContractViolationError("inputs and targets disagree on N")
    if U.shape[1] != hyper.kernel.n_dim:
        raise ContractViolationError("input dimension does not match kernel")
    K = _kernel_matrix(hyper, U)
    try:
        L, _ = _chol_with_jitter(K, hyper.kernel.magnitude**2)
    except linalg.LinAlgError as err:
        raise GPFitError(
            f"kernel matrix not positive definite after jitter: {err}",
            hyper=hyper,
        ) from err
    resid = y - hyper.mean_offset
    alpha = linalg.cho_solve((L, True), resid)
    # One step of iterative refinement against the unjittered K so the
    # stabilizing jitter does not leak into the interpolation residuals.
    for _ in range(2):
        err_vec = resid - K @ alpha
        if not np.all(np.isfinite(err_vec)):
            break
        alpha = alpha + linalg.cho_solve((L, True), err_vec)
    return GPModel(
        hyper=hyper,
        train_inputs=U,
        train_targets=y.copy(),
        kernel_factor=L,
        alpha=alpha,
    )


def neg_log_marginal_likelihood(hyper: GPHyperparameters, U, y) -> float:
    """0.5*ln|K| + 0.5*(y-1c)^T K^-1 (y-1c), via the triangular factor."""
    U = np.ascontiguousarray(np.atleast_2d(np.asarray(U, dtype=float)))
    y = np.asarray(y, dtype=float).ravel()
    if U.shape[0] < 1:
        raise ContractViolationError("need at least one observation")
    K = _kernel_matrix(hyper, U)
    try:
        L, _ = _chol_with_jitter(K, hyper.kernel.magnitude**2)
    except linalg.LinAlgError as err:
        raise GPFitError(
            f"kernel matrix not positive definite after jitter: {err}",
            hyper=hyper,
        ) from err
    resid = y - hyper.mean_offset
    alpha = linalg.cho_solve((L, True), resid)
    return float(np.sum(np.log(np.diag(L))) + 0.5 * resid @ alpha)


def posterior(model: GPModel, u):
    """Posterior mean and (clamped, noise-free) variance at one or more points.

    Accepts a single point (1-D array, returns two floats) or a stack of
    points (2-D array, returns two 1-D arrays).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U2 = np.ascontiguousarray(np.atleast_2d(u))
    if U2.shape[1] != model.n_dim:
        raise ContractViolationError("query dimension does not match model")
    spec = model.hyper.kernel
    R = accel.kernel_cross(
        U2, model.train_inputs, spec.lengthscales, spec.magnitude**2,
        _KIND_CODES[spec.kind],
    )
    mean = model.hyper.mean_offset + R @ model.alpha
    V = linalg.solve_triangular(model.kernel_factor, R.T, lower=True)
    var = np.maximum(spec.magnitude**2 - np.sum(V * V, axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def posterior_mean_gradient(model: GPModel, u) -> np.ndarray:
    """Analytic gradient of the posterior mean at a single point."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != model.n_dim:
        raise ContractViolationError("query dimension does not match model")
    spec = model.hyper.kernel
    G = accel.kernel_grad_point(
        model.train_inputs, u, spec.lengthscales, spec.magnitude**2,
        _KIND_CODES[spec.kind],
    )
    return G.T @ model.alpha


def posterior_variance_gradient(model: GPModel, u) -> np.ndarray:
    """Analytic gradient of the posterior variance at a single point."""
    u = np.asarray(u, dtype=float).ravel()
    spec = model.hyper.kernel
    r = accel.kernel_cross(
        u[None, :], model.train_inputs, spec.lengthscales, spec.magnitude**2,
        _KIND_CODES[spec.kind],
    )[0]
    G = accel.kernel_grad_point(
        model.train_inputs, u, spec.lengthscales, spec.magnitude**2,
        _KIND_CODES[spec.kind],
    )
    Kinv_r = linalg.cho_solve((model.kernel_factor, True), r)
    return -2.0 * (G.T @ Kinv_r)


def posterior_std_gradient(model: GPModel, u, floor: float = 1e-12) -> np.ndarray:
    """Gradient of the posterior std; zero where the std is (numerically) zero."""
    _, var = posterior(model, np.asarray(u, dtype=float).ravel())
    if var <= floor:
        return np.zeros(model.n_dim)
    return posterior_variance_gradient(model, u) / (2.0 * np.sqrt(var))


# ---------------------------------------------------------------------------
# Maximum-likelihood fitting
# ---------------------------------------------------------------------------

def _pack_theta(c, log_sn, log_snu, log_ell, noise_fixed):
    if noise_fixed:
        return np.concatenate(([c, log_sn], log_ell))
    return np.concatenate(([c, log_sn, log_snu], log_ell))


def _unpack_theta(theta, d, noise_fixed, fixed_noise_std):
    c = theta[0]
    sn = np.exp(theta[1])
    if noise_fixed:
        snu = fixed_noise_std
        log_ell = theta[2:2 + d]
    else:
        snu = np.exp(theta[2])
        log_ell = theta[3:3 + d]
    return c, sn, snu, np.exp(log_ell)


def _nll_and_grad(theta, U, y, diffsq, kind, noise_fixed, fixed_noise_std):
    """Negative log marginal likelihood and its gradient in the packed coords.

    diffsq[d] holds the (N, N) squared coordinate differences, precomputed
    once per fit.
    """
    n, d = U.shape
    c, sn, snu, ell = _unpack_theta(theta, d, noise_fixed, fixed_noise_std)
    sn2 = sn * sn
    D = diffsq / (ell**2)[:, None, None]  # (d, N, N)
    r2 = np.sum(D, axis=0)
    if kind == accel.KIND_SE:
        Knl = sn2 * np.exp(-0.5 * r2)
    else:
        r = np.sqrt(r2)
        Knl = sn2 * (1.0 + np.sqrt(3.0) * r) * np.exp(-np.sqrt(3.0) * r)
    K = Knl + (snu * snu) * np.eye(n)
    try:
        L, _ = _chol_with_jitter(K, sn2)
    except linalg.LinAlgError:
        return np.inf, np.zeros_like(theta)
    resid = y - c
    alpha = linalg.cho_solve((L, True), resid)
    nll = float(np.sum(np.log(np.diag(L))) + 0.5 * resid @ alpha)

    Kinv = linalg.cho_solve((L, True), np.eye(n))
    M = Kinv - np.outer(alpha, alpha)
    grad = np.empty_like(theta)
    grad[0] = -float(np.sum(alpha))
    grad[1] = 0.5 * float(np.sum(M * (2.0 * Knl)))
    if kind == accel.KIND_SE:
        dK_dlogell = Knl[None, :, :] * D
    else:
        with np.errstate(invalid="ignore"):
            base = 3.0 * sn2 * np.exp(-np.sqrt(3.0) * np.sqrt(r2))
        dK_dlogell = base[None, :, :] * D
    off = 2
    if not noise_fixed:
        grad[2] = 0.5 * float(np.sum(np.diag(M)) * 2.0 * snu * snu)
        off = 3
    for k in range(d):
        grad[off + k] = 0.5 * float(np.sum(M * dK_dlogell[k]))
    return nll, grad


def fit(U, y, options: FitOptions = FitOptions()) -> GPModel:
    """Multistart maximum-likelihood fit.

    One start comes from ``options.warm_start`` when provided (otherwise a
    moment-based heuristic), the rest from a Latin hypercube over the
    log-space box.  Deterministic given ``options.seed``.
    """
    U = np.ascontiguousarray(np.atleast_2d(np.asarray(U, dtype=float)))
    y = np.asarray(y, dtype=float).ravel()
    n, d = U.shape
    if n != y.shape[0]:
        raise ContractViolationError("inputs and targets disagree on N")
    min_n = 1 if options.noise_fixed else 2
    if n < min_n:
        raise ContractViolationError(
            f"need N >= {min_n} observations (got {n})"
        )
    kind = _KIND_CODES[options.kernel_kind]
    y_std = float(np.std(y))
    scale = max(y_std, 1e-8)
    y_mean = float(np.mean(y))

    lo_sn, hi_sn = (_LOG_MAGNITUDE_REL_BOUNDS[0] + np.log(scale),
                    _LOG_MAGNITUDE_REL_BOUNDS[1] + np.log(scale))
    lo_snu, hi_snu = (_LOG_NOISE_REL_BOUNDS[0] + np.log(scale),
                      _LOG_NOISE_REL_BOUNDS[1] + np.log(scale))
    lo_l, hi_l = _LOG_LENGTHSCALE_BOUNDS

    if options.noise_fixed:
        bounds = [(None, None), (lo_sn, hi_sn)] + [(lo_l, hi_l)] * d
    else:
        bounds = [(None, None), (lo_sn, hi_sn), (lo_snu, hi_snu)] + \
            [(lo_l, hi_l)] * d

    def clip_box(theta):
        out = theta.copy()
        for i, (lo, hi) in enumerate(bounds):
            if lo is not None:
                out[i] = min(max(out[i], lo), hi)
        return out

    starts = []
    if options.warm_start is not None:
        w = options.warm_start
        starts.append(clip_box(_pack_theta(
            w.mean_offset,
            np.log(w.kernel.magnitude),
            np.log(max(w.noise_std, 1e-300)) if not options.noise_fixed else 0.0,
            np.log(w.kernel.lengthscales),
            options.noise_fixed,
        )))
    else:
        starts.append(clip_box(_pack_theta(
            y_mean, np.log(scale), np.log(0.1 * scale), np.log(0.3) * np.ones(d),
            options.noise_fixed,
        )))

    n_lhs = max(options.n_starts - 1, 0)
    if n_lhs:
        sampler = qmc.LatinHypercube(
            d=len(bounds) - 1, seed=np.random.default_rng(options.seed)
        )
        unit = sampler.random(n_lhs)
        box_lo = np.array([b[0] for b in bounds[1:]])
        box_hi = np.array([b[1] for b in bounds[1:]])
        for row in unit:
            theta = np.concatenate(([y_mean], box_lo + row * (box_hi - box_lo)))
            starts.append(theta)

    diffsq = np.ascontiguousarray(
        (U[:, None, :] - U[None, :, :]).transpose(2, 0, 1) ** 2
    )
    args = (U, y, diffsq, kind, options.noise_fixed, options.noise_std)

    best_theta, best_nll = None, np.inf
    for theta0 in starts:
        res = minimize(
            _nll_and_grad, theta0, args=args, jac=True, method="L-BFGS-B",
            bounds=bounds, options={"maxiter": options.max_iter},
        )
        if np.isfinite(res.fun) and res.fun < best_nll:
            best_nll, best_theta = float(res.fun), res.x.copy()

    if best_theta is None:
        raise GPFitError(
            "all multistarts failed to produce a finite likelihood",
            hyper=options.warm_start,
        )
    c, sn, snu, ell = _unpack_theta(
        best_theta, d, options.noise_fixed, options.noise_std
    )
    hyper = GPHyperparameters(
        mean_offset=float(c),
        kernel=KernelSpec(options.kernel_kind, float(sn), ell),
        noise_std=float(snu),
        noise_fixed=options.noise_fixed,
    )
    return build_model(hyper, U, y)


def refit_targets(model: GPModel, y) -> GPModel:
    """Same hyperparameters and inputs, new targets (alpha recomputed)."""
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != model.n_train:
        raise ContractViolationError("target length does not match model")
    resid = y - model.hyper.mean_offset
    alpha = linalg.cho_solve((model.kernel_factor, True), resid)
    return replace(model, train_targets=y.copy(), alpha=alpha)
