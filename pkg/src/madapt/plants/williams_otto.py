"""Williams-Otto CSTR benchmark: steady-state plant and two-reaction model.

Inputs are u = (F_B [kg/s], T_r [degC]).  The cost is the negated economic
profit (minimization); constraints bound the residual mass fractions of A
and G at the outlet.  Steady states are found by a damped Newton solve with
analytic Jacobians and a pseudo-transient fallback; input gradients follow
from the implicit function theorem.  The Newton core is numba-compiled when
available (see madapt.accel).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..accel import NUMBA_ENABLED, njit
from ..errors import OracleError
from .base import BoxScaling, NominalModel, PlantOracle

BOUNDS_LOWER = np.array([4.0, 70.0])
BOUNDS_UPPER = np.array([7.0, 100.0])
NOISE_STD = np.array([0.5, 0.0005, 0.0005])

X_A_LIMIT = 0.12
X_G_LIMIT = 0.08

DEFAULT_INITIAL_CENTER = np.array([5.5, 84.0])

_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 60
_PSEUDO_TRANSIENT_STEPS = 200

# Species order, plant:  A B C E G P   |   model:  A B E G P


def _load_constants() -> dict:
    text = resources.files("madapt.plants").joinpath(
        "data/williams_otto_constants.txt").read_text()
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, raw = line.partition("=")
        values[key.strip()] = float(raw.strip())
    return values


_C = _load_constants()
FEED_A = _C["feed_a"]
HOLDUP = _C["holdup"]
_PLANT_K = np.array([
    [_C["plant_k1_a"], _C["plant_k1_b"]],
    [_C["plant_k2_a"], _C["plant_k2_b"]],
    [_C["plant_k3_a"], _C["plant_k3_b"]],
])
_MODEL_K = np.array([
    [_C["model_k1_a"], _C["model_k1_b"]],
    [_C["model_k2_a"], _C["model_k2_b"]],
])


def _residual_jac_impl(x, fb, tk, fa, w, kcoef, plant):
    """Steady-state residual F(x) and Jacobian dF/dx.

    plant=True: three-reaction system over (A, B, C, E, G, P);
    plant=False: two-reaction model over (A, B, E, G, P).
    """
    f = fa + fb
    d = -f / w
    if plant:
        k1 = kcoef[0, 0] * np.exp(-kcoef[0, 1] / tk)
        k2 = kcoef[1, 0] * np.exp(-kcoef[1, 1] / tk)
        k3 = kcoef[2, 0] * np.exp(-kcoef[2, 1] / tk)
        xa, xb, xc = x[0], x[1], x[2]
        xe, xg, xp = x[3], x[4], x[5]
        r1 = k1 * xa * xb
        r2 = k2 * xb * xc
        r3 = k3 * xc * xp
        F = np.empty(6)
        F[0] = (fa - f * xa) / w - r1
        F[1] = (fb - f * xb) / w - r1 - r2
        F[2] = -f * xc / w + 2.0 * r1 - 2.0 * r2 - r3
        F[3] = -f * xe / w + 2.0 * r2
        F[4] = -f * xg / w + 1.5 * r3
        F[5] = -f * xp / w + r2 - 0.5 * r3
        J = np.zeros((6, 6))
        J[0, 0] = d - k1 * xb
        J[0, 1] = -k1 * xa
        J[1, 0] = -k1 * xb
        J[1, 1] = d - k1 * xa - k2 * xc
        J[1, 2] = -k2 * xb
        J[2, 0] = 2.0 * k1 * xb
        J[2, 1] = 2.0 * k1 * xa - 2.0 * k2 * xc
        J[2, 2] = d - 2.0 * k2 * xb - k3 * xp
        J[2, 5] = -k3 * xc
        J[3, 1] = 2.0 * k2 * xc
        J[3, 2] = 2.0 * k2 * xb
        J[3, 3] = d
        J[4, 2] = 1.5 * k3 * xp
        J[4, 4] = d
        J[4, 5] = 1.5 * k3 * xc
        J[5, 1] = k2 * xc
        J[5, 2] = k2 * xb - 0.5 * k3 * xp
        J[5, 5] = d - 0.5 * k3 * xc
        return F, J
    k1 = kcoef[0, 0] * np.exp(-kcoef[0, 1] / tk)
    k2 = kcoef[1, 0] * np.exp(-kcoef[1, 1] / tk)
    xa, xb, xe, xg, xp = x[0], x[1], x[2], x[3], x[4]
    r1 = k1 * xa * xb * xb
    r2 = k2 * xa * xb * xp
    F = np.empty(5)
    F[0] = (fa - f * xa) / w - r1 - r2
    F[1] = (fb - f * xb) / w - 2.0 * r1 - r2
    F[2] = -f * xe / w + 2.0 * r1
    F[3] = -f * xg / w + 3.0 * r2
    F[4] = -f * xp / w + r1 - r2
    J = np.zeros((5, 5))
    dr1a, dr1b = k1 * xb * xb, 2.0 * k1 * xa * xb
    dr2a, dr2b, dr2p = k2 * xb * xp, k2 * xa * xp, k2 * xa * xb
    J[0, 0] = d - dr1a - dr2a
    J[0, 1] = -dr1b - dr2b
    J[0, 4] = -dr2p
    J[1, 0] = -2.0 * dr1a - dr2a
    J[1, 1] = d - 2.0 * dr1b - dr2b
    J[1, 4] = -dr2p
    J[2, 0] = 2.0 * dr1a
    J[2, 1] = 2.0 * dr1b
    J[2, 2] = d
    J[3, 0] = 3.0 * dr2a
    J[3, 1] = 3.0 * dr2b
    J[3, 3] = d
    J[3, 4] = 3.0 * dr2p
    J[4, 0] = dr1a - dr2a
    J[4, 1] = dr1b - dr2b
    J[4, 4] = d - dr2p
    return F, J


def _make_newton(residual_jac):
    def newton(fb, tk, fa, w, kcoef, plant):
        n = 6 if plant else 5
        f = fa + fb
        x = np.zeros(n)
        x[0] = fa / f
        x[1] = fb / f
        for attempt in range(2):
            if attempt == 1:
                x = np.zeros(n)
                x[0] = fa / f
                x[1] = fb / f
                dt = 50.0
                for _ in range(_PSEUDO_TRANSIENT_STEPS):
                    F, J = residual_jac(x, fb, tk, fa, w, kcoef, plant)
                    x = np.minimum(np.maximum(x + dt * F, 0.0), 1.0)
            converged = False
            for _ in range(_NEWTON_MAX_ITER):
                F, J = residual_jac(x, fb, tk, fa, w, kcoef, plant)
                norm0 = np.max(np.abs(F))
                if norm0 <= _NEWTON_TOL:
                    converged = True
                    break
                step = np.linalg.solve(J, -F)
                lam = 1.0
                improved = False
                for _ in range(30):
                    x_new = x + lam * step
                    F_new, J_new = residual_jac(x_new, fb, tk, fa, w, kcoef, plant)
                    if np.max(np.abs(F_new)) < norm0:
                        x = x_new
                        improved = True
                        break
                    lam *= 0.5
                if not improved:
                    break
            if converged:
                return x, True
        return x, False

    return newton


_residual_jac_py = _residual_jac_impl
_newton_py = _make_newton(_residual_jac_py)
if NUMBA_ENABLED:
    _residual_jac_jit = njit(cache=True)(_residual_jac_impl)
    _newton_jit = njit(cache=True)(_make_newton(_residual_jac_jit))
    _residual_jac = _residual_jac_jit
    _newton = _newton_jit
else:
    _residual_jac_jit = None
    _newton_jit = None
    _residual_jac = _residual_jac_py
    _newton = _newton_py


def steady_state(fb: float, tr: float, plant: bool = True) -> np.ndarray:
    """Outlet mass fractions at steady state (plant or two-reaction model)."""
    tk = tr + 273.15
    kcoef = _PLANT_K if plant else _MODEL_K
    x, ok = _newton(float(fb), tk, FEED_A, HOLDUP, kcoef, plant)
    if not ok:
        raise OracleError(
            "Williams-Otto steady-state solve failed",
            diagnostics={"fb": fb, "tr": tr, "plant": plant},
        )
    return x


def steady_state_residual(x, fb, tr, plant=True):
    tk = tr + 273.15
    kcoef = _PLANT_K if plant else _MODEL_K
    F, _ = _residual_jac(
        np.asarray(x, dtype=float), float(fb), tk, FEED_A, HOLDUP, kcoef, plant
    )
    return F


def _economics(xp, xe, fb):
    profit = (1043.38 * xp + 20.92 * xe) * (FEED_A + fb) \
        - 79.23 * FEED_A - 118.34 * fb
    return -profit


def _outputs_from_state(x, fb, plant):
    if plant:
        xa, xe, xg, xp = x[0], x[3], x[4], x[5]
    else:
        xa, xe, xg, xp = x[0], x[2], x[3], x[4]
    return np.array([
        _economics(xp, xe, fb),
        xa - X_A_LIMIT,
        xg - X_G_LIMIT,
    ])


def williams_otto_plant(fb: float, tr: float) -> np.ndarray:
    """Noiseless plant values (G0, G1, G2); G0 is the negated profit."""
    return _outputs_from_state(steady_state(fb, tr, plant=True), fb, True)


def williams_otto_nominal(fb: float, tr: float) -> np.ndarray:
    """Two-reaction model values (G0, G1, G2)."""
    return _outputs_from_state(steady_state(fb, tr, plant=False), fb, False)


def _output_gradients(fb, tr, plant):
    """Gradients of (G0, G1, G2) w.r.t. (F_B, T_r) via the implicit function
    theorem on the steady-state equations."""
    tk = tr + 273.15
    kcoef = _PLANT_K if plant else _MODEL_K
    x = steady_state(fb, tr, plant=plant)
    _, J = _residual_jac(x, fb, tk, FEED_A, HOLDUP, kcoef, plant)
    f = FEED_A + fb

    # dF/dFB: only the feed and outflow terms depend on F_B directly.
    dF_dfb = -x / HOLDUP
    dF_dfb[1] += 1.0 / HOLDUP
    # dF/dT: the residual is affine in the rate constants and
    # dk_j/dT = k_j * b_j / T_K^2, so rescaling the pre-exponential factors
    # and subtracting the rate-free part gives the exact derivative.
    k_scaled = kcoef.copy()
    k_scaled[:, 0] *= kcoef[:, 1] / tk**2
    k_zero = kcoef.copy()
    k_zero[:, 0] = 0.0
    F_scaled, _ = _residual_jac(x, fb, tk, FEED_A, HOLDUP, k_scaled, plant)
    F_zero, _ = _residual_jac(x, fb, tk, FEED_A, HOLDUP, k_zero, plant)
    dF_dt = F_scaled - F_zero

    dx = np.linalg.solve(J, -np.column_stack((dF_dfb, dF_dt)))
    if plant:
        idx_a, idx_e, idx_g, idx_p = 0, 3, 4, 5
    else:
        idx_a, idx_e, idx_g, idx_p = 0, 2, 3, 4
    xp, xe = x[idx_p], x[idx_e]
    dprofit = (1043.38 * dx[idx_p] + 20.92 * dx[idx_e]) * f
    dprofit[0] += (1043.38 * xp + 20.92 * xe) - 118.34
    return np.vstack((-dprofit, dx[idx_a], dx[idx_g]))


def plant_gradients(u) -> np.ndarray:
    return _output_gradients(float(u[0]), float(u[1]), plant=True)


def nominal_gradients(u) -> np.ndarray:
    return _output_gradients(float(u[0]), float(u[1]), plant=False)


def _plant_fn(u):
    return williams_otto_plant(float(u[0]), float(u[1]))


def _nominal_fn(u):
    return williams_otto_nominal(float(u[0]), float(u[1]))


def make_oracle(seed=0, noisy: bool = True) -> PlantOracle:
    std = NOISE_STD if noisy else np.zeros(3)
    return PlantOracle("williams-otto", _plant_fn, std, n_u=2, seed=seed)


def make_nominal(perfect: bool = False) -> NominalModel:
    if perfect:
        return NominalModel(
            "williams-otto-perfect", _plant_fn, plant_gradients, n_u=2, n_g=2
        )
    return NominalModel(
        "williams-otto", _nominal_fn, nominal_gradients, n_u=2, n_g=2
    )


def make_scaling() -> BoxScaling:
    return BoxScaling(BOUNDS_LOWER, BOUNDS_UPPER)
