"""Batch photobioreactor: phycocyanin production under light/nitrate control.

States are (C_X [g/L], C_N [mg/L], C_P [mg/L]); the manipulated inputs are a
piecewise-constant light intensity I(t) and nitrate inflow F_N(t) over
equidistant stages of a 240 h batch.  The plant model carries light
inhibition terms that the nominal model omits.  Integration is fixed-step
classic RK4, numba-compiled when available; the same compiled body serves the
complex-step input gradients (the right-hand side is rational, hence
complex-analytic).

Problem layout for S stages (inputs u = [I_1..I_S, F_1..F_S]):
    G_0            = -C_P(240)
    G_1..G_S       = C_P(t_j) - 0.011 C_X(t_j)   (ratio path constraint)
    G_{S+1}..G_2S  = C_N(t_j) - 800              (nitrate path constraint)
    G_{2S+1}       = C_N(240) - 150              (terminal nitrate)
Measurement noise is applied to the states entering each constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..accel import NUMBA_ENABLED, njit
from ..errors import ContractViolationError, SimulationError
from .base import BoxScaling, NominalModel, PlantOracle

BATCH_HOURS = 240.0
DEFAULT_STAGES = 6
DEFAULT_STEPS_PER_STAGE = 25

LIGHT_BOUNDS = (120.0, 400.0)
FEED_BOUNDS = (0.0, 40.0)
INITIAL_STATE = np.array([1.0, 150.0, 0.0])  # C_X, C_N, C_P
RATIO_LIMIT = 0.011
NITRATE_PATH_LIMIT = 800.0
NITRATE_TERMINAL_LIMIT = 150.0

STATE_NOISE_STD = np.array([0.02, 0.316, 0.0001])  # C_X, C_N, C_P

_NEGATIVE_TOL = 1e-6
_COMPLEX_STEP = 1e-20


def _load_params() -> dict:
    text = resources.files("madapt.plants").joinpath(
        "data/pbr_constants.txt").read_text()
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, raw = line.partition("=")
        values[key.strip()] = float(raw.strip())
    return values


@dataclass(frozen=True)
class PBRParams:
    u_m: float
    u_d: float
    K_N: float
    Y_NX: float
    k_m: float
    k_d: float
    k_s: float
    k_i: float
    k_sq: float
    k_iq: float
    K_Np: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.u_m, self.u_d, self.K_N, self.Y_NX, self.k_m, self.k_d,
            self.k_s, self.k_i, self.k_sq, self.k_iq, self.K_Np,
        ])


DEFAULT_PARAMS = PBRParams(**_load_params())


@dataclass(frozen=True)
class ControlParameterization:
    """Piecewise-constant profiles for (I, F_N) over equidistant stages."""

    n_stages: int = DEFAULT_STAGES
    batch_hours: float = BATCH_HOURS

    def __post_init__(self):
        if self.n_stages < 1:
            raise ContractViolationError("need at least one control stage")

    @property
    def stage_hours(self) -> float:
        return self.batch_hours / self.n_stages

    @property
    def n_u(self) -> int:
        return 2 * self.n_stages

    @property
    def n_g(self) -> int:
        return 2 * self.n_stages + 1

    def bounds(self):
        lower = np.concatenate((
            np.full(self.n_stages, LIGHT_BOUNDS[0]),
            np.full(self.n_stages, FEED_BOUNDS[0]),
        ))
        upper = np.concatenate((
            np.full(self.n_stages, LIGHT_BOUNDS[1]),
            np.full(self.n_stages, FEED_BOUNDS[1]),
        ))
        return lower, upper

    def split(self, u):
        u = np.asarray(u)
        if u.shape[0] != self.n_u:
            raise ContractViolationError(
                f"expected {self.n_u} stage controls, got {u.shape[0]}"
            )
        return u[: self.n_stages], u[self.n_stages:]


def _trajectory_impl(light, feed, y0, params, n_sub, dt, plant, out):
    """RK4 over all stages; boundary states land in ``out`` (row 0 = y0).

    Returns 0 on success, 1 when a concentration drops below the physical
    tolerance.  Small negative excursions are clamped to zero (real part
    only, so complex-step directions survive).
    """
    u_m = params[0]
    u_d = params[1]
    K_N = params[2]
    Y_NX = params[3]
    k_m = params[4]
    k_d = params[5]
    k_s = params[6]
    k_i = params[7]
    k_sq = params[8]
    k_iq = params[9]
    K_Np = params[10]

    cx = y0[0]
    cn = y0[1]
    cp = y0[2]
    out[0, 0] = cx
    out[0, 1] = cn
    out[0, 2] = cp
    n_stages = light.shape[0]
    for s in range(n_stages):
        I = light[s]
        fn = feed[s]
        if plant:
            light_g = I / (I + k_s + I * I / k_i)
            light_q = I / (I + k_sq + I * I / k_iq)
        else:
            light_g = I / (I + k_s)
            light_q = I / (I + k_sq)
        for _ in range(n_sub):
            # RK4 stages, inlined rather than via a callable for numba.
            x1, n1, p1 = cx, cn, cp
            g1 = u_m * light_g * n1 / (n1 + K_N) * x1
            kx1 = g1 - u_d * x1
            kn1 = -Y_NX * g1 + fn
            if plant:
                kp1 = k_m * light_q * x1 - k_d * p1 / (n1 + K_Np)
            else:
                kp1 = k_m * light_q * n1 / (n1 + K_N) * x1 \
                    - k_d * p1 / (n1 + K_Np)

            x2 = cx + 0.5 * dt * kx1
            n2 = cn + 0.5 * dt * kn1
            p2 = cp + 0.5 * dt * kp1
            g2 = u_m * light_g * n2 / (n2 + K_N) * x2
            kx2 = g2 - u_d * x2
            kn2 = -Y_NX * g2 + fn
            if plant:
                kp2 = k_m * light_q * x2 - k_d * p2 / (n2 + K_Np)
            else:
                kp2 = k_m * light_q * n2 / (n2 + K_N) * x2 \
                    - k_d * p2 / (n2 + K_Np)

            x3 = cx + 0.5 * dt * kx2
            n3 = cn + 0.5 * dt * kn2
            p3 = cp + 0.5 * dt * kp2
            g3 = u_m * light_g * n3 / (n3 + K_N) * x3
            kx3 = g3 - u_d * x3
            kn3 = -Y_NX * g3 + fn
            if plant:
                kp3 = k_m * light_q * x3 - k_d * p3 / (n3 + K_Np)
            else:
                kp3 = k_m * light_q * n3 / (n3 + K_N) * x3 \
                    - k_d * p3 / (n3 + K_Np)

            x4 = cx + dt * kx3
            n4 = cn + dt * kn3
            p4 = cp + dt * kp3
            g4 = u_m * light_g * n4 / (n4 + K_N) * x4
            kx4 = g4 - u_d * x4
            kn4 = -Y_NX * g4 + fn
            if plant:
                kp4 = k_m * light_q * x4 - k_d * p4 / (n4 + K_Np)
            else:
                kp4 = k_m * light_q * n4 / (n4 + K_N) * x4 \
                    - k_d * p4 / (n4 + K_Np)

            cx = cx + dt / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4)
            cn = cn + dt / 6.0 * (kn1 + 2.0 * kn2 + 2.0 * kn3 + kn4)
            cp = cp + dt / 6.0 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)

            if cx.real < -_NEGATIVE_TOL or cn.real < -_NEGATIVE_TOL \
                    or cp.real < -_NEGATIVE_TOL:
                return 1
            if cx.real < 0.0:
                cx = cx - cx.real
            if cn.real < 0.0:
                cn = cn - cn.real
            if cp.real < 0.0:
                cp = cp - cp.real
        out[s + 1, 0] = cx
        out[s + 1, 1] = cn
        out[s + 1, 2] = cp
    return 0


_trajectory_py = _trajectory_impl
_trajectory_jit = njit(cache=True)(_trajectory_impl) if NUMBA_ENABLED else None
_trajectory = _trajectory_jit if NUMBA_ENABLED else _trajectory_py


def pbr_simulate(controls, model: str = "plant",
                 parameterization: ControlParameterization | None = None,
                 steps_per_stage: int = DEFAULT_STEPS_PER_STAGE,
                 params: PBRParams | None = None) -> np.ndarray:
    """States (C_X, C_N, C_P) at every stage boundary, shape (S+1, 3)."""
    if model not in ("plant", "nominal"):
        raise ContractViolationError(f"unknown model {model!r}")
    par = parameterization or ControlParameterization()
    light, feed = par.split(np.asarray(controls, dtype=float))
    pvec = (params or DEFAULT_PARAMS).as_array()
    dt = par.stage_hours / steps_per_stage
    out = np.empty((par.n_stages + 1, 3))
    flag = _trajectory(
        light.astype(float), feed.astype(float), INITIAL_STATE.astype(float),
        pvec, steps_per_stage, dt, model == "plant", out,
    )
    if flag:
        raise SimulationError(
            f"negative concentration below -{_NEGATIVE_TOL} in {model} run"
        )
    return out


def _simulate_with_input_gradients(controls, model, par, steps_per_stage):
    """Boundary states and their Jacobian w.r.t. the stage controls.

    Complex-step differentiation reuses the same trajectory body; the step
    is far below any other scale so the imaginary part is the exact
    directional derivative to machine precision.
    """
    controls = np.asarray(controls, dtype=float)
    states = pbr_simulate(
        controls, model, parameterization=par, steps_per_stage=steps_per_stage
    )
    n_u = controls.shape[0]
    pvec = DEFAULT_PARAMS.as_array()
    dt = par.stage_hours / steps_per_stage
    grads = np.empty((par.n_stages + 1, 3, n_u))
    out = np.empty((par.n_stages + 1, 3), dtype=np.complex128)
    y0 = INITIAL_STATE.astype(np.complex128)
    for j in range(n_u):
        cu = controls.astype(np.complex128)
        cu[j] += 1j * _COMPLEX_STEP
        light, feed = par.split(cu)
        flag = _trajectory(
            light, feed, y0, pvec, steps_per_stage, dt, model == "plant", out,
        )
        if flag:
            raise SimulationError("negative concentration during gradient pass")
        grads[:, :, j] = out.imag / _COMPLEX_STEP
    return states, grads


def assemble_outputs(states: np.ndarray, par: ControlParameterization) -> np.ndarray:
    """Cost and constraint values from boundary states (noisy or not)."""
    s = par.n_stages
    g = np.empty(par.n_g + 1)
    g[0] = -states[s, 2]
    g[1:s + 1] = states[1:, 2] - RATIO_LIMIT * states[1:, 0]
    g[s + 1:2 * s + 1] = states[1:, 1] - NITRATE_PATH_LIMIT
    g[2 * s + 1] = states[s, 1] - NITRATE_TERMINAL_LIMIT
    return g


def _assemble_output_gradients(grads, par):
    s = par.n_stages
    n_u = grads.shape[2]
    dg = np.empty((par.n_g + 1, n_u))
    dg[0] = -grads[s, 2]
    dg[1:s + 1] = grads[1:, 2, :] - RATIO_LIMIT * grads[1:, 0, :]
    dg[s + 1:2 * s + 1] = grads[1:, 1, :]
    dg[2 * s + 1] = grads[s, 1]
    return dg


def pbr_problem(controls, model: str = "plant",
                parameterization: ControlParameterization | None = None,
                steps_per_stage: int = DEFAULT_STEPS_PER_STAGE) -> np.ndarray:
    """Noiseless (G_0, ..., G_ng) for the given stage controls."""
    par = parameterization or ControlParameterization()
    states = pbr_simulate(
        controls, model, parameterization=par, steps_per_stage=steps_per_stage
    )
    return assemble_outputs(states, par)


class PBROracle(PlantOracle):
    """Noisy oracle; noise is drawn per measured state at each boundary."""

    def __init__(self, par: ControlParameterization, seed=0, noisy=True,
                 steps_per_stage: int = DEFAULT_STEPS_PER_STAGE):
        self.par = par
        self.steps_per_stage = steps_per_stage
        self.state_noise_std = STATE_NOISE_STD if noisy else np.zeros(3)
        s = par.n_stages
        # Induced per-function stds (functions are correlated through shared
        # states; kept for reporting only).
        ratio_std = np.sqrt(
            self.state_noise_std[2] ** 2
            + (RATIO_LIMIT * self.state_noise_std[0]) ** 2
        )
        noise_std = np.concatenate((
            [self.state_noise_std[2]],
            np.full(s, ratio_std),
            np.full(s, self.state_noise_std[1]),
            [self.state_noise_std[1]],
        ))

        def true_fn(u):
            return pbr_problem(
                u, "plant", parameterization=par,
                steps_per_stage=steps_per_stage,
            )

        super().__init__("pbr", true_fn, noise_std, n_u=par.n_u, seed=seed)

    def measure(self, u):
        states = pbr_simulate(
            u, "plant", parameterization=self.par,
            steps_per_stage=self.steps_per_stage,
        )
        noisy = states.copy()
        noisy[1:] += self._rng.standard_normal(
            (self.par.n_stages, 3)) * self.state_noise_std
        self.n_measurements += 1
        return assemble_outputs(noisy, self.par)


def make_oracle(n_stages: int = DEFAULT_STAGES, seed=0, noisy=True,
                steps_per_stage: int = DEFAULT_STEPS_PER_STAGE) -> PBROracle:
    return PBROracle(
        ControlParameterization(n_stages), seed=seed, noisy=noisy,
        steps_per_stage=steps_per_stage,
    )


def make_nominal(n_stages: int = DEFAULT_STAGES,
                 steps_per_stage: int = DEFAULT_STEPS_PER_STAGE) -> NominalModel:
    par = ControlParameterization(n_stages)

    def eval_fn(u):
        return pbr_problem(
            u, "nominal", parameterization=par, steps_per_stage=steps_per_stage
        )

    def grad_fn(u):
        _, grads = _simulate_with_input_gradients(
            u, "nominal", par, steps_per_stage
        )
        return _assemble_output_gradients(grads, par)

    return NominalModel("pbr", eval_fn, grad_fn, n_u=par.n_u, n_g=par.n_g)


def plant_with_gradients(controls, n_stages: int = DEFAULT_STAGES,
                         steps_per_stage: int = DEFAULT_STEPS_PER_STAGE):
    """Noiseless plant outputs and their input gradients (for the NLP oracle)."""
    par = ControlParameterization(n_stages)
    states, grads = _simulate_with_input_gradients(
        controls, "plant", par, steps_per_stage
    )
    return assemble_outputs(states, par), _assemble_output_gradients(grads, par)


def make_scaling(n_stages: int = DEFAULT_STAGES) -> BoxScaling:
    lower, upper = ControlParameterization(n_stages).bounds()
    return BoxScaling(lower, upper)


def default_initial_center(n_stages: int = DEFAULT_STAGES) -> np.ndarray:
    """A feasible mid-box profile: bright light, front-loaded nitrate feed."""
    feed = np.zeros(n_stages)
    third = max(n_stages // 3, 1)
    feed[:third] = 20.0
    feed[third:2 * third] = 10.0
    return np.concatenate((np.full(n_stages, 300.0), feed))
