"""Trust-region modifier adaptation with GP mismatch surrogates.

One RTO iteration: optional criticality shrink, acquisition-driven subproblem
inside the trust region, a single noisy plant measurement at the trial point,
infeasibility backtracking on the unrelaxable constraints, merit-ratio
trust-region update, then dataset and GP refresh (which run whether or not
the step was accepted).  A classical modifier-filter update is included as a
baseline.

All trust-region geometry lives in the scaled input box [0, 1]^n_u.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from . import acquisition as acq
from . import gp, nlp
from .errors import ConfigError, ContractViolationError, GPFitError, RunAbortedError
from .plants.base import BoxScaling, NominalModel, PlantOracle

SUBPROBLEM_STARTS = 20
FULL_STEP_RTOL = 1e-6
MERIT_DENOMINATOR_FLOOR = 1e-12
ACTIVE_CONSTRAINT_TOL = 1e-6
# The subproblem only certifies constraints to the solver's feasibility
# tolerance, so the plant-side backtracking check cannot be stricter: a
# measured violation counts once it exceeds the same tolerance.
PLANT_FEASIBILITY_TOL = 1e-6

KEEP_ALL = "keep_all"
MOST_RECENT = "most_recent"
NEAREST_NEIGHBORS = "nearest_neighbors"

REASON_NONE = "none"
REASON_LOW_MERIT = "low_merit"
REASON_MODEL_INFEASIBLE = "model_infeasible"
REASON_PLANT_INFEASIBLE = "plant_infeasible"


@dataclass(frozen=True)
class TrustRegionParams:
    """Fixed trust-region constants of the adaptation loop."""

    delta0: float
    eta1: float = 0.2
    eta2: float = 0.8
    gamma_red: float = 0.8
    gamma_inc: float = 1.2
    delta_max: float = 0.7
    criticality_mu: float = np.inf
    infeasible_shrink: Optional[float] = None  # defaults to gamma_red

    def __post_init__(self):
        if not (0.0 < self.eta1 < self.eta2 < 1.0):
            raise ContractViolationError("need 0 < eta1 < eta2 < 1")
        if not (0.0 < self.gamma_red < 1.0 < self.gamma_inc):
            raise ContractViolationError("need 0 < gamma_red < 1 < gamma_inc")
        if not (0.0 < self.delta0 < self.delta_max):
            raise ContractViolationError("need 0 < delta0 < delta_max")
        if self.criticality_mu <= 0:
            raise ContractViolationError("criticality_mu must be positive")
        if self.infeasible_shrink is None:
            object.__setattr__(self, "infeasible_shrink", self.gamma_red)
        if not (self.gamma_red <= self.infeasible_shrink <= 1.0):
            raise ContractViolationError(
                "infeasible_shrink must lie in [gamma_red, 1]"
            )


@dataclass(frozen=True)
class TrustRegionState:
    center: np.ndarray  # scaled
    radius: float
    iteration: int = 0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ContractViolationError("radius must be positive")
        if np.any(c < -1e-9) or np.any(c > 1 + 1e-9):
            raise ContractViolationError("center must lie in the scaled box")


class MismatchDataset:
    """Scaled inputs plus one mismatch vector per function, with retention.

    ``nominal_values`` keeps the nominal function values at each input so the
    plant observation (nominal + mismatch) can be reconstructed without
    re-evaluating the model.
    """

    def __init__(self, n_u: int, n_fun: int, retention: str = KEEP_ALL,
                 retention_n: int = 0, duplicate_radius: float = 1e-4):
        if retention not in (KEEP_ALL, MOST_RECENT, NEAREST_NEIGHBORS):
            raise ContractViolationError(f"unknown retention policy {retention!r}")
        if retention != KEEP_ALL and retention_n < 1:
            raise ContractViolationError("bounded retention needs retention_n >= 1")
        self.retention = retention
        self.retention_n = retention_n
        self.duplicate_radius = float(duplicate_radius)
        self.inputs = np.empty((0, n_u))
        self.mismatch = np.empty((n_fun, 0))
        self.nominal_values = np.empty((n_fun, 0))

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    def append(self, u_scaled, mismatch_values, nominal_values) -> bool:
        """Add one observation; returns False when rejected as a duplicate."""
        u_scaled = np.asarray(u_scaled, dtype=float).ravel()
        if self.size and self.duplicate_radius > 0:
            dists = np.linalg.norm(self.inputs - u_scaled, axis=1)
            if np.min(dists) < self.duplicate_radius:
                return False
        self.inputs = np.vstack((self.inputs, u_scaled))
        self.mismatch = np.hstack(
            (self.mismatch, np.asarray(mismatch_values, dtype=float)[:, None])
        )
        self.nominal_values = np.hstack(
            (self.nominal_values, np.asarray(nominal_values, dtype=float)[:, None])
        )
        return True

    def apply_retention(self, center_scaled) -> None:
        if self.retention == KEEP_ALL or self.size <= self.retention_n:
            return
        if self.retention == MOST_RECENT:
            keep = np.arange(self.size - self.retention_n, self.size)
        else:
            dists = np.linalg.norm(
                self.inputs - np.asarray(center_scaled, dtype=float), axis=1
            )
            keep = np.sort(np.argsort(dists)[: self.retention_n])
        self.inputs = self.inputs[keep]
        self.mismatch = self.mismatch[:, keep]
        self.nominal_values = self.nominal_values[:, keep]

    def observed_values(self, fun_index: int) -> np.ndarray:
        """Plant observations for one function: nominal + mismatch."""
        return self.nominal_values[fun_index] + self.mismatch[fun_index]


@dataclass(frozen=True)
class FitPolicy:
    """How the mismatch GPs are (re)fitted each iteration."""

    kernel_kind: str = gp.SQUARED_EXPONENTIAL
    noise_known: bool = False
    true_noise_std: Optional[np.ndarray] = None  # per function, when known
    n_starts: int = 10

    def options_for(self, fun_index: int, seed,
                    warm: Optional[gp.GPHyperparameters]) -> gp.FitOptions:
        if self.noise_known:
            if self.true_noise_std is None:
                raise ContractViolationError(
                    "noise_known requires the true noise stds"
                )
            return gp.FitOptions(
                kernel_kind=self.kernel_kind, n_starts=self.n_starts, seed=seed,
                noise_fixed=True, noise_std=float(self.true_noise_std[fun_index]),
                warm_start=warm,
            )
        return gp.FitOptions(
            kernel_kind=self.kernel_kind, n_starts=self.n_starts, seed=seed,
            warm_start=warm,
        )


@dataclass(frozen=True)
class ProblemBinding:
    """Everything the loop needs to talk to one plant."""

    plant: PlantOracle
    nominal: NominalModel
    scaling: BoxScaling
    unrelaxable: frozenset[int] = frozenset()
    acquisition: acq.AcquisitionSpec = acq.AcquisitionSpec()

    def __post_init__(self):
        if self.plant.n_u != self.nominal.n_u or self.plant.n_g != self.nominal.n_g:
            raise ContractViolationError("plant and nominal disagree on shapes")
        bad = [i for i in self.unrelaxable if not (1 <= i <= self.plant.n_g)]
        if bad:
            raise ContractViolationError(
                f"unrelaxable indices out of range: {bad}"
            )

    @property
    def n_u(self) -> int:
        return self.plant.n_u

    @property
    def n_g(self) -> int:
        return self.plant.n_g


@dataclass
class InitialDesign:
    """Either explicit scaled points (optionally with measurements) or the
    default rule: center plus +-delta0/2 along each scaled axis."""

    points_scaled: np.ndarray
    measurements: Optional[np.ndarray] = None  # (P, n_fun) preexisting data

    @classmethod
    def axis_design(cls, center_scaled, half_width: float) -> "InitialDesign":
        center = np.asarray(center_scaled, dtype=float).ravel()
        points = [center]
        for i in range(center.size):
            for sign in (+1.0, -1.0):
                p = center.copy()
                p[i] = np.clip(p[i] + sign * half_width, 0.0, 1.0)
                points.append(p)
        uniq = []
        for p in points:
            if not any(np.linalg.norm(p - q) < 1e-12 for q in uniq):
                uniq.append(p)
        return cls(points_scaled=np.array(uniq))

    @classmethod
    def explicit(cls, points_scaled, measurements=None) -> "InitialDesign":
        return cls(
            points_scaled=np.atleast_2d(np.asarray(points_scaled, dtype=float)),
            measurements=None if measurements is None
            else np.atleast_2d(np.asarray(measurements, dtype=float)),
        )


# ---------------------------------------------------------------------------
# Small pure pieces (unit-testable in isolation)
# ---------------------------------------------------------------------------

def merit_ratio(plant_cost_prev, plant_cost_new, model_cost_prev,
                model_cost_new):
    """Actual over predicted cost reduction; flags a degenerate denominator."""
    denom = model_cost_prev - model_cost_new
    if abs(denom) < MERIT_DENOMINATOR_FLOOR:
        return 0.0, True
    return (plant_cost_prev - plant_cost_new) / denom, False


def tr_radius_update(params: TrustRegionParams, delta: float, rho: Optional[float],
                     step_norm: float, model_infeasible: bool,
                     plant_infeasible: bool):
    """Steps 4 and 6 of the adaptation loop as a pure transition function.

    Returns (next_radius, accepted, reason).
    """
    if model_infeasible:
        return params.infeasible_shrink * delta, False, REASON_MODEL_INFEASIBLE
    if plant_infeasible:
        return params.infeasible_shrink * delta, False, REASON_PLANT_INFEASIBLE
    if rho > params.eta2 and step_norm >= delta * (1.0 - FULL_STEP_RTOL):
        return min(params.gamma_inc * delta, params.delta_max), True, REASON_NONE
    if rho < params.eta1:
        return params.gamma_red * delta, False, REASON_LOW_MERIT
    return delta, True, REASON_NONE


def reduced_gradient(grad: np.ndarray, active_grads: np.ndarray) -> np.ndarray:
    """Projection of ``grad`` onto the nullspace of the active constraint
    gradients (orthonormal basis via SVD); zero when they span R^n."""
    grad = np.asarray(grad, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(active_grads, dtype=float))
    if A.size == 0:
        return grad
    _, s, vt = linalg.svd(A)
    tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank >= grad.size:
        return np.zeros(0)
    basis = vt[rank:]  # rows: orthonormal nullspace basis
    return basis @ grad


def criticality_step(state: TrustRegionState, params: TrustRegionParams,
                     modified_cost_grad: np.ndarray,
                     active_constraint_grads: np.ndarray):
    """Single radius shrink when the TR outsizes the reduced-gradient norm.

    Skipped entirely (no-op) when criticality_mu is infinite.
    """
    if not np.isfinite(params.criticality_mu):
        return state, False
    red = reduced_gradient(modified_cost_grad, active_constraint_grads)
    if state.radius > params.criticality_mu * float(np.linalg.norm(red)):
        return replace(state, radius=params.gamma_red * state.radius), True
    return state, False


@dataclass
class Modifiers:
    """Classical MA modifiers: zeroth-order for constraints, first-order for
    cost and constraints."""

    eps: np.ndarray  # (n_g,)
    lam: np.ndarray  # (n_g + 1, n_u)

    @classmethod
    def zero(cls, n_u: int, n_g: int) -> "Modifiers":
        return cls(eps=np.zeros(n_g), lam=np.zeros((n_g + 1, n_u)))


def classical_ma_step(modifiers: Modifiers, plant_values, plant_gradients,
                      model_values, model_gradients, eta: float) -> Modifiers:
    """Filtered modifier update; eta in (0, 1]."""
    if not (0.0 < eta <= 1.0):
        raise ContractViolationError("eta must lie in (0, 1]")
    plant_values = np.asarray(plant_values, dtype=float)
    model_values = np.asarray(model_values, dtype=float)
    plant_gradients = np.asarray(plant_gradients, dtype=float)
    model_gradients = np.asarray(model_gradients, dtype=float)
    eps = (1.0 - eta) * modifiers.eps \
        + eta * (plant_values[1:] - model_values[1:])
    lam = (1.0 - eta) * modifiers.lam + eta * (plant_gradients - model_gradients)
    return Modifiers(eps=eps, lam=lam)


# ---------------------------------------------------------------------------
# Modified-problem evaluation (nominal + GP correction, scaled coordinates)
# ---------------------------------------------------------------------------

class ModifiedProblem:
    """Corrected cost/constraints and their gradients at scaled points.

    Per-point results are memoized: within one SLSQP iteration the objective,
    every constraint and all their gradients are requested at the same point,
    but the nominal model (a Newton solve or an ODE integration) only needs to
    run once.
    """

    def __init__(self, binding: ProblemBinding, gps: Sequence[gp.GPModel]):
        self.binding = binding
        self.gps = list(gps)
        self._cache: dict[bytes, dict] = {}

    def _entry(self, u_scaled: np.ndarray, need_grads: bool) -> dict:
        key = u_scaled.tobytes()
        entry = self._cache.get(key)
        if entry is None:
            if len(self._cache) > 8:
                self._cache.clear()
            entry = {"u": u_scaled.copy()}
            self._cache[key] = entry
        if "values" not in entry:
            u = self.binding.scaling.unscale(u_scaled)
            nominal = self.binding.nominal.eval(u)
            means = np.array([
                gp.posterior(m, u_scaled)[0] for m in self.gps
            ])
            entry["values"] = nominal + means
            entry["cost_std"] = float(
                np.sqrt(gp.posterior(self.gps[0], u_scaled)[1])
            )
        if need_grads and "grads" not in entry:
            u = self.binding.scaling.unscale(u_scaled)
            nominal_grads = self.binding.nominal.gradients(u) \
                * self.binding.scaling.span
            gp_grads = np.array([
                gp.posterior_mean_gradient(m, u_scaled) for m in self.gps
            ])
            entry["grads"] = nominal_grads + gp_grads
            entry["cost_std_grad"] = gp.posterior_std_gradient(
                self.gps[0], u_scaled
            )
        return entry

    def values(self, u_scaled) -> np.ndarray:
        return self._entry(np.asarray(u_scaled, dtype=float), False)["values"]

    def gradients(self, u_scaled) -> np.ndarray:
        return self._entry(np.asarray(u_scaled, dtype=float), True)["grads"]

    def cost_std(self, u_scaled) -> float:
        return self._entry(np.asarray(u_scaled, dtype=float), False)["cost_std"]

    def cost_std_gradient(self, u_scaled) -> np.ndarray:
        return self._entry(
            np.asarray(u_scaled, dtype=float), True
        )["cost_std_grad"]


def _resolve_incumbent(binding: ProblemBinding, dataset: MismatchDataset,
                       cost_gp: gp.GPModel) -> float:
    spec = binding.acquisition
    rule = spec.incumbent_rule
    if rule is None:
        rule = (acq.MIN_POSTERIOR_MEAN if cost_gp.hyper.noise_std > 0
                else acq.MIN_OBSERVATION)
    observed = dataset.observed_values(0)
    if rule == acq.MIN_OBSERVATION:
        return acq.incumbent(observed, rule=acq.MIN_OBSERVATION)
    means, _ = gp.posterior(cost_gp, dataset.inputs)
    predictor_means = dataset.nominal_values[0] + means
    return acq.incumbent(
        observed, rule=acq.MIN_POSTERIOR_MEAN, means_at_observed=predictor_means
    )


@dataclass
class SubproblemResult:
    step: np.ndarray
    infeasible: bool
    acq_value: Optional[float]
    used_finite_differences: bool
    model_cost_center: float
    model_cost_trial: float


def solve_subproblem(state: TrustRegionState, modified: ModifiedProblem,
                     dataset: MismatchDataset, seed=0,
                     starts: int = SUBPROBLEM_STARTS) -> SubproblemResult:
    """Acquisition-minimizing step inside TR ∩ box, modified constraints <= 0.

    When the problem is infeasible the returned step points at the
    least-violating point found by the feasibility phase.
    """
    binding = modified.binding
    center = state.center
    spec = binding.acquisition

    if spec.kind == acq.EI:
        incumbent_value = _resolve_incumbent(binding, dataset, modified.gps[0])

    def objective(d):
        point = center + d
        mean = float(modified.values(point)[0])
        if spec.kind == acq.MEAN_ONLY:
            return mean
        std = modified.cost_std(point)
        if spec.kind == acq.LCB:
            return acq.lcb(mean, std, spec.beta)
        return acq.ei(mean, std, incumbent_value)

    def objective_grad(d):
        point = center + d
        mean_grad = modified.gradients(point)[0]
        if spec.kind == acq.MEAN_ONLY:
            return mean_grad
        std_grad = modified.cost_std_gradient(point)
        if spec.kind == acq.LCB:
            return mean_grad - spec.beta * std_grad
        mean = float(modified.values(point)[0])
        std = modified.cost_std(point)
        dmu, dsigma = acq.ei_grad_terms(mean, std, incumbent_value)
        return dmu * mean_grad + dsigma * std_grad

    def make_constraint(i):
        def fun(d):
            return float(modified.values(center + d)[i])

        def grad(d):
            return modified.gradients(center + d)[i]

        return fun, grad

    cons, cons_grads = [], []
    for i in range(1, binding.n_g + 1):
        f, g = make_constraint(i)
        cons.append(f)
        cons_grads.append(g)

    problem = nlp.NLPProblem(
        objective=objective,
        objective_grad=objective_grad,
        constraints=cons,
        constraint_grads=cons_grads,
        lower=-center,
        upper=1.0 - center,
        ball=(np.zeros(binding.n_u), state.radius),
    )
    result = nlp.solve(problem, starts=starts, seed=seed)
    infeasible = result.status == nlp.STATUS_INFEASIBLE
    if result.status == nlp.STATUS_ALL_STARTS_FAILED:
        # Treat like a model infeasibility: back off and measure the center.
        d = np.zeros(binding.n_u)
        infeasible = True
    else:
        d = result.minimizer
    model_cost_center = float(modified.values(center)[0])
    model_cost_trial = float(modified.values(center + d)[0])
    return SubproblemResult(
        step=d,
        infeasible=infeasible,
        acq_value=None if infeasible else float(result.objective_value),
        used_finite_differences=result.used_finite_differences,
        model_cost_center=model_cost_center,
        model_cost_trial=model_cost_trial,
    )


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass
class IterationEntry:
    k: int
    center_unscaled: list
    center_scaled: list
    delta_start: float
    criticality_triggered: bool
    delta_used: float
    step_scaled: list
    step_norm: float
    trial_unscaled: list
    measured: list
    true_trial: list
    rho: Optional[float]
    merit_degenerate: bool
    accepted: bool
    reason: str
    acq_value: Optional[float]
    delta_next: float
    center_next_unscaled: list
    true_center_next: list
    gp_hyper: list
    fd_fallback: bool
    appended: bool
    dataset_size: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RTORunRecord:
    """Per-iteration audit log of one RTO run.

    ``feasibility_tol`` holds the per-constraint tolerance used when judging
    iterates feasible for reporting: one standard deviation of that
    constraint's measurement noise (exactly zero for noiseless runs), so a
    converged iterate riding the constraint within the noise level counts as
    feasible, the way the case-study figures treat it.
    """

    seed: int
    config: dict
    design_points_unscaled: list
    design_measured: list
    design_true: list
    initial_center_unscaled: list
    initial_delta: float
    feasibility_tol: list = field(default_factory=list)
    entries: list = field(default_factory=list)
    final_center_unscaled: list = field(default_factory=list)
    final_delta: float = 0.0
    n_plant_evals: int = 0
    aborted: bool = False
    abort_reason: Optional[str] = None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["entries"] = [e.to_dict() for e in self.entries]
        return out

    def iterate_true_costs(self):
        """Noiseless cost and feasibility of the center at k = 0..K."""
        tol = self.feasibility_tol or [0.0] * len(self.design_true[0])

        def feasible(values):
            return all(v <= t for v, t in zip(values[1:], tol[1:]))

        costs = [self.design_true[0][0]]
        feas = [feasible(self.design_true[0])]
        for e in self.entries:
            costs.append(e.true_center_next[0])
            feas.append(feasible(e.true_center_next))
        return np.array(costs), np.array(feas, dtype=bool)


# ---------------------------------------------------------------------------
# The adaptation loop
# ---------------------------------------------------------------------------

def _fit_all(dataset: MismatchDataset, policy: FitPolicy, seeds,
             warm: Optional[Sequence[gp.GPHyperparameters]] = None):
    models = []
    n_fun = dataset.mismatch.shape[0]
    for i in range(n_fun):
        options = policy.options_for(
            i, seeds[i], None if warm is None else warm[i]
        )
        models.append(gp.fit(dataset.inputs, dataset.mismatch[i], options))
    return models


def rto_step(state: TrustRegionState, dataset: MismatchDataset,
             gps: Sequence[gp.GPModel], binding: ProblemBinding,
             params: TrustRegionParams, policy: FitPolicy,
             center_measured: np.ndarray, seed_seq: np.random.SeedSequence):
    """One full iteration; returns (state', gps', entry, center_measured')."""
    nlp_seed, fit_seed = seed_seq.spawn(2)
    modified = ModifiedProblem(binding, gps)
    delta_start = state.radius

    # Step 1: criticality (optional).
    triggered = False
    if np.isfinite(params.criticality_mu):
        grads = modified.gradients(state.center)
        values = modified.values(state.center)
        active = [
            grads[i] for i in range(1, binding.n_g + 1)
            if values[i] >= -ACTIVE_CONSTRAINT_TOL
        ]
        active_mat = np.array(active) if active else np.empty((0, binding.n_u))
        state, triggered = criticality_step(state, params, grads[0], active_mat)
    delta_used = state.radius

    # Step 2: modified subproblem.
    sub = solve_subproblem(state, modified, dataset, seed=nlp_seed)
    d = sub.step
    trial_scaled = np.clip(state.center + d, 0.0, 1.0)
    trial_unscaled = binding.scaling.unscale(trial_scaled)

    # Step 3: single noisy plant measurement batch at the trial point.
    measured = binding.plant.measure(trial_unscaled)
    true_trial = binding.plant.true_eval(trial_unscaled)

    # Step 4: infeasibility backtracking (unrelaxable constraints only).
    plant_infeasible = (not sub.infeasible) and any(
        measured[i] > PLANT_FEASIBILITY_TOL for i in binding.unrelaxable
    )

    # Step 5: merit ratio (skipped on the backtracking branch).  A trial whose
    # predicted cost reduction is not positive (possible under EI/LCB, whose
    # minimizer needs not reduce the mean) earned no trust either: treated
    # like the degenerate denominator, forcing the rejection branch.
    rho, degenerate = None, False
    if not sub.infeasible and not plant_infeasible:
        rho, degenerate = merit_ratio(
            center_measured[0], measured[0],
            sub.model_cost_center, sub.model_cost_trial,
        )
        if sub.model_cost_center - sub.model_cost_trial \
                <= MERIT_DENOMINATOR_FLOOR:
            rho, degenerate = 0.0, True

    # Step 6: trust-region and center update.
    delta_next, accepted, reason = tr_radius_update(
        params, delta_used, rho, float(np.linalg.norm(d)),
        sub.infeasible, plant_infeasible,
    )
    if accepted:
        center_next = trial_scaled
        center_measured_next = measured
    else:
        center_next = state.center
        center_measured_next = center_measured

    # Step 7: dataset update runs irrespective of acceptance.
    nominal_trial = binding.nominal.eval(trial_unscaled)
    appended = dataset.append(
        trial_scaled, measured - nominal_trial, nominal_trial
    )
    dataset.apply_retention(center_next)

    # Step 8: GP refresh, warm-started from the current hyperparameters.
    warm = [m.hyper for m in gps]
    new_gps = _fit_all(
        dataset, policy, fit_seed.spawn(binding.n_g + 1), warm=warm
    )

    new_state = TrustRegionState(
        center=center_next, radius=delta_next, iteration=state.iteration + 1
    )
    true_center_next = (
        true_trial if accepted else binding.plant.true_eval(
            binding.scaling.unscale(state.center))
    )
    entry = IterationEntry(
        k=state.iteration,
        center_unscaled=list(map(float, binding.scaling.unscale(state.center))),
        center_scaled=list(map(float, state.center)),
        delta_start=float(delta_start),
        criticality_triggered=bool(triggered),
        delta_used=float(delta_used),
        step_scaled=list(map(float, d)),
        step_norm=float(np.linalg.norm(d)),
        trial_unscaled=list(map(float, trial_unscaled)),
        measured=list(map(float, measured)),
        true_trial=list(map(float, true_trial)),
        rho=None if rho is None else float(rho),
        merit_degenerate=bool(degenerate),
        accepted=bool(accepted),
        reason=reason,
        acq_value=sub.acq_value,
        delta_next=float(delta_next),
        center_next_unscaled=list(
            map(float, binding.scaling.unscale(center_next))),
        true_center_next=list(map(float, true_center_next)),
        gp_hyper=[m.hyper.to_dict() for m in gps],
        fd_fallback=bool(sub.used_finite_differences),
        appended=bool(appended),
        dataset_size=dataset.size,
    )
    return new_state, new_gps, entry, center_measured_next


def run(binding: ProblemBinding, params: TrustRegionParams,
        design: Optional[InitialDesign], budget: int, seed: int,
        policy: FitPolicy = FitPolicy(), config_echo: Optional[dict] = None,
        retention: str = KEEP_ALL, retention_n: int = 0,
        duplicate_radius: float = 1e-4,
        initial_center_scaled=None) -> RTORunRecord:
    """Full RTO run: initialization plus ``budget`` iterations.

    Deterministic per ``seed``: the plant noise stream is reset from it and
    all fit/solve streams derive from it.
    """
    root = np.random.SeedSequence(seed)
    plant_seed, algo_seed = root.spawn(2)
    binding.plant.reset(plant_seed)

    if design is None:
        if initial_center_scaled is None:
            raise ConfigError("need an initial design or an initial center")
        design = InitialDesign.axis_design(
            initial_center_scaled, params.delta0 / 2.0
        )
    center0 = np.asarray(design.points_scaled[0], dtype=float)
    center0_unscaled = binding.scaling.unscale(center0)

    true_center0 = binding.plant.true_eval(center0_unscaled)
    for i in binding.unrelaxable:
        if true_center0[i] > PLANT_FEASIBILITY_TOL:
            raise ConfigError(
                f"initial center violates unrelaxable plant constraint {i}"
            )

    dataset = MismatchDataset(
        n_u=binding.n_u, n_fun=binding.n_g + 1, retention=retention,
        retention_n=retention_n, duplicate_radius=duplicate_radius,
    )
    design_measured, design_true = [], []
    center_measured = None
    for idx, point in enumerate(design.points_scaled):
        point_unscaled = binding.scaling.unscale(point)
        if design.measurements is not None:
            values = np.asarray(design.measurements[idx], dtype=float)
        else:
            values = binding.plant.measure(point_unscaled)
        nominal = binding.nominal.eval(point_unscaled)
        dataset.append(point, values - nominal, nominal)
        design_measured.append(list(map(float, values)))
        design_true.append(
            list(map(float, binding.plant.true_eval(point_unscaled)))
        )
        if idx == 0:
            center_measured = values

    record = RTORunRecord(
        seed=int(seed),
        config=dict(config_echo or {}),
        design_points_unscaled=[
            list(map(float, binding.scaling.unscale(p)))
            for p in design.points_scaled
        ],
        design_measured=design_measured,
        design_true=design_true,
        initial_center_unscaled=list(map(float, center0_unscaled)),
        initial_delta=float(params.delta0),
        feasibility_tol=list(map(float, binding.plant.noise_std)),
    )

    iter_seeds = algo_seed.spawn(budget + 1)
    try:
        gps = _fit_all(
            dataset, policy, iter_seeds[0].spawn(binding.n_g + 1)
        )
    except GPFitError as err:
        record.aborted = True
        record.abort_reason = f"initial GP fit failed: {err}"
        raise RunAbortedError(str(err), record=record) from err

    state = TrustRegionState(center=center0, radius=params.delta0, iteration=0)
    for k in range(budget):
        try:
            state, gps, entry, center_measured = rto_step(
                state, dataset, gps, binding, params, policy,
                center_measured, iter_seeds[k + 1],
            )
        except GPFitError as err:
            record.aborted = True
            record.abort_reason = f"GP fit failed at iteration {k}: {err}"
            record.final_center_unscaled = list(
                map(float, binding.scaling.unscale(state.center)))
            record.final_delta = float(state.radius)
            record.n_plant_evals = binding.plant.n_measurements
            raise RunAbortedError(str(err), record=record) from err
        record.entries.append(entry)

    record.final_center_unscaled = list(
        map(float, binding.scaling.unscale(state.center)))
    record.final_delta = float(state.radius)
    record.n_plant_evals = binding.plant.n_measurements
    return record
