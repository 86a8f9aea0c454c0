"""Multistart local solver for the smooth trust-region subproblems.

Minimizes a scalar objective over box ∩ Euclidean ball subject to smooth
inequality constraints (feasible iff <= 0).  Local solves use SLSQP; starts
are sampled uniformly in the feasible geometry with per-start seed streams so
the start set for k starts is a prefix of the set for k+1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ContractViolationError

# SLSQP probes marginally outside the box during line searches and warns
# while clipping; the clipped iterate is what we consume.
warnings.filterwarnings(
    "ignore",
    message="Values in x were outside bounds during a minimize step",
    category=RuntimeWarning,
)

FEASIBILITY_TOL = 1e-6
GEOMETRY_TOL = 1e-8
_FD_STEP = 1e-6
_REJECTION_CAP = 1000

STATUS_SUCCESS = "success"
STATUS_INFEASIBLE = "infeasible"
STATUS_ALL_STARTS_FAILED = "all_starts_failed"


@dataclass
class NLPProblem:
    """Objective + inequality constraints over a box, optionally ∩ a ball.

    Gradients are analytic callables; any left as ``None`` falls back to
    central finite differences and the result is flagged.
    """

    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    objective_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraints: Sequence[Callable[[np.ndarray], float]] = field(default_factory=list)
    constraint_grads: Optional[Sequence[Optional[Callable]]] = None
    ball: Optional[tuple[np.ndarray, float]] = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape:
            raise ContractViolationError("box bounds disagree on dimension")
        if np.any(self.lower > self.upper):
            raise ContractViolationError("box requires lower <= upper")
        if self.ball is not None:
            center, radius = self.ball
            center = np.asarray(center, dtype=float).ravel()
            if center.shape != self.lower.shape:
                raise ContractViolationError("ball center dimension mismatch")
            if radius <= 0:
                raise ContractViolationError("ball radius must be positive")
            self.ball = (center, float(radius))
        if self.constraint_grads is not None and (
            len(self.constraint_grads) != len(self.constraints)
        ):
            raise ContractViolationError("one gradient slot per constraint")

    @property
    def n_dim(self) -> int:
        return self.lower.shape[0]


@dataclass
class NLPResult:
    minimizer: np.ndarray
    objective_value: float
    status: str
    max_constraint_violation: float
    starts_attempted: int
    used_finite_differences: bool = False


def _central_diff(fun, x, h=_FD_STEP):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def _violation(problem: NLPProblem, x: np.ndarray) -> float:
    v = 0.0
    for g in problem.constraints:
        v = max(v, float(g(x)))
    if problem.ball is not None:
        center, radius = problem.ball
        v = max(v, float(np.linalg.norm(x - center) - radius))
    v = max(v, float(np.max(problem.lower - x, initial=0.0)))
    v = max(v, float(np.max(x - problem.upper, initial=0.0)))
    return max(v, 0.0)


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _sample_starts(problem: NLPProblem, n: int, seed) -> list[np.ndarray]:
    """Uniform rejection sampling in box ∩ ball, one child stream per start.

    Capped at _REJECTION_CAP proposals per start; on cap exhaustion a box
    sample is projected onto the ball.
    """
    children = _as_seedseq(seed).spawn(n)
    lo, hi = problem.lower, problem.upper
    starts = []
    for child in children:
        rng = np.random.default_rng(child)
        point = None
        if problem.ball is None:
            point = lo + rng.random(problem.n_dim) * (hi - lo)
        else:
            center, radius = problem.ball
            for _ in range(_REJECTION_CAP):
                cand = lo + rng.random(problem.n_dim) * (hi - lo)
                if np.linalg.norm(cand - center) <= radius:
                    point = cand
                    break
            if point is None:
                cand = lo + rng.random(problem.n_dim) * (hi - lo)
                gap = cand - center
                norm = np.linalg.norm(gap)
                if norm > radius and norm > 0:
                    cand = center + gap * (radius / norm)
                point = np.clip(cand, lo, hi)
        starts.append(point)
    return starts


def _wrap_objective(problem: NLPProblem):
    used_fd = False
    if problem.objective_grad is None:
        used_fd = True

        def jac(x):
            return _central_diff(problem.objective, x)
    else:
        jac = problem.objective_grad
    return problem.objective, jac, used_fd


def _scipy_constraints(problem: NLPProblem):
    """SLSQP wants fun >= 0; our constraints are feasible iff <= 0."""
    cons = []
    used_fd = False
    grads = problem.constraint_grads or [None] * len(problem.constraints)
    for g, dg in zip(problem.constraints, grads):
        if dg is None:
            used_fd = True

            def jac(x, _g=g):
                return -_central_diff(_g, x)
        else:

            def jac(x, _dg=dg):
                return -np.asarray(_dg(x), dtype=float)

        cons.append({
            "type": "ineq",
            "fun": lambda x, _g=g: -float(_g(x)),
            "jac": jac,
        })
    if problem.ball is not None:
        center, radius = problem.ball
        cons.append({
            "type": "ineq",
            "fun": lambda x: radius**2 - float(np.sum((x - center) ** 2)),
            "jac": lambda x: -2.0 * (x - center),
        })
    return cons, used_fd


def solve(problem: NLPProblem, starts: int = 20, seed=0) -> NLPResult:
    """Best feasible local solution over `starts` sampled starts + ball center.

    Falls back to a dedicated feasibility phase when no start yields a
    feasible local solution; only that phase may report ``infeasible``.
    """
    if starts < 1:
        raise ContractViolationError("starts must be >= 1")
    obj, obj_jac, fd_obj = _wrap_objective(problem)
    cons, fd_cons = _scipy_constraints(problem)
    used_fd = fd_obj or fd_cons
    bounds = list(zip(problem.lower, problem.upper))

    points = _sample_starts(problem, starts, seed)
    if problem.ball is not None:
        points.append(np.clip(problem.ball[0], problem.lower, problem.upper))

    best = None  # (objective, order index, x)
    any_finite = False
    for idx, x0 in enumerate(points):
        try:
            res = minimize(
                obj, x0, jac=obj_jac, bounds=bounds, constraints=cons,
                method="SLSQP", options={"maxiter": 200, "ftol": 1e-12},
            )
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
            continue
        any_finite = True
        x = np.clip(res.x, problem.lower, problem.upper)
        if _violation(problem, x) <= FEASIBILITY_TOL:
            f = float(obj(x))
            # Ties break to the lowest start index by first-wins iteration order.
            if best is None or f < best[0]:
                best = (f, idx, x)
    if best is not None:
        return NLPResult(
            minimizer=best[2],
            objective_value=best[0],
            status=STATUS_SUCCESS,
            max_constraint_violation=_violation(problem, best[2]),
            starts_attempted=len(points),
            used_finite_differences=used_fd,
        )

    # Feasibility phase: certify whether any feasible point exists.
    feas = find_feasible(
        problem, starts=starts, seed=_as_seedseq(seed).spawn(starts + 1)[-1]
    )
    if feas.status == STATUS_INFEASIBLE:
        feas.starts_attempted += len(points)
        return feas
    if feas.status == STATUS_SUCCESS:
        # One more local solve from the certified feasible point.
        try:
            res = minimize(
                obj, feas.minimizer, jac=obj_jac, bounds=bounds,
                constraints=cons, method="SLSQP",
                options={"maxiter": 200, "ftol": 1e-12},
            )
            x = np.clip(res.x, problem.lower, problem.upper)
            if np.all(np.isfinite(x)) and _violation(problem, x) <= FEASIBILITY_TOL:
                return NLPResult(
                    minimizer=x,
                    objective_value=float(obj(x)),
                    status=STATUS_SUCCESS,
                    max_constraint_violation=_violation(problem, x),
                    starts_attempted=len(points) + feas.starts_attempted + 1,
                    used_finite_differences=used_fd,
                )
        except (ValueError, FloatingPointError):
            pass
        return NLPResult(
            minimizer=feas.minimizer,
            objective_value=float(obj(feas.minimizer)),
            status=STATUS_SUCCESS,
            max_constraint_violation=feas.max_constraint_violation,
            starts_attempted=len(points) + feas.starts_attempted,
            used_finite_differences=used_fd,
        )
    if any_finite:
        # Local solves produced finite iterates but nothing feasible and the
        # feasibility phase also failed numerically.
        return NLPResult(
            minimizer=points[0],
            objective_value=np.inf,
            status=STATUS_ALL_STARTS_FAILED,
            max_constraint_violation=_violation(problem, points[0]),
            starts_attempted=len(points),
            used_finite_differences=used_fd,
        )
    return NLPResult(
        minimizer=points[0],
        objective_value=np.inf,
        status=STATUS_ALL_STARTS_FAILED,
        max_constraint_violation=_violation(problem, points[0]),
        starts_attempted=len(points),
        used_finite_differences=used_fd,
    )


def find_feasible(problem: NLPProblem, starts: int = 20, seed=0) -> NLPResult:
    """Minimize the worst constraint violation over box ∩ ball.

    Solved as the smooth slack program min s  s.t.  g_i(u) <= s, s >= 0 with
    the geometry on u.  ``infeasible`` iff the best achieved violation
    exceeds the feasibility tolerance.
    """
    if starts < 1:
        raise ContractViolationError("starts must be >= 1")
    n = problem.n_dim
    grads = problem.constraint_grads or [None] * len(problem.constraints)
    used_fd = any(dg is None for dg in grads) and bool(problem.constraints)

    def slack_obj(z):
        return float(z[-1])

    def slack_jac(z):
        g = np.zeros(n + 1)
        g[-1] = 1.0
        return g

    cons = []
    for gfun, dg in zip(problem.constraints, grads):
        def fun(z, _g=gfun):
            return float(z[-1]) - float(_g(z[:n]))

        if dg is None:
            def jac(z, _g=gfun):
                out = np.empty(n + 1)
                out[:n] = -_central_diff(_g, z[:n])
                out[-1] = 1.0
                return out
        else:
            def jac(z, _dg=dg):
                out = np.empty(n + 1)
                out[:n] = -np.asarray(_dg(z[:n]), dtype=float)
                out[-1] = 1.0
                return out

        cons.append({"type": "ineq", "fun": fun, "jac": jac})
    if problem.ball is not None:
        center, radius = problem.ball
        cons.append({
            "type": "ineq",
            "fun": lambda z: radius**2 - float(np.sum((z[:n] - center) ** 2)),
            "jac": lambda z: np.concatenate((-2.0 * (z[:n] - center), [0.0])),
        })
    bounds = list(zip(problem.lower, problem.upper)) + [(0.0, None)]

    points = _sample_starts(problem, starts, seed)
    if problem.ball is not None:
        points.append(np.clip(problem.ball[0], problem.lower, problem.upper))

    best_x, best_v = None, np.inf
    for x0 in points:
        v0 = _violation(problem, x0)
        if v0 < best_v:
            best_x, best_v = x0, v0
        z0 = np.concatenate((x0, [max(v0, 0.0)]))
        try:
            res = minimize(
                slack_obj, z0, jac=slack_jac, bounds=bounds, constraints=cons,
                method="SLSQP", options={"maxiter": 200, "ftol": 1e-12},
            )
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.x)):
            continue
        x = np.clip(res.x[:n], problem.lower, problem.upper)
        v = _violation(problem, x)
        if v < best_v:
            best_x, best_v = x, v
    if best_x is None:
        return NLPResult(
            minimizer=np.clip(np.zeros(n), problem.lower, problem.upper),
            objective_value=np.inf,
            status=STATUS_ALL_STARTS_FAILED,
            max_constraint_violation=np.inf,
            starts_attempted=len(points),
            used_finite_differences=used_fd,
        )
    status = STATUS_SUCCESS if best_v <= FEASIBILITY_TOL else STATUS_INFEASIBLE
    return NLPResult(
        minimizer=best_x,
        objective_value=best_v,
        status=status,
        max_constraint_violation=best_v,
        starts_attempted=len(points),
        used_finite_differences=used_fd,
    )
