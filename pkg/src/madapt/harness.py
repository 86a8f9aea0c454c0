"""Configuration-driven experiment runner.

Builds plant bindings from a flat JSON config, runs seeded ensembles over
noise realizations (all sharing one initial design), writes per-run JSON/CSV
records plus ensemble summaries, and expands ablation matrices over config
axes.  Percentiles are nearest-rank over the truly-feasible iterates.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import acquisition as acq
from . import algorithm as alg
from . import gp, nlp
from .errors import ConfigError, RunAbortedError
from .plants import pbr, quadratic, williams_otto, zero_model

PERCENTILE = 95.0
_FLOAT_FMT = "%.15g"

_PLANT_DEFAULTS = {
    "quadratic": {
        "delta0": 0.2, "kernel": gp.SQUARED_EXPONENTIAL,
        "infeasible_shrink": 0.8,
    },
    "williams-otto": {
        "delta0": 0.3, "kernel": gp.SQUARED_EXPONENTIAL,
        "infeasible_shrink": 0.8,
    },
    "pbr": {
        "delta0": 0.15, "kernel": gp.MATERN_3_2,
        "infeasible_shrink": 1.0,
    },
}

_BOOL_KEYS = ("noise_known", "prior_model", "perfect_model", "noise", "quick")


@dataclass
class ExperimentConfig:
    """Flat, JSON-compatible experiment description."""

    plant: str = "quadratic"
    acquisition: str = acq.EI
    beta: float = 2.0
    incumbent_rule: Optional[str] = None
    noise_known: bool = False
    prior_model: bool = True
    perfect_model: bool = False
    noise: bool = True
    eta1: float = 0.2
    eta2: float = 0.8
    gamma_red: float = 0.8
    gamma_inc: float = 1.2
    delta0: Optional[float] = None
    delta_max: float = 0.7
    criticality_mu: float = math.inf
    infeasible_shrink: Optional[float] = None
    retention: str = alg.KEEP_ALL
    retention_n: int = 0
    duplicate_radius: float = 1e-4
    kernel: Optional[str] = None
    budget: int = 20
    ensemble: int = 30
    base_seed: int = 0
    outdir: str = "runs"
    workers: int = 0
    pbr_stages: int = 6
    quick: bool = False
    initial_center: Optional[list] = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        allowed = set(cls.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if raw.get("criticality_mu") in ("inf", "Infinity"):
            raw = dict(raw)
            raw["criticality_mu"] = math.inf
        return cls(**raw)

    def validate(self) -> None:
        if self.plant not in _PLANT_DEFAULTS:
            raise ConfigError(
                f"unknown plant {self.plant!r}; pick one of "
                f"{sorted(_PLANT_DEFAULTS)}"
            )
        if self.acquisition not in (acq.MEAN_ONLY, acq.LCB, acq.EI):
            raise ConfigError(f"unknown acquisition {self.acquisition!r}")
        if self.incumbent_rule not in (
            None, acq.MIN_OBSERVATION, acq.MIN_POSTERIOR_MEAN
        ):
            raise ConfigError(f"unknown incumbent rule {self.incumbent_rule!r}")
        for key in _BOOL_KEYS:
            if not isinstance(getattr(self, key), bool):
                raise ConfigError(f"{key} must be a boolean")
        if self.kernel is not None and self.kernel not in (
            gp.SQUARED_EXPONENTIAL, gp.MATERN_3_2
        ):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.retention not in (
            alg.KEEP_ALL, alg.MOST_RECENT, alg.NEAREST_NEIGHBORS
        ):
            raise ConfigError(f"unknown retention {self.retention!r}")
        if self.retention != alg.KEEP_ALL and self.retention_n < 1:
            raise ConfigError("bounded retention needs retention_n >= 1")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.ensemble < 1:
            raise ConfigError("ensemble size must be >= 1")
        if self.plant == "pbr" and self.noise_known:
            raise ConfigError(
                "noise_known is not supported for the pbr plant: its noise "
                "enters through measured states, not per-function values"
            )
        if self.plant == "pbr" and self.pbr_stages < 1:
            raise ConfigError("pbr_stages must be >= 1")
        if not (0.0 < self.eta1 < self.eta2 < 1.0):
            raise ConfigError("need 0 < eta1 < eta2 < 1")

    def resolved(self) -> "ExperimentConfig":
        """Fill plant-dependent defaults (delta0, kernel, shrink, quick mode)."""
        cfg = ExperimentConfig(**asdict(self))
        defaults = _PLANT_DEFAULTS[cfg.plant]
        if cfg.quick and cfg.plant == "pbr":
            cfg.pbr_stages = 3
            cfg.ensemble = min(cfg.ensemble, 3)
            cfg.budget = min(cfg.budget, 25)
        if cfg.delta0 is None:
            cfg.delta0 = defaults["delta0"]
        if cfg.kernel is None:
            cfg.kernel = defaults["kernel"]
        if cfg.infeasible_shrink is None:
            cfg.infeasible_shrink = defaults["infeasible_shrink"]
        return cfg

    def echo(self) -> dict:
        out = asdict(self)
        if math.isinf(out["criticality_mu"]):
            out["criticality_mu"] = "inf"
        return out


def build_binding(cfg: ExperimentConfig, seed=0) -> alg.ProblemBinding:
    """Plant oracle + nominal model + scaling + acquisition for one run."""
    spec = acq.AcquisitionSpec(
        kind=cfg.acquisition, beta=cfg.beta, incumbent_rule=cfg.incumbent_rule
    )
    if cfg.plant == "quadratic":
        plant = quadratic.make_oracle(seed=seed, noisy=cfg.noise)
        nominal = (
            quadratic.make_nominal(perfect=cfg.perfect_model)
            if cfg.prior_model else zero_model(2, 1)
        )
        scaling = quadratic.make_scaling()
        unrelaxable = frozenset({1})
    elif cfg.plant == "williams-otto":
        plant = williams_otto.make_oracle(seed=seed, noisy=cfg.noise)
        nominal = (
            williams_otto.make_nominal(perfect=cfg.perfect_model)
            if cfg.prior_model else zero_model(2, 2)
        )
        scaling = williams_otto.make_scaling()
        unrelaxable = frozenset({1, 2})
    else:
        stages = cfg.pbr_stages
        plant = pbr.make_oracle(n_stages=stages, seed=seed, noisy=cfg.noise)
        par = pbr.ControlParameterization(stages)
        nominal = (
            pbr.make_nominal(n_stages=stages) if cfg.prior_model
            else zero_model(par.n_u, par.n_g)
        )
        scaling = pbr.make_scaling(stages)
        unrelaxable = frozenset(range(1, par.n_g + 1))
    return alg.ProblemBinding(
        plant=plant, nominal=nominal, scaling=scaling,
        unrelaxable=unrelaxable, acquisition=spec,
    )


def default_initial_center(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.initial_center is not None:
        return np.asarray(cfg.initial_center, dtype=float)
    if cfg.plant == "quadratic":
        return quadratic.DEFAULT_INITIAL_CENTER.copy()
    if cfg.plant == "williams-otto":
        return williams_otto.DEFAULT_INITIAL_CENTER.copy()
    return pbr.default_initial_center(cfg.pbr_stages)


def _tr_params(cfg: ExperimentConfig) -> alg.TrustRegionParams:
    return alg.TrustRegionParams(
        delta0=cfg.delta0, eta1=cfg.eta1, eta2=cfg.eta2,
        gamma_red=cfg.gamma_red, gamma_inc=cfg.gamma_inc,
        delta_max=cfg.delta_max, criticality_mu=cfg.criticality_mu,
        infeasible_shrink=cfg.infeasible_shrink,
    )


def _fit_policy(cfg: ExperimentConfig,
                binding: alg.ProblemBinding) -> alg.FitPolicy:
    return alg.FitPolicy(
        kernel_kind=cfg.kernel,
        noise_known=cfg.noise_known,
        true_noise_std=binding.plant.noise_std if cfg.noise_known else None,
    )


def run_single(cfg: ExperimentConfig, seed: int) -> alg.RTORunRecord:
    """One seeded RTO run of a resolved config."""
    cfg = cfg.resolved()
    binding = build_binding(cfg, seed=seed)
    params = _tr_params(cfg)
    center_scaled = binding.scaling.scale(default_initial_center(cfg))
    return alg.run(
        binding, params, design=None, budget=cfg.budget, seed=seed,
        policy=_fit_policy(cfg, binding), config_echo=cfg.echo(),
        retention=cfg.retention, retention_n=cfg.retention_n,
        duplicate_radius=cfg.duplicate_radius,
        initial_center_scaled=center_scaled,
    )


def _run_single_worker(payload):
    cfg_dict, seed = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        record = run_single(cfg, seed)
        return seed, record.to_dict(), None
    except RunAbortedError as err:
        partial = err.record.to_dict() if err.record is not None else None
        return seed, partial, str(err)


def nearest_rank_percentile(values, percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p/100*n)-th smallest value."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        return math.nan
    rank = max(1, math.ceil(percentile / 100.0 * arr.size))
    return float(arr[rank - 1])


@dataclass
class EnsembleSummary:
    """Feasible-iterate cost envelope and per-run terminal diagnostics."""

    config: dict
    seeds: list
    iterations: list
    percentile_cost: list
    n_feasible: list
    per_run: list = field(default_factory=list)
    infeasible_trials: int = 0
    aborted_seeds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _feasible_costs(record_dict) -> tuple[np.ndarray, np.ndarray]:
    true0 = record_dict["design_true"][0]
    tol = record_dict.get("feasibility_tol") or [0.0] * len(true0)

    def feasible(values):
        return all(v <= t for v, t in zip(values[1:], tol[1:]))

    costs = [true0[0]]
    feas = [feasible(true0)]
    for e in record_dict["entries"]:
        costs.append(e["true_center_next"][0])
        feas.append(feasible(e["true_center_next"]))
    return np.array(costs), np.array(feas, dtype=bool)


def summarize_records(cfg: ExperimentConfig, records: dict,
                      aborted: dict) -> EnsembleSummary:
    """Ensemble statistics over completed run records (dict form)."""
    budget = cfg.budget
    iterations = list(range(budget + 1))
    percentile_cost, n_feasible = [], []
    trajectories = {}
    for seed, rec in records.items():
        trajectories[seed] = _feasible_costs(rec)
    for k in iterations:
        vals = []
        for costs, feas in trajectories.values():
            if k < costs.size and feas[k]:
                vals.append(costs[k])
        n_feasible.append(len(vals))
        percentile_cost.append(
            nearest_rank_percentile(vals, PERCENTILE) if vals else None
        )
    per_run = []
    infeasible_trials = 0
    for seed, rec in records.items():
        costs, feas = trajectories[seed]
        feasible_vals = costs[feas]
        best = float(np.min(feasible_vals)) if feasible_vals.size else None
        last_feasible = (
            float(feasible_vals[-1]) if feasible_vals.size else None
        )
        n_inf = sum(
            1 for e in rec["entries"]
            if e["reason"] in (alg.REASON_MODEL_INFEASIBLE,
                               alg.REASON_PLANT_INFEASIBLE)
        )
        infeasible_trials += n_inf
        per_run.append({
            "seed": seed,
            "best_feasible_cost": best,
            "final_cost": float(costs[-1]),
            "final_feasible": bool(feas[-1]),
            "last_feasible_cost": last_feasible,
            "infeasible_trials": n_inf,
            "n_plant_evals": rec["n_plant_evals"],
        })
    return EnsembleSummary(
        config=cfg.echo(),
        seeds=sorted(records),
        iterations=iterations,
        percentile_cost=percentile_cost,
        n_feasible=n_feasible,
        per_run=per_run,
        infeasible_trials=infeasible_trials,
        aborted_seeds=sorted(aborted),
    )


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def write_run_csv(record_dict: dict, path) -> None:
    """Flat per-iteration rows; the final row carries the terminal center."""
    n_u = len(record_dict["initial_center_unscaled"])
    n_fun = len(record_dict["design_measured"][0])
    header = (
        ["k"] + [f"u_{i+1}" for i in range(n_u)] + ["delta", "rho", "accepted",
        "reason"] + [f"Gp_{i}" for i in range(n_fun)] + ["acq_value"]
    )
    lines = [",".join(header)]
    for e in record_dict["entries"]:
        row = (
            [e["k"]] + list(e["center_unscaled"]) + [e["delta_used"], e["rho"],
            e["accepted"], e["reason"]] + list(e["measured"]) + [e["acq_value"]]
        )
        lines.append(",".join(_fmt(v) for v in row))
    final_k = len(record_dict["entries"])
    row = (
        [final_k] + list(record_dict["final_center_unscaled"])
        + [record_dict["final_delta"], None, None, ""]
        + [None] * n_fun + [None]
    )
    lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_ensemble_csv(summary: EnsembleSummary, path) -> None:
    lines = ["iteration,percentile_cost,n_feasible"]
    for k, cost, n in zip(summary.iterations, summary.percentile_cost,
                          summary.n_feasible):
        lines.append(f"{k},{_fmt(cost)},{n}")
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(cfg: ExperimentConfig, write_files: bool = True,
                   return_records: bool = False):
    """M seeded runs (base_seed .. base_seed+M-1) sharing one initial design.

    Aborted runs are recorded and the ensemble continues.  Artifacts:
    run_<seed>.json, run_<seed>.csv, ensemble.csv, summary.json.  With
    ``return_records`` the (summary, records-by-seed) pair is returned.
    """
    cfg = cfg.resolved()
    seeds = [cfg.base_seed + i for i in range(cfg.ensemble)]
    payloads = [(asdict(cfg), seed) for seed in seeds]
    records, aborted = {}, {}
    max_workers = cfg.workers or min(len(seeds), os.cpu_count() or 1)
    if max_workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            for seed, rec, err in pool.map(_run_single_worker, payloads):
                if err is None:
                    records[seed] = rec
                else:
                    aborted[seed] = {"error": err, "partial": rec}
    else:
        for payload in payloads:
            seed, rec, err = _run_single_worker(payload)
            if err is None:
                records[seed] = rec
            else:
                aborted[seed] = {"error": err, "partial": rec}

    summary = summarize_records(cfg, records, aborted)
    if write_files:
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for seed, rec in records.items():
            (outdir / f"run_{seed}.json").write_text(json.dumps(rec))
            write_run_csv(rec, outdir / f"run_{seed}.csv")
        for seed, info in aborted.items():
            (outdir / f"run_{seed}.aborted.json").write_text(json.dumps(info))
        write_ensemble_csv(summary, outdir / "ensemble.csv")
        (outdir / "summary.json").write_text(json.dumps(summary.to_dict()))
    if return_records:
        return summary, records
    return summary


def ablation_matrix(base: ExperimentConfig, axes: dict) -> list[ExperimentConfig]:
    """Cartesian product of config overrides; seeds stay shared."""
    for key in axes:
        if key not in base.__dataclass_fields__:
            raise ConfigError(f"unknown ablation axis {key!r}")
    configs = [base]
    for key, values in axes.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"axis {key!r} needs a nonempty list of values")
        expanded = []
        for cfg in configs:
            for value in values:
                d = asdict(cfg)
                d[key] = value
                expanded.append(ExperimentConfig.from_dict(d))
        configs = expanded
    return configs


def _axis_label(cfg: ExperimentConfig, axes: dict) -> str:
    return "__".join(f"{k}={getattr(cfg, k)}" for k in axes)


def run_ablation(base: ExperimentConfig, axes: dict,
                 write_files: bool = True) -> list[tuple[str, EnsembleSummary]]:
    """Run every experiment of the matrix; rank by terminal envelope cost."""
    results = []
    for cfg in ablation_matrix(base, axes):
        label = _axis_label(cfg, axes) or "base"
        sub = ExperimentConfig.from_dict({
            **asdict(cfg), "outdir": str(Path(base.outdir) / label)
        })
        summary = run_experiment(sub, write_files=write_files)
        results.append((label, summary))
    ranked = sorted(
        results,
        key=lambda item: (
            math.inf if item[1].percentile_cost[-1] is None
            else item[1].percentile_cost[-1]
        ),
    )
    if write_files:
        outdir = Path(base.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        lines = ["label,terminal_percentile_cost,n_feasible_terminal"]
        for label, summary in ranked:
            lines.append(
                f"{label},{_fmt(summary.percentile_cost[-1])},"
                f"{summary.n_feasible[-1]}"
            )
        (outdir / "ablation_summary.csv").write_text("\n".join(lines) + "\n")
        (outdir / "ablation_summary.json").write_text(json.dumps({
            "ranking": [
                {"label": label,
                 "terminal_percentile_cost": summary.percentile_cost[-1]}
                for label, summary in ranked
            ]
        }))
    return ranked


# ---------------------------------------------------------------------------
# Derived plant optima and grid exports (for acceptance and plotting)
# ---------------------------------------------------------------------------

def plant_optimum(plant: str, seed: int = 0, starts: int = 20,
                  pbr_stages: int = pbr.DEFAULT_STAGES) -> dict:
    """Multistart-NLP oracle on the noiseless plant; the reference optimum."""
    if plant == "quadratic":
        def objective(u):
            return float(quadratic.quadratic_plant(u)[0])

        def objective_grad(u):
            return quadratic.quadratic_plant_gradients(u)[0]

        constraints = [lambda u: float(quadratic.quadratic_plant(u)[1])]
        constraint_grads = [lambda u: quadratic.quadratic_plant_gradients(u)[1]]
        lower, upper = quadratic.BOUNDS_LOWER, quadratic.BOUNDS_UPPER
    elif plant == "williams-otto":
        def objective(u):
            return float(williams_otto.williams_otto_plant(u[0], u[1])[0])

        def objective_grad(u):
            return williams_otto.plant_gradients(u)[0]

        def make_con(i):
            return (
                lambda u: float(
                    williams_otto.williams_otto_plant(u[0], u[1])[i]),
                lambda u: williams_otto.plant_gradients(u)[i],
            )

        constraints, constraint_grads = [], []
        for i in (1, 2):
            f, g = make_con(i)
            constraints.append(f)
            constraint_grads.append(g)
        lower, upper = williams_otto.BOUNDS_LOWER, williams_otto.BOUNDS_UPPER
    elif plant == "pbr":
        par = pbr.ControlParameterization(pbr_stages)

        def objective(u):
            return float(pbr.pbr_problem(
                u, "plant", parameterization=par)[0])

        def objective_grad(u):
            return pbr.plant_with_gradients(u, pbr_stages)[1][0]

        def make_con(i):
            return (
                lambda u: float(pbr.pbr_problem(
                    u, "plant", parameterization=par)[i]),
                lambda u: pbr.plant_with_gradients(u, pbr_stages)[1][i],
            )

        constraints, constraint_grads = [], []
        for i in range(1, par.n_g + 1):
            f, g = make_con(i)
            constraints.append(f)
            constraint_grads.append(g)
        lower, upper = par.bounds()
    else:
        raise ConfigError(f"unknown plant {plant!r}")

    problem = nlp.NLPProblem(
        objective=objective, objective_grad=objective_grad,
        constraints=constraints, constraint_grads=constraint_grads,
        lower=lower, upper=upper,
    )
    result = nlp.solve(problem, starts=starts, seed=seed)
    if result.status != nlp.STATUS_SUCCESS:
        raise RuntimeError(f"plant optimum oracle failed: {result.status}")
    return {
        "plant": plant,
        "u": [float(v) for v in result.minimizer],
        "cost": float(result.objective_value),
        "max_violation": float(result.max_constraint_violation),
    }


def grid_export(plant: str, n: int = 61, seed: int = 0) -> dict:
    """Dense noiseless cost/constraint grids for the 2-D plants."""
    if plant == "quadratic":
        fn = quadratic.quadratic_plant
        lower, upper = quadratic.BOUNDS_LOWER, quadratic.BOUNDS_UPPER
        n_g = 1
    elif plant == "williams-otto":
        def fn(u):
            return williams_otto.williams_otto_plant(u[0], u[1])

        lower, upper = williams_otto.BOUNDS_LOWER, williams_otto.BOUNDS_UPPER
        n_g = 2
    else:
        raise ConfigError(f"grid export supports 2-D plants, not {plant!r}")
    u1 = np.linspace(lower[0], upper[0], n)
    u2 = np.linspace(lower[1], upper[1], n)
    cost = np.empty((n, n))
    constraints = np.empty((n_g, n, n))
    for i, a in enumerate(u1):
        for j, b in enumerate(u2):
            g = fn(np.array([a, b]))
            cost[i, j] = g[0]
            constraints[:, i, j] = g[1:]
    optimum = plant_optimum(plant, seed=seed)
    return {
        "plant": plant,
        "bounds": {"lower": list(map(float, lower)),
                   "upper": list(map(float, upper))},
        "n": n,
        "u1": [float(v) for v in u1],
        "u2": [float(v) for v in u2],
        "cost": cost.tolist(),
        "constraints": [c.tolist() for c in constraints],
        "optimum": optimum,
    }
