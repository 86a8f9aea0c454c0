"""Command-line entry point: run / ablate / summarize / grid.

Exit codes: 0 success, 2 configuration error, 3 run failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from . import harness


def _parse_axis_value(raw: str):
    low = raw.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw.strip()


def _parse_axes(pairs) -> dict:
    axes = {}
    for pair in pairs or []:
        key, _, values = pair.partition("=")
        if not values:
            raise ConfigError(f"--axes expects key=v1,v2,... (got {pair!r})")
        axes[key.strip()] = [_parse_axis_value(v) for v in values.split(",")]
    return axes


def _cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.from_file(args.config)
    if args.outdir:
        cfg.outdir = args.outdir
        cfg.validate()
    summary = harness.run_experiment(cfg)
    terminal = summary.percentile_cost[-1]
    print(
        f"ran {len(summary.seeds)} run(s) of plant={summary.config['plant']} "
        f"-> {cfg.resolved().outdir}"
    )
    print(f"terminal {harness.PERCENTILE:.0f}th-percentile feasible cost: "
          f"{terminal}")
    if summary.aborted_seeds:
        print(f"aborted seeds: {summary.aborted_seeds}", file=sys.stderr)
        return 3
    return 0


def _cmd_ablate(args) -> int:
    cfg = harness.ExperimentConfig.from_file(args.config)
    if args.outdir:
        cfg.outdir = args.outdir
        cfg.validate()
    axes = _parse_axes(args.axes)
    ranked = harness.run_ablation(cfg, axes)
    print("label,terminal_percentile_cost")
    failures = False
    for label, summary in ranked:
        print(f"{label},{summary.percentile_cost[-1]}")
        failures = failures or bool(summary.aborted_seeds)
    return 3 if failures else 0


def _cmd_summarize(args) -> int:
    directory = Path(args.directory)
    summary_path = directory / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {directory}")
    summary = json.loads(summary_path.read_text())
    print(f"plant: {summary['config']['plant']}")
    print(f"runs: {len(summary['seeds'])}  aborted: {summary['aborted_seeds']}")
    print(f"infeasible trials: {summary['infeasible_trials']}")
    print("iteration,percentile_cost,n_feasible")
    for k, cost, n in zip(summary["iterations"], summary["percentile_cost"],
                          summary["n_feasible"]):
        print(f"{k},{cost},{n}")
    return 0


def _cmd_grid(args) -> int:
    if args.plant == "pbr":
        data = harness.plant_optimum("pbr", pbr_stages=args.stages)
    else:
        data = harness.grid_export(args.plant, n=args.n)
    Path(args.output).write_text(json.dumps(data))
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="madapt",
        description="Modifier-adaptation RTO benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--outdir", default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_ablate = sub.add_parser("ablate", help="run an ablation matrix")
    p_ablate.add_argument("config")
    p_ablate.add_argument("--axes", action="append", default=[],
                          metavar="key=v1,v2,...")
    p_ablate.add_argument("--outdir", default=None)
    p_ablate.set_defaults(fn=_cmd_ablate)

    p_sum = sub.add_parser("summarize", help="print a stored ensemble summary")
    p_sum.add_argument("directory")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_grid = sub.add_parser(
        "grid", help="export noiseless cost/constraint grids + optimum"
    )
    p_grid.add_argument("plant", choices=["quadratic", "williams-otto", "pbr"])
    p_grid.add_argument("-o", "--output", required=True)
    p_grid.add_argument("--n", type=int, default=61)
    p_grid.add_argument("--stages", type=int, default=6)
    p_grid.set_defaults(fn=_cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # run failures
        print(f"run failed: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
