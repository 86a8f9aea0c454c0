"""Tests for the experiment harness: config validation, percentiles,
artifacts, budget accounting, ablation matrices, CLI plumbing."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from madapt import cli, harness
from madapt.errors import ConfigError


def _quick_config(tmp_path, **overrides):
    base = dict(
        plant="quadratic", acquisition="ei", budget=2, ensemble=2,
        base_seed=0, outdir=str(tmp_path / "out"), workers=1,
    )
    base.update(overrides)
    return harness.ExperimentConfig.from_dict(base)


class TestConfigValidation:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig.from_dict({"plantt": "quadratic"})

    def test_unknown_plant_rejected(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig.from_dict({"plant": "reactorX"})

    def test_bad_acquisition_rejected(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig.from_dict({"acquisition": "pi"})

    def test_pbr_noise_known_rejected(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig.from_dict(
                {"plant": "pbr", "noise_known": True}
            )

    def test_bool_fields_enforced(self):
        with pytest.raises(ConfigError):
            harness.ExperimentConfig.from_dict({"prior_model": "yes"})

    def test_inf_string_accepted_for_mu(self):
        cfg = harness.ExperimentConfig.from_dict({"criticality_mu": "inf"})
        assert math.isinf(cfg.criticality_mu)

    def test_resolved_fills_plant_defaults(self):
        cfg = harness.ExperimentConfig.from_dict({"plant": "pbr"}).resolved()
        assert cfg.kernel == "matern_3_2"
        assert cfg.infeasible_shrink == 1.0
        quick = harness.ExperimentConfig.from_dict(
            {"plant": "pbr", "quick": True, "ensemble": 8, "budget": 50}
        ).resolved()
        assert quick.pbr_stages == 3
        assert quick.ensemble == 3
        assert quick.budget == 25

    def test_every_field_echoed(self):
        cfg = _quick_config_tmp = harness.ExperimentConfig()
        echo = cfg.echo()
        for field in cfg.__dataclass_fields__:
            assert field in echo


class TestPercentile:
    def test_nearest_rank_matches_reference_on_toy_grid(self):
        # Straightforward reference: sort, take ceil(p/100*n)-th value.
        rng = np.random.default_rng(0)
        for _ in range(5):
            values = rng.integers(0, 100, size=5).astype(float)
            for p in (5.0, 50.0, 95.0, 100.0):
                expected = sorted(values)[
                    max(1, math.ceil(p / 100 * len(values))) - 1
                ]
                assert harness.nearest_rank_percentile(values, p) == expected

    def test_single_value(self):
        assert harness.nearest_rank_percentile([3.5], 95.0) == 3.5


class TestRunExperiment:
    def test_zero_budget_single_run_summary(self, tmp_path):
        cfg = _quick_config(tmp_path, budget=0, ensemble=1)
        summary = harness.run_experiment(cfg)
        assert summary.iterations == [0]
        assert summary.n_feasible == [1]
        # Initial center of the quadratic study: cost y1(2, -1) = 3.
        assert summary.percentile_cost[0] == pytest.approx(3.0)

    def test_artifacts_written(self, tmp_path):
        cfg = _quick_config(tmp_path)
        harness.run_experiment(cfg)
        out = tmp_path / "out"
        for seed in (0, 1):
            assert (out / f"run_{seed}.json").exists()
            assert (out / f"run_{seed}.csv").exists()
        assert (out / "ensemble.csv").exists()
        assert (out / "summary.json").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["plant"] == "quadratic"
        lines = (out / "ensemble.csv").read_text().strip().splitlines()
        assert lines[0] == "iteration,percentile_cost,n_feasible"
        assert len(lines) == cfg.budget + 2

    def test_csv_reproducible_byte_for_byte(self, tmp_path):
        cfg_a = _quick_config(tmp_path / "a")
        cfg_b = _quick_config(tmp_path / "b")
        harness.run_experiment(cfg_a)
        harness.run_experiment(cfg_b)
        for name in ("run_0.csv", "run_1.csv", "ensemble.csv"):
            a = (tmp_path / "a" / "out" / name).read_bytes()
            b = (tmp_path / "b" / "out" / name).read_bytes()
            assert a == b

    def test_budget_accounting_in_records(self, tmp_path):
        cfg = _quick_config(tmp_path, budget=3, ensemble=1)
        harness.run_experiment(cfg)
        rec = json.loads(
            (tmp_path / "out" / "run_0.json").read_text()
        )
        n_design = len(rec["design_points_unscaled"])
        assert rec["n_plant_evals"] <= cfg.budget + n_design

    def test_csv_layout(self, tmp_path):
        cfg = _quick_config(tmp_path, budget=2, ensemble=1)
        harness.run_experiment(cfg)
        lines = (tmp_path / "out" / "run_0.csv").read_text().splitlines()
        assert lines[0].split(",") == [
            "k", "u_1", "u_2", "delta", "rho", "accepted", "reason",
            "Gp_0", "Gp_1", "acq_value",
        ]
        assert len(lines) == 1 + cfg.budget + 1  # header + K rows + final

    def test_workers_do_not_change_results(self, tmp_path):
        cfg_seq = _quick_config(tmp_path / "seq", ensemble=2, workers=1)
        cfg_par = _quick_config(tmp_path / "par", ensemble=2, workers=2)
        a = harness.run_experiment(cfg_seq, write_files=False)
        b = harness.run_experiment(cfg_par, write_files=False)
        assert a.percentile_cost == b.percentile_cost
        assert a.per_run == b.per_run


class TestAblation:
    def test_matrix_sizes(self):
        base = harness.ExperimentConfig()
        assert len(harness.ablation_matrix(base, {})) == 1
        assert len(harness.ablation_matrix(
            base, {"acquisition": ["mean_only", "lcb", "ei"]}
        )) == 3
        assert len(harness.ablation_matrix(
            base,
            {"acquisition": ["mean_only", "ei"], "noise_known": [True, False]},
        )) == 4

    def test_unknown_axis_rejected(self):
        with pytest.raises(ConfigError):
            harness.ablation_matrix(harness.ExperimentConfig(), {"gamma": [1]})

    def test_run_ablation_writes_ranked_summary(self, tmp_path):
        base = _quick_config(tmp_path, budget=1, ensemble=1)
        ranked = harness.run_ablation(
            base, {"acquisition": ["mean_only", "ei"]}
        )
        assert len(ranked) == 2
        table = (tmp_path / "out" / "ablation_summary.csv").read_text()
        assert table.startswith("label,terminal_percentile_cost")


class TestDerivedOptima:
    def test_quadratic_optimum_matches_reference(self):
        opt = harness.plant_optimum("quadratic", seed=0)
        assert opt["cost"] == pytest.approx(0.145, abs=0.005)
        np.testing.assert_allclose(opt["u"], [0.368, -0.393], atol=2e-3)

    def test_grid_export_shape(self):
        data = harness.grid_export("quadratic", n=9)
        assert len(data["u1"]) == 9
        assert len(data["cost"]) == 9
        assert len(data["constraints"]) == 1
        assert data["optimum"]["cost"] == pytest.approx(0.145, abs=0.005)

    def test_grid_export_rejects_pbr(self):
        with pytest.raises(ConfigError):
            harness.grid_export("pbr")


class TestCLI:
    def test_run_and_summarize_roundtrip(self, tmp_path):
        config = {
            "plant": "quadratic", "acquisition": "ei", "budget": 1,
            "ensemble": 1, "outdir": str(tmp_path / "runs"), "workers": 1,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert cli.main(["run", str(cfg_path)]) == 0
        assert cli.main(["summarize", str(tmp_path / "runs")]) == 0

    def test_config_error_exit_code(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({"plant": "nope"}))
        assert cli.main(["run", str(cfg_path)]) == 2

    def test_missing_config_is_config_error(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "absent.json")]) == 2

    def test_grid_subcommand(self, tmp_path):
        out = tmp_path / "grid.json"
        assert cli.main(
            ["grid", "quadratic", "-o", str(out), "--n", "7"]
        ) == 0
        data = json.loads(out.read_text())
        assert data["n"] == 7

    def test_console_script_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "madapt.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "run" in proc.stdout
