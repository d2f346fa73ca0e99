import dataclasses
from pathlib import Path

import numpy as np
import pytest

from levy_scl import AtomicMeasure, Field, Grid1D, SolverConfig, burgers_flux, solve
from levy_scl.errors import ConfigError
from levy_scl.estimators import weighted_l1_distance
from levy_scl.experiments.cli import main as cli_main
from levy_scl.experiments.config import parse_config, parse_config_text
from levy_scl.experiments.report import ExperimentReport, emit_report
from levy_scl.experiments.runner import run_experiment
from levy_scl.levy_noise import SeedDerivation, sample_path
from levy_scl.presets import PresetRef, build_noise

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _small(cfg_text_path, **overrides):
    cfg = parse_config(cfg_text_path)
    overrides.setdefault("ensemble", 6)
    overrides.setdefault("grid_n_cells", 128)
    return dataclasses.replace(cfg, **overrides)


class TestErrorRateRunner:
    def test_report_schema(self):
        cfg = _small(CONFIG_DIR / "error_rate.cfg", eps_list=(0.02, 0.01), ensemble=2)
        rep = run_experiment(cfg)
        names = [s.name for s in rep.stats]
        assert names.count("l1_error[eps=0.02]") == 1
        assert names.count("l1_error[eps=0.01]") == 1
        assert "fit_slope" in names
        assert rep.stat("l1_error[eps=0.02]").n_samples == 2
        assert rep.stat("l1_error[eps=0.02]").std_error >= 0

    def test_deterministic_viscosity_errors_decrease(self):
        # zero noise: pure numerical comparison, errors shrink with eps
        cfg = _small(CONFIG_DIR / "error_rate.cfg", ensemble=2,
                     noise=PresetRef("none"))
        rep = run_experiment(cfg)
        means = [rep.stat(f"l1_error[eps={e:g}]").value for e in cfg.eps_list]
        assert all(b < a for a, b in zip(means, means[1:]))

    def test_identical_arms_give_zero_error(self):
        # coupling sanity: the same (eps, data, path) twice is bit-identical
        grid = Grid1D(-8, 8, 128)
        u0 = Field.from_function(grid, lambda x: np.exp(-(x**2)))
        noise = build_noise(PresetRef.make("linear_u", scale=0.2))
        m = AtomicMeasure(atoms=((1.0, 2.0),))
        seeds = SeedDerivation(3)
        for i in range(4):
            path = sample_path(m, 0.5, 0.5, seeds.derive(i, "jump_path"))
            cfg = SolverConfig(0.0, (0.5,))
            a = solve(u0, burgers_flux(), noise, m, cfg, path)
            b = solve(u0, burgers_flux(), noise, m, cfg, path)
            assert np.array_equal(a.final.values, b.final.values)
            assert weighted_l1_distance(a.final, b.final) == 0.0

    def test_arm_evaluation_order_irrelevant(self):
        grid = Grid1D(-8, 8, 128)
        u0 = Field.from_function(grid, lambda x: np.exp(-(x**2)))
        noise = build_noise(PresetRef.make("linear_u", scale=0.2))
        m = AtomicMeasure(atoms=((1.0, 2.0),))
        path = sample_path(m, 0.5, 0.5, SeedDerivation(5).derive(0, "jump_path"))
        cfg_a = SolverConfig(0.01, (0.5,))
        cfg_b = SolverConfig(0.0, (0.5,))
        r1 = solve(u0, burgers_flux(), noise, m, cfg_a, path).final.values.copy()
        r2 = solve(u0, burgers_flux(), noise, m, cfg_b, path).final.values.copy()
        r2_again = solve(u0, burgers_flux(), noise, m, cfg_b, path).final.values
        r1_again = solve(u0, burgers_flux(), noise, m, cfg_a, path).final.values
        assert np.array_equal(r1, r1_again)
        assert np.array_equal(r2, r2_again)

    def test_self_reference_mode(self):
        cfg = _small(
            CONFIG_DIR / "error_rate.cfg",
            ensemble=2,
            eps_list=(0.04, 0.02, 0.01, 0.005),
            rate_reference="self",
        )
        rep = run_experiment(cfg)
        names = [s.name for s in rep.stats]
        assert "l1_error[eps=0.005]" not in names  # smallest eps is the reference
        assert "l1_error[eps=0.04]" in names


class TestDeterminism:
    @pytest.mark.parametrize("config", ["error_rate.cfg", "continuous_dependence_noise.cfg"])
    def test_threads_do_not_change_bytes(self, tmp_path, config):
        cfg = _small(CONFIG_DIR / config, ensemble=8)
        rep1 = run_experiment(cfg, threads=1)
        rep8 = run_experiment(cfg, threads=8)
        d1, d8 = tmp_path / "t1", tmp_path / "t8"
        emit_report(rep1, d1)
        emit_report(rep8, d8)
        assert (d1 / "stats.csv").read_bytes() == (d8 / "stats.csv").read_bytes()
        assert (d1 / "summary.txt").read_bytes() == (d8 / "summary.txt").read_bytes()

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = _small(CONFIG_DIR / "bv_monotone.cfg", ensemble=4)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        emit_report(run_experiment(cfg), d1)
        emit_report(run_experiment(cfg), d2)
        assert (d1 / "stats.csv").read_bytes() == (d2 / "stats.csv").read_bytes()

    def test_seed_changes_results(self):
        cfg = _small(CONFIG_DIR / "error_rate.cfg", ensemble=4, eps_list=(0.02, 0.01))
        a = run_experiment(cfg)
        b = run_experiment(dataclasses.replace(cfg, seed=cfg.seed + 1))
        assert a.stat("l1_error[eps=0.02]").value != b.stat("l1_error[eps=0.02]").value

    def test_disjoint_seed_ranges_agree_statistically(self):
        # same estimator from two disjoint path-index blocks
        base = _small(CONFIG_DIR / "continuous_dependence_noise.cfg",
                      ensemble=24, cd_c_list=(0.1, 0.2))
        rep = run_experiment(base)
        other = run_experiment(dataclasses.replace(base, seed=base.seed + 12345))
        s1 = rep.stat("lhs[c=0.2]")
        s2 = other.stat("lhs[c=0.2]")
        joint = np.hypot(s1.std_error, s2.std_error)
        assert abs(s1.value - s2.value) <= 4 * joint


class TestFractionalBvRunner:
    def test_x_independent_noise_warns_not_errors(self):
        cfg = _small(
            CONFIG_DIR / "fractional_bv.cfg",
            ensemble=4,
            delta_max_cells=16,
            noise=PresetRef.make("linear_u", scale=0.2),
        )
        rep = run_experiment(cfg)
        assert any("x-independent" in n for n in rep.notes)

    def test_deterministic_bv_data_has_exponent_near_one(self):
        cfg = _small(
            CONFIG_DIR / "fractional_bv.cfg",
            ensemble=2,
            delta_max_cells=16,
            noise=PresetRef("none"),
            eps_list=(0.005,),
            horizon=0.1,
            snapshots=(0.1,),
        )
        rep = run_experiment(cfg)
        r_hat = rep.stat("fit_exponent").value
        assert 0.8 <= r_hat <= 1.0 + 1e-9

    def test_ladder_must_fit_in_box(self):
        cfg = _small(CONFIG_DIR / "fractional_bv.cfg", ensemble=2)  # 64 dx on 128 cells
        with pytest.raises(ConfigError, match="window"):
            run_experiment(cfg)

    def test_omega_monotone_and_schema(self):
        cfg = _small(CONFIG_DIR / "fractional_bv.cfg", ensemble=4, delta_max_cells=16)
        rep = run_experiment(cfg)
        omegas = [s.value for s in rep.stats if s.name.startswith("omega[")]
        assert len(omegas) >= 4
        assert all(b >= a - 1e-14 for a, b in zip(omegas, omegas[1:]))
        assert any(s.name.startswith("besov_seminorm_u0") for s in rep.stats)
        assert rep.passed


class TestEntropyCheckRunner:
    def test_passes_and_reports_all_k(self):
        cfg = _small(CONFIG_DIR / "entropy_check.cfg", ensemble=8)
        rep = run_experiment(cfg)
        for k in (-1, 0, 1):
            assert rep.stat(f"residual[k={k:g}]").n_samples == 8
        assert rep.passed


class TestBvMonotoneRunner:
    def test_constant_initial_data_keeps_bv_zero(self):
        # x-independent noise preserves spatial homogeneity exactly
        cfg = _small(
            CONFIG_DIR / "bv_monotone.cfg",
            ensemble=4,
            eps_list=(0.01,),
            u0=PresetRef.make("constant", value=0.7),
        )
        rep = run_experiment(cfg)
        for s in rep.stats:
            if s.name.startswith("bv["):
                assert s.value == 0.0
        assert rep.passed


class TestConfigCrossChecks:
    def test_noise_x_dependence_consistency(self):
        text = (CONFIG_DIR / "fractional_bv.cfg").read_text()
        ok = parse_config_text(text + "noise.x_dependence = x\n")
        assert ok.noise_x_dependence == "x"
        with pytest.raises(ConfigError, match="contradicts"):
            parse_config_text(text + "noise.x_dependence = none\n")


class TestReportEmission:
    def test_stats_csv_schema(self, tmp_path):
        rep = ExperimentReport(kind="demo")
        rep.add_stat("alpha", 1.25, 0.5, 7)
        rep.add_verdict("check", True, "within bounds")
        paths = emit_report(rep, tmp_path)
        text = paths["stats"].read_text()
        assert text.splitlines()[0] == "stat_name,value,std_error,n_samples"
        assert "alpha,1.25,0.5,7" in text
        summary = paths["summary"].read_text()
        assert "PASS  check: within bounds" in summary
        assert summary.strip().endswith("verdict: PASS")

    def test_float_formatting_17_digits(self, tmp_path):
        rep = ExperimentReport(kind="demo")
        rep.add_stat("pi_ish", 0.1 + 0.2)
        paths = emit_report(rep, tmp_path)
        assert "0.30000000000000004" in paths["stats"].read_text()


class TestCli:
    def test_validate_ok(self, capsys):
        rc = cli_main(["validate", str(CONFIG_DIR / "error_rate.cfg")])
        assert rc == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("kind = error_rate\nbogus = 1\n")
        rc = cli_main(["validate", str(bad)])
        assert rc == 1
        assert "unknown key" in capsys.readouterr().err

    def test_presets_listing(self, capsys):
        assert cli_main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "burgers" in out and "linear_u" in out and "atomic" in out

    def test_run_writes_report_and_exits_zero(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        rc = cli_main([
            "run", str(CONFIG_DIR / "bv_monotone.cfg"),
            "--out", str(out_dir), "--paths", "4", "--threads", "2",
        ])
        assert rc == 0
        assert (out_dir / "stats.csv").exists()
        assert (out_dir / "summary.txt").exists()
        assert "verdict: PASS" in capsys.readouterr().out

    def test_run_seed_override_changes_stats(self, tmp_path):
        args = ["run", str(CONFIG_DIR / "bv_monotone.cfg"), "--paths", "4"]
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert cli_main(args + ["--out", str(d1), "--seed", "1"]) == 0
        assert cli_main(args + ["--out", str(d2), "--seed", "2"]) == 0
        assert (d1 / "stats.csv").read_text() != (d2 / "stats.csv").read_text()

    def test_failed_verdict_exits_two(self, tmp_path, capsys):
        # an impossible slope window forces a verdict failure
        text = (CONFIG_DIR / "error_rate.cfg").read_text()
        text = text.replace("rate.slope_min = 0.35", "rate.slope_min = 5.0")
        text = text.replace("rate.slope_max = 1.2", "rate.slope_max = 6.0")
        text = text.replace("ensemble = 64", "ensemble = 2")
        text = text.replace("eps_list = 0.02 0.01 0.005 0.0025", "eps_list = 0.02 0.01")
        bad = tmp_path / "doomed.cfg"
        bad.write_text(text)
        rc = cli_main(["run", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "FAIL" in capsys.readouterr().out
