"""Configuration parsing, the runner, and the command-line interface."""

import json
from pathlib import Path

import numpy as np
import pytest

from jumpns.cli import main
from jumpns.config import ConfigError, SolverConfig
from jumpns.runner import (
    AuditError,
    audit_trajectory,
    build_initial_state,
    path_seed,
    run_ensemble,
    run_single,
)
from jumpns.fieldio import read_trajectory_csv
from jumpns.fields import Grid
from jumpns.spectral import SobolevOrder, sobolev_norm

SMALL = dict(
    n=16, horizon=0.25, dt=2e-3, rate=6.0, sigma=0.3, n_paths=2, seed=99
)


class TestConfigValidation:
    def test_alpha_bounds(self):
        with pytest.raises(ConfigError, match="alpha"):
            SolverConfig(alpha=0.3).validate()
        with pytest.raises(ConfigError, match="alpha"):
            SolverConfig(alpha=0.0).validate()

    def test_noise_integrability(self):
        with pytest.raises(ConfigError, match="gamma"):
            SolverConfig(gamma=0.5, alpha=0.1).validate()

    def test_mark_law_and_preset_names(self):
        with pytest.raises(ConfigError, match="mark_law"):
            SolverConfig(mark_law="cauchy").validate()
        with pytest.raises(ConfigError, match="u0 preset"):
            SolverConfig(u0="vortex").validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            SolverConfig.from_dict({"viscosity": "2"})

    def test_dt_versus_horizon(self):
        with pytest.raises(ConfigError, match="dt"):
            SolverConfig(horizon=0.1, dt=0.1).validate()

    def test_hash_tracks_content(self):
        a = SolverConfig(**SMALL)
        b = SolverConfig(**{**SMALL, "sigma": 0.4})
        assert a.hash() == SolverConfig(**SMALL).hash()
        assert a.hash() != b.hash()


class TestConfigFile:
    def test_parse_with_comments_and_overrides(self, tmp_path):
        text = """
        # reference-style setup
        n = 16
        horizon = 0.5   # short
        dt = 2e-3
        rate = 4.0
        mark-law = uniform
        """
        path = tmp_path / "run.cfg"
        path.write_text(text)
        cfg = SolverConfig.from_file(path, {"sigma": "0.7", "rate": None})
        assert cfg.n == 16 and cfg.horizon == 0.5
        assert cfg.mark_law == "uniform"
        assert cfg.sigma == 0.7
        assert cfg.rate == 4.0

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("n 16\n")
        with pytest.raises(ConfigError, match="key = value"):
            SolverConfig.from_file(path)


class TestInitialStates:
    def test_zero_preset(self):
        cfg = SolverConfig(u0="zero")
        assert np.abs(build_initial_state(cfg, Grid(16)).coeffs).max() == 0.0

    def test_random_preset_normalized_in_negative_order_norm(self):
        cfg = SolverConfig(u0="random", u0_amplitude=0.7, alpha=0.1)
        state = build_initial_state(cfg, Grid(32))
        norm = sobolev_norm(state, SobolevOrder(-0.2, 4))
        assert norm == pytest.approx(0.7, rel=1e-10)

    def test_seed_controls_random_preset(self):
        base = SolverConfig(u0="random", u0_seed=1)
        other = SolverConfig(u0="random", u0_seed=2)
        a = build_initial_state(base, Grid(16))
        b = build_initial_state(other, Grid(16))
        assert np.abs(a.coeffs - b.coeffs).max() > 0


class TestRunSingle:
    def test_writes_all_artifacts(self, tmp_path):
        cfg = SolverConfig(**SMALL, outdir=str(tmp_path), snapshot_stride=64)
        result = run_single(cfg)
        assert Path(result.files["trajectory"]).exists()
        assert Path(result.files["report"]).exists()
        assert Path(result.files["record"]).exists()
        assert Path(result.files["manifest"]).exists()
        assert any(k.startswith("snapshot_") for k in result.files)
        manifest = json.loads(Path(result.files["manifest"]).read_text())
        assert manifest["config_hash"] == cfg.hash()
        assert manifest["path_seeds"] == [result.seed]

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = SolverConfig(**SMALL, outdir=str(tmp_path / "a"))
        cfg_b = SolverConfig(**SMALL, outdir=str(tmp_path / "b"))
        res_a = run_single(cfg_a)
        res_b = run_single(cfg_b)
        traj_a = Path(res_a.files["trajectory"]).read_bytes()
        traj_b = Path(res_b.files["trajectory"]).read_bytes()
        assert traj_a == traj_b
        rep_a = Path(res_a.files["report"]).read_bytes()
        rep_b = Path(res_b.files["report"]).read_bytes()
        assert rep_a == rep_b

    def test_taylor_green_decay_curve(self, tmp_path):
        cfg = SolverConfig(
            n=16, horizon=0.5, dt=1e-3, rate=0.0, u0="taylor-green",
            u0_amplitude=0.5, outdir=str(tmp_path),
        )
        result = run_single(cfg)
        cols = result.columns
        expected = cols["u_l2"][0] * np.exp(-2.0 * cols["t"])
        assert np.max(np.abs(cols["u_l2"] - expected) / expected) <= 1e-3

    def test_zero_config_trivial_path(self, tmp_path):
        cfg = SolverConfig(
            n=16, horizon=0.25, dt=2e-3, rate=0.0, u0="zero", outdir=str(tmp_path)
        )
        result = run_single(cfg)
        assert result.report.u_l4l4 == 0.0
        assert result.report.residual_max == 0.0


class TestEnsemble:
    def test_degenerate_zero_noise_ensemble(self, tmp_path):
        cfg = SolverConfig(
            n=16, horizon=0.25, dt=2e-3, rate=0.0, u0="zero",
            n_paths=2, outdir=str(tmp_path),
        )
        result = run_ensemble(cfg)
        assert result.burkholder_lhs == 0.0
        assert result.ci_u_l4l4 == 0.0

    def test_summaries_are_index_ordered_and_deterministic(self, tmp_path):
        cfg = SolverConfig(**SMALL, outdir=str(tmp_path))
        a = run_ensemble(cfg)
        b = run_ensemble(cfg)
        assert [s["index"] for s in a.paths] == [0, 1]
        assert a.paths[0]["u_l4l4"] == b.paths[0]["u_l4l4"]
        assert a.paths[0]["seed"] == path_seed(cfg.seed, 0)

    def test_sigma_quadrupling_of_moment(self, tmp_path):
        base = SolverConfig(**{**SMALL, "sigma": 0.3}, outdir=str(tmp_path / "a"))
        twice = SolverConfig(**{**SMALL, "sigma": 0.6}, outdir=str(tmp_path / "b"))
        ra = run_ensemble(base)
        rb = run_ensemble(twice)
        assert rb.burkholder_lhs == pytest.approx(4.0 * ra.burkholder_lhs, rel=1e-9)
        assert rb.burkholder_rhs == pytest.approx(4.0 * ra.burkholder_rhs, rel=1e-12)

    def test_failure_names_path_seed(self, tmp_path):
        from jumpns.solver import WindowSelectionError

        cfg = SolverConfig(
            n=16, horizon=0.25, dt=2e-3, rate=0.0, u0="taylor-green",
            u0_amplitude=1000.0, n_paths=2, outdir=str(tmp_path),
        )
        with pytest.raises(WindowSelectionError, match="path index 0, seed"):
            run_ensemble(cfg)


class TestTrajectoryAudit:
    def test_written_trajectory_passes(self, tmp_path):
        cfg = SolverConfig(**SMALL, outdir=str(tmp_path))
        result = run_single(cfg)
        columns = read_trajectory_csv(result.files["trajectory"])
        margins = audit_trajectory(columns)
        assert all(v >= -1e-6 for v in margins.values())

    def test_tampered_trajectory_fails(self, tmp_path):
        cfg = SolverConfig(**SMALL, outdir=str(tmp_path))
        result = run_single(cfg)
        columns = read_trajectory_csv(result.files["trajectory"])
        columns["y_l2"] = columns["y_l2"] + 10.0  # break the energy ledger
        with pytest.raises(AuditError):
            audit_trajectory(columns)


class TestCli:
    def test_version(self, capsys):
        assert main(["version"]) == 0
        assert capsys.readouterr().out.strip() == "0.1.0"

    def test_run_and_audit_round_trip(self, tmp_path, capsys):
        rc = main(
            [
                "run",
                "--n", "16", "--horizon", "0.25", "--dt", "2e-3",
                "--rate", "6.0", "--sigma", "0.3", "--seed", "99",
                "--outdir", str(tmp_path),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "trajectory" in out
        traj = tmp_path / "path0000" / "trajectory.csv"
        assert main(["audit", str(traj)]) == 0

    def test_config_error_exit_code(self, capsys):
        assert main(["run", "--alpha", "0.9"]) == 2
        assert "alpha" in capsys.readouterr().err

    def test_audit_failure_exit_code(self, tmp_path, capsys):
        cfg = SolverConfig(**SMALL, outdir=str(tmp_path))
        result = run_single(cfg)
        path = Path(result.files["trajectory"])
        text = path.read_text().split("\n")
        header = text[0].split(",")
        y_ix = header.index("y_l2")
        rows = [text[0]]
        for line in text[1:]:
            if not line:
                continue
            parts = line.split(",")
            parts[y_ix] = "5.0"
            rows.append(",".join(parts))
        path.write_text("\n".join(rows) + "\n")
        assert main(["audit", str(path)]) == 3

    def test_nonconvergence_exit_code(self, tmp_path, capsys):
        rc = main(
            [
                "run",
                "--n", "16", "--horizon", "0.25", "--dt", "2e-3",
                "--rate", "0.0", "--u0", "taylor-green",
                "--u0-amplitude", "1000.0", "--outdir", str(tmp_path),
            ]
        )
        assert rc == 4
        assert "too coarse" in capsys.readouterr().err

    def test_ensemble_command(self, tmp_path, capsys):
        rc = main(
            [
                "ensemble",
                "--n", "16", "--horizon", "0.25", "--dt", "2e-3",
                "--rate", "6.0", "--sigma", "0.3", "--n-paths", "2",
                "--seed", "99", "--outdir", str(tmp_path),
            ]
        )
        assert rc == 0
        assert (tmp_path / "ensemble.csv").exists()
