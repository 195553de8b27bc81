"""Configuration parsing and the command-line surface."""

import numpy as np
import pytest

from ksefix.cli import main
from ksefix.config import (ConfigError, RunConfig, apply_overrides,
                           parse_config, write_config)
from ksefix.spectral import GridSpec, read_spectral, write_spectral
from ksefix.store import FixedPointStore

GRID = GridSpec()


class TestConfig:
    def test_defaults_reproduce_reference_setup(self):
        cfg = RunConfig()
        assert cfg.grid_n == 64 and cfg.half_domain == 10.0 and cfg.dt == 0.05
        assert cfg.actuators_per_side == 6 and cfg.sigma == 2.4
        assert cfg.a_max == 3.0 and cfg.sensor_stride == 4
        assert cfg.batch_size == 200 and cfg.learning_rate == 0.001
        assert cfg.discount == 0.99 and cfg.tau == 0.001
        assert cfg.n_parallel == 10 and cfg.episode_steps == 500
        assert cfg.reward_threshold == -45.0
        assert cfg.m_gmres == 100 and cfg.newton_iterations == 100
        assert cfg.newton_tolerance == 1e-12 and cfg.residual_steps == 20

    def test_alpha_min_task_defaults(self):
        cfg = RunConfig()
        assert cfg.alpha_min_for("identification") == 1.5
        assert cfg.alpha_min_for("navigation") == 1.2
        cfg.noise_alpha_min = 0.7
        assert cfg.alpha_min_for("identification") == 0.7

    def test_roundtrip(self, tmp_path):
        cfg = RunConfig(grid_n=32, sigma=1.9, episodes=7, seed=123)
        path = tmp_path / "run.cfg"
        write_config(cfg, path)
        assert parse_config(path) == cfg

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# a comment\n\nseed = 9  # trailing\nsigma=3.1\n")
        cfg = parse_config(path)
        assert cfg.seed == 9 and cfg.sigma == 3.1

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("warp_speed = 11\n")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_overrides(self):
        cfg = apply_overrides(RunConfig(), ["episodes=3", "dt=0.025"])
        assert cfg.episodes == 3 and cfg.dt == 0.025
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig(), ["episodes"])


class TestSimulateCommand:
    def test_zero_initial_field_constant_trajectory(self, tmp_path):
        out = tmp_path / "run"
        code = main(["simulate", "--zero", "--steps", "10", "--out", str(out)])
        assert code == 0
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "time,e01,e11,e10,energy"
        assert len(lines) == 12
        for line in lines[1:]:
            cells = line.split(",")
            assert all(float(c) == 0.0 for c in cells[1:])

    def test_snapshots_written(self, tmp_path):
        out = tmp_path / "run"
        code = main(["simulate", "--zero", "--steps", "4",
                     "--snapshot-stride", "2", "--out", str(out),
                     "--set", "relax_steps=10"])
        assert code == 0
        snaps = sorted((out / "snapshots").glob("*.kse2"))
        assert [s.name for s in snaps] == ["state_000000.kse2",
                                           "state_000002.kse2",
                                           "state_000004.kse2"]

    def test_resolved_config_written(self, tmp_path):
        out = tmp_path / "run"
        main(["simulate", "--zero", "--steps", "1", "--out", str(out),
              "--set", "seed=77"])
        resolved = parse_config(out / "config.resolved")
        assert resolved.seed == 77


class TestJfnkCommand:
    def test_missing_guess_is_usage_error(self, tmp_path):
        code = main(["jfnk", str(tmp_path / "nope.kse2"),
                     "--out", str(tmp_path / "o")])
        assert code == 1

    def test_fixed_point_guess_converges_fast(self, tmp_path, equilibrium):
        guess = tmp_path / "guess.kse2"
        write_spectral(guess, equilibrium, GRID)
        out = tmp_path / "run"
        code = main(["jfnk", str(guess), "--out", str(out)])
        assert code == 0
        log = (out / "report.log").read_text()
        assert "converged = True" in log
        iters = int([l for l in log.splitlines()
                     if l.startswith("iterations")][0].split("=")[1])
        assert iters <= 1
        converged, grid = read_spectral(out / "converged.kse2")
        assert grid == GRID
        csv = (out / "residuals.csv").read_text().splitlines()
        assert csv[0] == "iteration,log10_relative_residual"


class TestFindCommand:
    def test_zero_episodes_empty_store(self, tmp_path):
        out = tmp_path / "run"
        code = main(["find", "--out", str(out), "--set", "episodes=0",
                     "--set", "n_parallel=1", "--set", "relax_steps=5",
                     "--set", "buffer_capacity=1000"])
        assert code == 0
        store = FixedPointStore.load(out / "store")
        assert len(store) == 0
        table = (out / "table.csv").read_text().splitlines()
        assert len(table) == 1  # header only
        log = (out / "training_log.csv").read_text().splitlines()
        assert log[0] == ("episode,best_reward,terminal_distance,alpha,"
                          "handoffs,jfnk_converged")

    def test_determinism_byte_identical(self, tmp_path):
        args = ["find", "--set", "episodes=1", "--set", "n_parallel=2",
                "--set", "episode_steps=3", "--set", "relax_steps=5",
                "--set", "buffer_capacity=1000", "--set", "threads=1",
                "--set", "seed=5"]
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(args + ["--out", str(out)]) == 0
            outs.append((out / "training_log.csv").read_bytes())
        assert outs[0] == outs[1]


class TestVerifyExportCommands:
    def test_verify_field_file(self, tmp_path, equilibrium):
        path = tmp_path / "eq.kse2"
        write_spectral(path, equilibrium, GRID)
        assert main(["verify", "--field", str(path)]) == 0

    def test_verify_rejects_non_equilibrium(self, tmp_path):
        rng = np.random.default_rng(0)
        from ksefix.spectral import dft2
        spec = dft2(rng.uniform(0, 1, (64, 64)))
        spec[0, 0] = 0
        path = tmp_path / "junk.kse2"
        write_spectral(path, spec, GRID)
        assert main(["verify", "--field", str(path)]) == 3

    def test_store_roundtrip_through_cli(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        assert main(["verify", "--store", str(tmp_path / "store")]) == 0
        table = tmp_path / "out.csv"
        pgm = tmp_path / "e1.pgm"
        assert main(["export", "--store", str(tmp_path / "store"),
                     "--table", str(table), "--pgm", f"E1={pgm}"]) == 0
        assert table.exists() and pgm.exists()

    def test_export_unknown_record(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        assert main(["export", "--store", str(tmp_path / "store"),
                     "--pgm", f"E9={tmp_path / 'x.pgm'}"]) == 1


class TestUsageErrors:
    def test_unknown_command(self):
        assert main(["teleport"]) == 1

    def test_bad_override(self, tmp_path):
        assert main(["simulate", "--zero", "--steps", "1",
                     "--out", str(tmp_path / "o"), "--set", "nope=1"]) == 1

    def test_navigate_unknown_goal(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        code = main(["navigate", "--store", str(tmp_path / "store"),
                     "--goal", "E99", "--out", str(tmp_path / "run")])
        assert code == 1
