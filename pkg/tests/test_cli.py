"""Config parsing, experiment orchestration, byte-stable artifacts."""

import json
import math

import numpy as np
import pytest

from coneflow.cli import (ConfigError, apply_overrides, convergence_study,
                          main, parse_config, read_snapshot, run_experiment,
                          verify_directory)
from coneflow.flow import SAMPLE_COLUMNS

SMALL = """
name = "small"

[grid]
n_theta = 51

[flow]
alpha = 1.0
s_end = 6.0

[initial]
eps = 0.05
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config("[grid]\nn_theta = 41\n[flow]\nalpha = 1.0\n")
        assert cfg.name == "experiment"
        assert cfg.grid["n_theta"] == 41
        assert cfg.grid["mode"] == "axisymmetric"
        assert cfg.flow["stepper"] == "rk4"
        assert cfg.flow["s_end"] == 10.0          # default horizon
        assert cfg.rescale["c"] == "midpoint"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[flow]\nalpah = 1.0\n")
        with pytest.raises(ConfigError, match="top level"):
            parse_config("stray = 1\n")

    def test_cone_convexity_named(self):
        with pytest.raises(ConfigError, match="cone not convex"):
            parse_config("[grid]\ntheta_max = 2.0\n")

    def test_syntax_error_with_location(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("[grid\nn_theta = 41\n")

    def test_both_horizons_rejected(self):
        with pytest.raises(ConfigError, match="not both"):
            parse_config("[flow]\nt_end = 1.0\ns_end = 2.0\n")

    def test_bad_check_name(self):
        with pytest.raises(ConfigError, match="unknown check"):
            parse_config('[verify]\nenabled = ["c0", "nope"]\n')

    def test_overrides(self):
        text = apply_overrides(SMALL, ["flow.s_end=2.5", "grid.n_theta=31",
                                       'flow.stepper="euler"'])
        cfg = parse_config(text)
        assert cfg.flow["s_end"] == 2.5
        assert cfg.grid["n_theta"] == 31
        assert cfg.flow["stepper"] == "euler"

    def test_bad_override(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides(SMALL, ["flow.s_end"])


class TestRunExperiment:
    def test_artifacts_and_exit(self, tmp_path):
        cfg = parse_config(SMALL)
        rc = run_experiment(cfg, tmp_path / "out")
        assert rc == 0
        names = {p.name for p in (tmp_path / "out").iterdir()}
        assert {"timeseries.csv", "report.json", "config.echo"} <= names
        assert "snap_0.csv" in names
        header = (tmp_path / "out" / "timeseries.csv").read_text().splitlines()[0]
        assert tuple(header.split(",")) == SAMPLE_COLUMNS
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["passed"] is True
        assert report["meta"]["termination"] == "completed"

    def test_byte_identical_rerun(self, tmp_path):
        cfg = parse_config(SMALL)
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        for name in ("timeseries.csv", "config.echo", "report.json",
                     "snap_0.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes(), name

    def test_echo_reparses(self, tmp_path):
        cfg = parse_config(SMALL)
        run_experiment(cfg, tmp_path / "out")
        echoed = parse_config((tmp_path / "out" / "config.echo").read_text())
        assert echoed.grid == cfg.grid
        assert echoed.flow == cfg.flow
        assert isinstance(echoed.rescale["c"], float)  # policy resolved

    def test_not_mean_convex_exit(self, tmp_path, capsys):
        cfg = parse_config(SMALL + "\n")
        cfg.initial["eps"] = 0.9
        rc = run_experiment(cfg, tmp_path / "out")
        assert rc != 0
        assert "not mean convex" in capsys.readouterr().err

    def test_failed_check_nonzero_exit(self, tmp_path):
        # an s-horizon too short for roundness must fail the radius check
        cfg = parse_config(SMALL)
        cfg.flow["s_end"] = 0.2
        rc = run_experiment(cfg, tmp_path / "out")
        assert rc == 1
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["passed"] is False

    def test_snapshot_roundtrip(self, tmp_path):
        cfg = parse_config(SMALL)
        run_experiment(cfg, tmp_path / "out")
        head, rows = read_snapshot(tmp_path / "out" / "snap_0.csv")
        assert head["mode"] == "axisymmetric"
        assert float(head["t"]) == 0.0
        assert rows.shape == (51, 2)
        assert rows[0, 1] == pytest.approx(1.05)


class TestVerifyDirectory:
    def test_verify_reproduces_verdict(self, tmp_path):
        cfg = parse_config(SMALL)
        assert run_experiment(cfg, tmp_path / "out") == 0
        first = json.loads((tmp_path / "out" / "report.json").read_text())
        assert verify_directory(tmp_path / "out") == 0
        second = json.loads((tmp_path / "out" / "report.json").read_text())
        for a, b in zip(first["checks"], second["checks"]):
            assert a["name"] == b["name"]
            assert a["margin"] == pytest.approx(b["margin"], rel=1e-12)

    def test_missing_directory(self, tmp_path, capsys):
        assert verify_directory(tmp_path / "nothing") == 2


class TestStudy:
    def test_needs_three_grids(self, tmp_path, capsys):
        cfg = parse_config(SMALL)
        assert convergence_study(cfg, [51, 101], tmp_path) == 2
        assert "need >= 3 grids" in capsys.readouterr().err

    def test_orders_file(self, tmp_path, capsys):
        cfg = parse_config("[flow]\nt_end = 0.5\n[rescale]\nc = 0.0\n")
        rc = convergence_study(cfg, [26, 51, 101], tmp_path)
        assert rc == 0
        lines = (tmp_path / "orders.csv").read_text().splitlines()
        assert lines[0].startswith("n_theta,h,model_err")
        assert len(lines) == 4
        # constant data: model error is time-dominated round-off
        assert "time-dominated" in lines[2] + lines[3]


class TestMain:
    def test_run_verb(self, tmp_path):
        cfg_file = tmp_path / "c.toml"
        cfg_file.write_text(SMALL)
        rc = main(["run", str(cfg_file), "--out-dir", str(tmp_path / "o")])
        assert rc == 0
        assert (tmp_path / "o" / "report.json").exists()

    def test_config_error_exit_2(self, tmp_path, capsys):
        cfg_file = tmp_path / "c.toml"
        cfg_file.write_text("[grid]\ntheta_max = 2.0\n")
        assert main(["run", str(cfg_file)]) == 2
        assert "cone not convex" in capsys.readouterr().err

    def test_override_flag(self, tmp_path):
        cfg_file = tmp_path / "c.toml"
        cfg_file.write_text(SMALL)
        rc = main(["run", str(cfg_file), "--out-dir", str(tmp_path / "o"),
                   "--override", "flow.s_end=0.5"])
        echo = (tmp_path / "o" / "config.echo").read_text()
        assert "s_end = 0.5" in echo
