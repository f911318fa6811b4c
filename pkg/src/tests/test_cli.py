"""Tests for the run configuration, artifact writers and the command-line front end"""

import json
import math
from enum import Enum
from pathlib import Path

import numpy as np
import pytest

from isoblock.config import RunConfig
from isoblock.errors import ConfigError, NumericalError
from isoblock.main import main
from isoblock.utils.export import (
    dumps,
    format_float,
    strip_volatile,
    to_plain,
    write_csv,
    write_json,
)


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run_cli(tmp_path, command, text, *extra):
    config = write_config(tmp_path, text)
    out = tmp_path / "out"
    return main([command, "--config", str(config), "--out", str(out), *extra]), out


CONFIGS = Path(__file__).resolve().parents[2] / "configs"

SQRT_RUN = 'model = "sqrt-ode"\ndt = 0.01\nT = 2.0\nx0 = [1.0]\n'


class Colour(Enum):
    RED = "red"


class TestExport:
    """Float formatting, key order and atomic files"""

    def test_floats(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(1.0) == "1.0"
        assert format_float(float("nan")) == "null"
        assert format_float(-math.inf) == "null"

    def test_sorted_keys_and_inline_numbers(self):
        text = dumps({"b": 1, "a": [1.0, float("inf")], "c": {"z": True, "y": None}})
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert "[1.0, null]" in text
        parsed = json.loads(text)
        assert parsed["c"] == {"y": None, "z": True}

    def test_to_plain(self):
        class Report:
            def to_dict(self):
                return {"value": np.float64(2.5), "flags": np.array([True, False])}

        plain = to_plain({"report": Report(), "colour": Colour.RED, 3: np.int64(4)})
        assert plain == {"report": {"value": 2.5, "flags": [True, False]}, "colour": "red",
                         "3": 4}

    def test_strip_volatile(self):
        payload = {"timestamp": "now", "inner": [{"duration_s": 1.0, "kept": 1}]}
        assert strip_volatile(payload) == {"inner": [{"kept": 1}]}

    def test_atomic_json(self, tmp_path):
        path = write_json(tmp_path / "deep" / "r.json", {"x": 0.5, "timestamp": "t"}, True)
        assert json.loads(path.read_text()) == {"x": 0.5}
        assert [p.name for p in path.parent.iterdir()] == ["r.json"]

    def test_csv(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["t", "x"], [[0.0, 0.1], [1, "a"]])
        assert path.read_text().splitlines() == ["t,x", "0,0.10000000000000001", "1,a"]


class TestRunConfig:
    """Validation of run files"""

    def test_defaults_and_overrides(self):
        config = RunConfig.from_mapping({"model": "saddle", "bundle_size": 2}, {"seed": 7})
        assert config.seed == 7
        assert config.active_strategies() == ["maximal", "minimal"]

    @pytest.mark.parametrize(
        "raw",
        [
            {},
            {"model": "lorenz"},
            {"model": "saddle", "speed": 1},
            {"model": "saddle", "dt": 0.3, "T": 1.0},
            {"model": "saddle", "strategies": ["fastest"]},
            {"model": "saddle", "strategies": [1]},
            {"model": "heaviside-rd", "omega": 10.0},
            {"model": "saddle", "suite": "everything"},
            {"model": "heaviside-rd", "x0_equilibrium": "one"},
            {"model": "heaviside-rd", "n": 15, "k_max": 3},
            {"model": "heaviside-rd", "n": 15, "k": 2, "k_max": 1},
            {"model": "heaviside-rd", "n": 15, "k_max": 1, "x0_equilibrium": "2,1"},
        ],
    )
    def test_rejects(self, raw):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping(raw)

    def test_lobe_limit_binds_only_rd(self):
        assert RunConfig.from_mapping({"model": "saddle", "n": 15}).k_max == 3
        config = RunConfig.from_mapping({"model": "heaviside-rd", "n": 31, "k_max": 3})
        assert config.n // 8 == config.k_max

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(tmp_path / "absent.toml")


class TestCommands:
    """Exit codes and artifacts of the CLI"""

    def test_config_errors_exit_2(self, tmp_path):
        assert run_cli(tmp_path, "simulate", "dt = 0.01\n")[0] == 2
        assert run_cli(tmp_path, "simulate", 'model = "saddle"\ncolour = 1\n')[0] == 2
        assert run_cli(tmp_path, "simulate", 'model = "saddle"\ndt = 0.3\nT = 1.0\n')[0] == 2
        assert run_cli(tmp_path, "simulate", SQRT_RUN + 'strategies = ["fastest"]\n')[0] == 2

    def test_simulate_sqrt_ode(self, tmp_path):
        code, out = run_cli(tmp_path, "simulate", SQRT_RUN)
        assert code == 0
        summary = json.loads((out / "simulate.json").read_text())
        assert len(summary["members"]) == 1
        assert abs(summary["members"][0]["endpoint"][0] - 4.0) < 1e-9
        assert (out / "trajectory_0.csv").exists()
        assert "timestamp" in summary

    def test_deterministic_reruns(self, tmp_path):
        first = tmp_path / "first"
        second = tmp_path / "second"
        first.mkdir()
        second.mkdir()
        run_cli(first, "simulate", SQRT_RUN, "--deterministic")
        run_cli(second, "simulate", SQRT_RUN, "--deterministic")
        a = (first / "out" / "simulate.json").read_bytes()
        b = (second / "out" / "simulate.json").read_bytes()
        assert a == b
        assert b"timestamp" not in a

    def test_expected_k5_failure(self, tmp_path):
        text = (
            'model = "sqrt-ode"\ndt = 0.01\nT = 2.0\nx0 = [0.0]\n'
            'strategies = ["minimal", "maximal", "zero", "depart:0.5:+", "depart:0.5:-"]\n'
            'suite = "k5"\nexpect_fail = true\n'
        )
        code, out = run_cli(tmp_path, "verify", text)
        assert code == 0
        summary = json.loads((out / "verify.json").read_text())
        assert summary["passed"] is False and summary["expected_failure"] is True

    def test_degenerate_comparison_is_a_mismatch(self, tmp_path):
        text = (
            'model = "heaviside-rd"\nn = 31\ndt = 0.005\nT = 0.5\nperturbation = 0.0\n'
            'suite = "comparison"\n'
        )
        assert run_cli(tmp_path, "verify", text)[0] == 5

    def test_ordering(self, tmp_path):
        text = 'model = "heaviside-rd"\nn = 63\ndt = 0.001\nT = 1.0\nk_max = 3\n'
        code, out = run_cli(tmp_path, "verify", text, "--suite", "ordering")
        assert code == 0
        report = json.loads((out / "verify.json").read_text())["report"]
        assert report["strictly_increasing"] is True

    def test_rd_suite_on_a_zoo_model(self, tmp_path):
        assert run_cli(tmp_path, "verify", SQRT_RUN + 'suite = "ordering"\n')[0] == 5
        assert run_cli(tmp_path, "verify", SQRT_RUN + 'suite = "filippov"\n')[0] == 5

    def test_verify_needs_a_suite(self, tmp_path):
        assert run_cli(tmp_path, "verify", SQRT_RUN)[0] == 2

    def test_axioms_on_the_saddle(self, tmp_path):
        text = 'model = "saddle"\ndt = 0.02\nT = 1.0\nstrategies = ["maximal"]\n'
        assert run_cli(tmp_path, "verify", text, "--suite", "axioms")[0] == 0

    def test_equilibria(self, tmp_path):
        text = 'model = "heaviside-rd"\nn = 31\ndt = 0.005\nT = 0.5\nk_max = 2\n'
        code, out = run_cli(tmp_path, "equilibria", text)
        assert code == 0
        assert sorted(p.name for p in out.glob("v_*.csv")) == [
            "v_1m.csv", "v_1p.csv", "v_2m.csv", "v_2p.csv"
        ]
        summary = json.loads((out / "equilibria.json").read_text())
        assert summary["equilibria"][0]["zeros"] == []

    def test_equilibria_needs_rd(self, tmp_path):
        assert run_cli(tmp_path, "equilibria", SQRT_RUN)[0] == 2

    def test_block_on_the_saddle(self, tmp_path):
        text = (
            'model = "saddle"\ndt = 0.02\nT = 2.0\nstrategies = ["maximal"]\n'
            "grid_resolution = 11\nhorizon_back = 10.0\nprobe_T = 0.5\n"
        )
        code, out = run_cli(tmp_path, "block", text)
        assert code == 0
        summary = json.loads((out / "block.json").read_text())
        assert summary["block"]["boundary_count"] > 0
        assert summary["verification"]["passed"] is True
        assert summary["verification"]["closedness_violations"] == []
        header = (out / "boundary.csv").read_text().splitlines()[0]
        assert header == "x_1,x_2,g_plus,g_minus,label"

    def test_classify_outside_the_band(self, tmp_path):
        text = (
            'model = "saddle"\ndt = 0.02\nT = 2.0\nstrategies = ["maximal"]\n'
            "grid_resolution = 11\nhorizon_back = 10.0\nx0 = [0.0, 0.0]\n"
        )
        assert run_cli(tmp_path, "classify", text)[0] == 3

    def test_block_around_the_stable_rd_equilibrium(self, tmp_path):
        code, out = run_cli(tmp_path, "block", (CONFIGS / "rd_k1.toml").read_text())
        assert code == 0
        summary = json.loads((out / "block.json").read_text())
        assert summary["block"]["label_counts"]["Egress"] == 0
        assert summary["block"]["boundary_count"] > 0
        assert summary["verification"]["K_interior"] is True

    def test_unresolved_lobes_write_nothing(self, tmp_path):
        text = 'model = "heaviside-rd"\nn = 15\ndt = 0.005\nT = 0.5\nk_max = 3\n'
        code, out = run_cli(tmp_path, "equilibria", text)
        assert code == 2
        assert not out.exists()

    def test_late_failure_writes_nothing(self, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise NumericalError("ordering diverged")

        monkeypatch.setattr("isoblock.main.check_energy_ordering", broken)
        text = 'model = "heaviside-rd"\nn = 31\ndt = 0.005\nT = 0.5\nk_max = 2\n'
        code, out = run_cli(tmp_path, "equilibria", text)
        assert code == 3
        assert not out.exists() or list(out.iterdir()) == []
