import csv
import io
import json
import math
import random
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from skinwalk.cli import main, sweep_row
from skinwalk.io import read_trajectory_json, rows_to_text, trajectory_to_dict
from skinwalk import WalkParams, evolve

QUARTER = "0.7853981634"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def tree_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestSimulate:
    def test_dephased_series(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--gamma", "0.4", "--theta", QUARTER, "--eta", "1", "--steps", "8")
        assert code == 0
        rows = parse_csv(out)
        assert len(rows) == 9
        assert float(rows[-1]["n"]) > 0

    def test_symmetric_walk(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--gamma", "0", "--theta", QUARTER, "--steps", "8")
        assert code == 0
        assert all(abs(float(r["n"])) < 1e-10 for r in parse_csv(out))

    def test_zero_steps(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "simulate", "--steps", "0", "--out", str(tmp_path))
        assert code == 0
        rows = parse_csv((tmp_path / "trajectory_distribution.csv").read_text())
        assert {r["t"] for r in rows} == {"0"}
        assert [(r["x"], float(r["P"])) for r in rows if float(r["P"]) > 0] == [("0", pytest.approx(1.0))]

    def test_writes_all_series(self, tmp_path, capsys):
        assert run_cli(capsys, "simulate", "--gamma", "0.5", "--steps", "4", "--out", str(tmp_path))[0] == 0
        header = (tmp_path / "trajectory_series.csv").read_text().splitlines()[0]
        assert header == "t,n,survival,variance"

    def test_csv_line_endings(self, tmp_path, capsys):
        run_cli(capsys, "simulate", "--gamma", "0.5", "--steps", "3", "--out", str(tmp_path))
        assert b"\r" not in (tmp_path / "trajectory_series.csv").read_bytes()

    def test_multiple_values_rejected(self, capsys):
        assert run_cli(capsys, "simulate", "--gamma", "0.1", "0.2")[0] == 2

    def test_engine_error_exit_code(self, capsys):
        # vertical coin with total loss empties the lattice
        code, _, err = run_cli(capsys, "simulate", "--gamma", "1", "--theta", str(math.pi / 2), "--steps", "12")
        assert code == 1
        assert "engine error" in err


class TestDrift:
    def test_dephased_record(self, capsys):
        code, out, _ = run_cli(capsys, "drift", "--gamma", "0.4", "--eta", "1")
        assert code == 0
        (row,) = parse_csv(out)
        assert row["regime"] == "dephased"
        assert float(row["v_closed"]) == pytest.approx(0.25, abs=1e-12)
        assert abs(float(row["realspace_minus_closed"])) <= 0.02

    def test_coherent_record(self, capsys):
        (row,) = parse_csv(run_cli(capsys, "drift", "--gamma", "0.93")[1])
        assert float(row["v_closed"]) == pytest.approx(0.7757, abs=1e-4)
        assert abs(float(row["spectral_minus_closed"])) <= 1e-6

    def test_lossless_record_is_flagged(self, capsys):
        code, out, _ = run_cli(capsys, "drift", "--gamma", "0")
        assert code == 0
        (row,) = parse_csv(out)
        assert "degenerate" in row["flags"].split(";")
        assert row["v_closed"] == ""

    def test_one_record_per_point(self, capsys):
        rows = parse_csv(run_cli(capsys, "drift", "--gamma", "0.2:0.6:3", "--steps", "20")[1])
        assert [float(r["gamma"]) for r in rows] == [0.2, 0.4, 0.6]

    def test_window_override(self, capsys):
        (row,) = parse_csv(run_cli(capsys, "drift", "--gamma", "0.4", "--steps", "30", "--window", "10:30")[1])
        assert (row["window_start"], row["window_end"]) == ("10", "30")

    def test_bad_window(self, capsys):
        assert run_cli(capsys, "drift", "--window", "ten")[0] == 2


class TestFigure:
    @pytest.mark.parametrize("name,expected", [("fig2", 12), ("fig3", 4), ("fig4", 12)])
    def test_file_counts(self, name, expected, tmp_path, capsys):
        assert run_cli(capsys, "figure", name, "--out", str(tmp_path))[0] == 0
        assert len(list((tmp_path / "trajectories").iterdir())) == expected
        assert (tmp_path / "drift_summary.csv").exists()
        assert (tmp_path / "velocity_curve.csv").exists() == (name == "fig2")

    def test_fig2_curve(self, tmp_path, capsys):
        run_cli(capsys, "figure", "fig2", "--out", str(tmp_path))
        rows = parse_csv((tmp_path / "velocity_curve.csv").read_text())
        assert len(rows) == 200
        diff = np.array([float(r["v_c_minus_v_inc"]) for r in rows[1:]])
        assert np.any(diff > 0) and np.any(diff < 0)

    def test_fig3_full_damping_has_no_drift(self, tmp_path, capsys):
        run_cli(capsys, "figure", "fig3", "--out", str(tmp_path))
        rows = parse_csv((tmp_path / "drift_summary.csv").read_text())
        full = [r for r in rows if float(r["mu"]) == 1.0]
        assert len(full) == 2
        assert all(abs(float(r["v_realspace"])) <= 0.01 for r in full)

    def test_fig4_strong_loss_trend(self, tmp_path, capsys):
        run_cli(capsys, "figure", "fig4", "--out", str(tmp_path))
        rows = parse_csv((tmp_path / "drift_summary.csv").read_text())
        strong = sorted((float(r["mu"]), float(r["v_realspace"])) for r in rows if float(r["gamma"]) == 0.93)
        drifts = [v for _, v in strong]
        assert drifts == sorted(drifts)

    def test_json_layout(self, tmp_path, capsys):
        run_cli(capsys, "figure", "fig4", "--out", str(tmp_path), "--format", "json")
        files = sorted((tmp_path / "trajectories").iterdir())
        assert len(files) == 6
        traj = read_trajectory_json(files[0])
        assert traj.steps == 8

    def test_unknown_figure(self, capsys):
        assert run_cli(capsys, "figure", "fig9")[0] == 2


class TestSweep:
    def test_default_grid(self, capsys):
        code, out, _ = run_cli(capsys, "sweep")
        assert code == 0
        rows = parse_csv(out)
        assert len(rows) == 2500
        diff = np.array([float(r["v_c_minus_v_inc"]) for r in rows])
        assert np.any(diff > 0) and np.any(diff < 0)
        keys = [(float(r["gamma"]), float(r["theta"])) for r in rows]
        assert keys == sorted(keys)

    def test_crossover_point(self, capsys):
        (row,) = parse_csv(run_cli(capsys, "sweep", "--gamma", "0.854", "--theta", QUARTER)[1])
        assert abs(float(row["v_c_minus_v_inc"])) <= 2e-3

    def test_empty_axis(self, capsys):
        assert run_cli(capsys, "sweep", "--gamma")[0] == 2
        assert run_cli(capsys, "sweep", "--gamma", "0.1:0.9:0")[0] == 2

    def test_out_of_range(self, capsys):
        assert run_cli(capsys, "sweep", "--gamma", "1.5")[0] == 2

    def test_order_independent(self, capsys):
        out = run_cli(capsys, "sweep", "--gamma", "0.1:0.9:7", "--theta", "0.2:1.4:5")[1]
        points = [(g, t) for g in np.linspace(0.1, 0.9, 7).tolist() for t in np.linspace(0.2, 1.4, 5).tolist()]
        random.Random(3).shuffle(points)
        rows = sorted((sweep_row(p) for p in points), key=lambda r: (r["gamma"], r["theta"]))
        assert rows_to_text(rows) == out

    def test_parallel_matches_serial(self, capsys):
        serial = run_cli(capsys, "sweep", "--gamma", "0.1:0.9:9", "--jobs", "1")[1]
        parallel = run_cli(capsys, "sweep", "--gamma", "0.1:0.9:9", "--jobs", "2")[1]
        assert serial == parallel


class TestCrossoverAndBands:
    def test_crossover(self, capsys):
        rows = parse_csv(run_cli(capsys, "crossover", "--theta", QUARTER, "1.5698")[1])
        assert float(rows[0]["gamma_star"]) == pytest.approx(0.854, abs=1e-3)
        assert rows[1]["found"] == "false" and rows[1]["gamma_star"] == ""

    def test_crossover_domain(self, capsys):
        assert run_cli(capsys, "crossover", "--theta", "0")[0] == 2

    def test_bands(self, capsys):
        rows = parse_csv(run_cli(capsys, "bands", "--gamma", "0.4")[1])
        assert len(rows) == 256
        total = [float(r["ImE+"]) + float(r["ImE-"]) for r in rows]
        assert np.allclose(total, 0.5 * math.log(0.6), atol=1e-10)


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        for tag in ("a", "b"):
            run_cli(capsys, "figure", "fig4", "--out", str(tmp_path / tag))
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_jobs_do_not_change_output(self, tmp_path, capsys):
        run_cli(capsys, "figure", "fig2", "--out", str(tmp_path / "serial"), "--jobs", "1")
        run_cli(capsys, "figure", "fig2", "--out", str(tmp_path / "parallel"), "--jobs", "3")
        assert tree_bytes(tmp_path / "serial") == tree_bytes(tmp_path / "parallel")

    @pytest.mark.parametrize("kwargs", [dict(gamma=0.4, eta=1.0), dict(gamma=0.93), dict(gamma=0.6, eta=0.3), dict(gamma=0.4, mu=0.6, damping_order="after")])
    def test_json_round_trip(self, kwargs, tmp_path):
        traj = evolve(WalkParams(math.pi / 4, steps=10, **kwargs))
        path = tmp_path / "t.json"
        path.write_text(json.dumps(trajectory_to_dict(traj)))
        back = read_trajectory_json(path)
        assert back.params == traj.params
        assert back.method == traj.method
        np.testing.assert_array_equal(back.positions, traj.positions)
        assert np.max(np.abs(back.distributions - traj.distributions)) <= 1e-15
        assert np.max(np.abs(back.survival - traj.survival)) <= 1e-15


class TestConfig:
    def test_file_values_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"gamma": 0.4, "eta": 1, "steps": 30}))
        (row,) = parse_csv(run_cli(capsys, "drift", "--config", str(cfg))[1])
        assert (row["gamma"], row["eta"], row["steps"]) == ("0.4", "1", "30")
        (row,) = parse_csv(run_cli(capsys, "drift", "--config", str(cfg), "--gamma", "0.93")[1])
        assert (row["gamma"], row["steps"]) == ("0.93", "30")

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"gama": 0.4}))
        assert run_cli(capsys, "drift", "--config", str(cfg))[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        assert run_cli(capsys, "drift", "--config", str(tmp_path / "none.json"))[0] == 2

    def test_damping_without_order(self, capsys):
        assert run_cli(capsys, "simulate", "--mu", "0.5")[0] == 2

    def test_dephasing_with_order(self, capsys):
        assert run_cli(capsys, "simulate", "--eta", "0.5", "--mu", "0.5", "--order", "after")[0] == 2


@pytest.mark.skipif(shutil.which("skinwalk") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["skinwalk", "crossover", "--theta", QUARTER], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("theta,gamma_star,found\n")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "skinwalk.cli", "sweep", "--gamma"], capture_output=True, text=True)
    assert proc.returncode == 2
