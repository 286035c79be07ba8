import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lqgame.cli import main, replay_command
from lqgame.reporting import fmt, read_csv, write_csv, RunManifest
from lqgame.errors import IOFailure

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_solve_scenario_rows(tmp_path):
    out = tmp_path / "gains.csv"
    assert main(["solve", "--scenario", "bargain1d-asym", "--out", str(out)]) == 0
    meta, header, rows = read_csv(out)
    assert len(rows) == 10
    assert header[:2] == ["t", "FP_0_0"]
    assert meta["source"] == "bargain1d-asym"
    _, vh, vrows = read_csv(tmp_path / "gains_values.csv")
    assert "UP_0_0" in vh and "cE" in vh and len(vrows) == 11


def test_solve_scalar_demo(tmp_path):
    assert main(["solve", "--config", str(CONFIGS / "scalar_demo.json"), "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "gains.csv")
    row = dict(zip(header, rows[0]))
    assert float(row["FP_0_0"]) == pytest.approx(-1 / 3, abs=1e-15)
    assert float(row["FE_0_0"]) == pytest.approx(-1 / 3, abs=1e-15)
    _, vh, vrows = read_csv(tmp_path / "values.csv")
    assert float(dict(zip(vh, vrows[0]))["UP_0_0"]) == pytest.approx(2 / 9, abs=1e-15)


def test_solve_invalid_config_exit_1(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "bad_rp_zero.json"), "--out", str(tmp_path)])
    assert code == 1
    assert "RP" in capsys.readouterr().err


def test_validate(capsys):
    assert main(["validate", "--scenario", "bargain2d-asym"]) == 0
    assert "WARN" in capsys.readouterr().out
    assert main(["validate", "--config", str(CONFIGS / "bad_rp_zero.json")]) == 1


def test_missing_source_and_missing_file(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == 1
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 4


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--scenario", "bargain1d-asym", "--out", str(blocker / "sub")]) == 4


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--mode", "bogus"])
    assert exc.value.code == 1


def test_simulate_files_and_determinism(tmp_path):
    args = ["simulate", "--scenario", "bargain1d-asym", "--episodes", "1", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("stats.csv", "trace_corrected.csv", "series.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta, header, rows = read_csv(tmp_path / "a" / "trace_corrected.csv")
    assert header[:3] == ["episode", "t", "x_0"] and len(rows) == 11
    assert meta["base_seed"] == "1" and "error_window" in meta


def test_simulate_jobs_identical(tmp_path):
    base = ["simulate", "--scenario", "bargain2d-asym", "--episodes", "60", "--seed", "3"]
    assert main(base + ["--out", str(tmp_path / "j1"), "--jobs", "1"]) == 0
    assert main(base + ["--out", str(tmp_path / "j3"), "--jobs", "3"]) == 0
    assert (tmp_path / "j1" / "stats.csv").read_bytes() == (tmp_path / "j3" / "stats.csv").read_bytes()


def test_simulate_paired(tmp_path):
    assert main(["simulate", "--scenario", "bargain1d-beneficial", "--paired", "--episodes", "50", "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "stats.csv")
    assert [r[header.index("mode")] for r in rows] == ["corrected", "naive"]
    assert {"ap_lo", "ap_hi", "ap_common_mean"} <= set(header)
    assert (tmp_path / "trace_naive.csv").exists()


def test_simulate_config_with_true_state(tmp_path):
    assert main(["simulate", "--config", str(CONFIGS / "scalar_T5.json"), "--episodes", "5", "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "trace_corrected.csv")
    assert float(rows[0][header.index("x_0")]) == 1.0


def test_verify_suites(tmp_path):
    assert main(["verify", "--suite", "tower", "--trials", "20", "--tol", "1e-8", "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "verify_tower.csv")
    assert header == ["mode", "seed", "t", "lhs", "rhs", "residual", "predicted_discrepancy", "pass"]
    assert all(r[-1] == "true" for r in rows)
    assert main(["verify", "--suite", "gain-complementarity", "--trials", "10", "--out", str(tmp_path)]) == 0
    assert main(["verify", "--suite", "naive-discrepancy", "--trials", "10", "--out", str(tmp_path)]) == 0


def test_verify_failure_exit_3(tmp_path, monkeypatch):
    from lqgame import cli
    from lqgame.verify import CheckRow

    bad = [CheckRow("corrected", 0, 1, 1.0, 2.0, 1.0, float("nan"), False)]
    monkeypatch.setattr(cli, "run_suite", lambda *a, **k: bad)
    assert main(["verify", "--suite", "tower", "--out", str(tmp_path)]) == 3
    _, _, rows = read_csv(tmp_path / "verify_tower.csv")
    assert rows[0][-1] == "false"


def test_replay_command_drops_nonsemantic_flags():
    assert replay_command(["simulate", "--jobs", "4", "--out", "d", "--seed", "2"]) == "lqgame simulate --seed 2"
    assert replay_command(["simulate", "--jobs=4", "--out=d"]) == "lqgame simulate"


def test_float_format_round_trips(tmp_path, rng):
    values = list(rng.standard_normal(200) * 10.0 ** rng.integers(-20, 20, 200))
    path = write_csv(tmp_path / "f.csv", ["v"], [[v] for v in values], RunManifest(command="x", source="y"))
    _, _, rows = read_csv(path)
    assert [float(r[0]) for r in rows] == values
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(float("nan")) == "nan"


def test_write_failure_is_io_error(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    with pytest.raises(IOFailure):
        write_csv(blocker / "x.csv", ["a"], [])


def test_module_entry_point_and_fallback_kernel(tmp_path):
    env = dict(os.environ, LQGAME_KERNEL="python")
    out = subprocess.run(
        [sys.executable, "-c", "from lqgame import kernel; print(kernel.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
    res = subprocess.run(
        [sys.executable, "-m", "lqgame", "solve", "--config", str(CONFIGS / "bad_rp_zero.json"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 1


def test_fallback_kernel_gives_identical_stats(tmp_path):
    cmd = [sys.executable, "-m", "lqgame", "simulate", "--scenario", "bargain1d-asym", "--episodes", "30"]
    subprocess.run(cmd + ["--out", str(tmp_path / "c")], check=True, capture_output=True)
    subprocess.run(cmd + ["--out", str(tmp_path / "p")], check=True, capture_output=True,
                   env=dict(os.environ, LQGAME_KERNEL="python"))
    assert (tmp_path / "c" / "stats.csv").read_bytes() == (tmp_path / "p" / "stats.csv").read_bytes()
    assert np.isfinite(float(read_csv(tmp_path / "c" / "stats.csv")[2][0][5]))
