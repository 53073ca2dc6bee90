import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bcmtrend.cli import main
from bcmtrend.core import ModelParams
from bcmtrend.harness import solve_alpha0
from bcmtrend.simulation import TrialDesign, simulate_trial_arrays, snapshot


def _write_events(path, snap, with_group=False, with_entry=False):
    cols = ["subject_id", "exposure_years", "event_times"]
    cols += ["entry_years"] if with_entry else []
    cols += ["group"] if with_group else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j in range(snap.size):
            row = [f"S{j}", repr(float(snap.exposure[j])), ";".join(repr(float(t)) for t in snap.event_times[j])]
            if with_entry:
                row.append(repr(float(snap.entry[j])))
            if with_group:
                row.append("T" if snap.group[j] else "C")
            w.writerow(row)
    return str(path)


@pytest.fixture(scope="module")
def trial_snapshot():
    p = ModelParams(solve_alpha0(1.5, 2.0, -1.0), -1.0, math.log(0.6), 1.25)
    arr = simulate_trial_arrays(TrialDesign(300), p, np.random.default_rng(77))
    return snapshot(arr, 4.0)


def test_target_info_output(capsys):
    assert main(["target-info", "--rate-ratio", "0.5", "--power", "0.9"]) == 0
    assert capsys.readouterr().out.strip() == "21.869824"


def test_target_info_bad_ratio(capsys):
    assert main(["target-info", "--rate-ratio", "-1"]) == 2
    assert "rate_ratio" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 4


def test_argparse_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_fit_unblinded(tmp_path, capsys, trial_snapshot):
    path = _write_events(tmp_path / "u.csv", trial_snapshot, with_group=True)
    assert main(["fit", path]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["model"] == "trend" and out["converged"]
    assert out["wald_statistic"] == pytest.approx(
        out["estimates"]["beta"] * math.sqrt(out["information_beta"]), rel=1e-9)
    assert main(["fit", path, "--constant"]) == 0
    assert json.loads(capsys.readouterr().out)["model"] == "constant"


@pytest.mark.parametrize("proc", ["TrendLump", "TrendMix", "ConstLump", "ConstMix"])
def test_fit_blinded(tmp_path, capsys, trial_snapshot, proc):
    path = _write_events(tmp_path / "b.csv", trial_snapshot)
    assert main(["fit", path, "--blinded", "--rate-ratio", "0.7", "--procedure", proc]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] and out["information"] > 0
    assert out["subjects"] == trial_snapshot.size


def test_fit_blinded_needs_effect(tmp_path, capsys, trial_snapshot):
    path = _write_events(tmp_path / "b.csv", trial_snapshot)
    assert main(["fit", path, "--blinded"]) == 2


def test_curve_output(tmp_path, capsys, trial_snapshot):
    path = _write_events(tmp_path / "c.csv", trial_snapshot, with_entry=True)
    assert main(["curve", path, "--rate-ratio", "0.7", "--start", "0.5", "--step", "0.5", "--end", "4"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["t", "TrendLump", "TrendMix", "ConstLump", "ConstMix"]
    assert [float(r[0]) for r in rows[1:]] == [0.5 * k for k in range(1, 9)]
    assert all(v != "NA" for r in rows[1:] for v in r)


def test_curve_needs_entry(tmp_path, capsys, trial_snapshot):
    path = _write_events(tmp_path / "c.csv", trial_snapshot)
    assert main(["curve", path, "--rate-ratio", "0.7"]) == 2


def test_simulate_writes_report(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("[scenario]\nlabel = tiny\nrate_ratio_h1 = 0.5\ntrend_alpha1 = -1\n"
                   "n_total = 40\nreplications = 3\nseed = 5\n")
    assert main(["simulate", str(cfg), "--out", str(tmp_path), "--procedures", "TrendLump,FixedDesign"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert [r["label"] for r in rows] == ["tiny_TrendLump", "tiny_FixedDesign"]
    assert all(r["replications"] == "3" for r in rows)


def test_simulate_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[scenario]\nrate_ratio_h1 = 0.5\nwhatever = 1\n")
    assert main(["simulate", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "bcmtrend.cli", "target-info", "--rate-ratio", "0.7"],
                         capture_output=True, text=True, check=True)
    assert float(out.stdout) == pytest.approx(61.6968, abs=1e-4)
