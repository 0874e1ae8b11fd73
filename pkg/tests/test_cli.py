import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from torusns import presets
from torusns.cli import EXIT_DIVERGED, EXIT_ERROR, EXIT_OK, main
from torusns.spectral import save_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


TG_SMALL = {
    "scheme": {"n": 2, "L": 4, "nu": 0.05, "T": 0.5, "N": 5, "mode": "ForwardEuler"},
    "preset": {"name": "taylor_green_2d"},
    "adaptive": {"target_err": 1e-2, "N_max": 10},
}


def test_run_adaptive_outputs(tmp_path):
    cfg = write(tmp_path, TG_SMALL)
    assert main(["run", cfg, "--out-dir", str(tmp_path / "o")]) == EXIT_OK
    out = tmp_path / "o"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"] == "converged"
    assert summary["analytic_h2_rel_error"] < 0.05
    assert set(summary["stage_errors"]) and set(summary["stage_orders"])
    snaps = json.loads((out / "snapshots.json").read_text())
    assert snaps["times"][-1] == 0.5 and len(snaps["snapshots"]) == len(snaps["steps"])
    rows = list(csv.DictReader(open(out / "diagnostics.csv")))
    assert rows[0]["step"] == "0" and float(rows[-1]["t"]) == 0.5
    assert "wall_time_s" in json.loads((out / "timing.json").read_text())


def test_run_is_deterministic(tmp_path):
    doc = {"scheme": {"n": 2, "L": 3, "nu": 0.05, "T": 0.25, "N": 4},
           "preset": {"name": "random_decay", "params": {"s": 1.5, "C": 1.0}}}
    cfg = write(tmp_path, doc)
    for d in ("a", "b"):
        assert main(["run", cfg, "--out-dir", str(tmp_path / d), "--seed", "7"]) == EXIT_OK
    for name in ("snapshots.json", "diagnostics.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    main(["run", cfg, "--out-dir", str(tmp_path / "c"), "--seed", "8"])
    assert (tmp_path / "c" / "snapshots.json").read_bytes() != \
        (tmp_path / "a" / "snapshots.json").read_bytes()


def test_shipped_taylor_green_config(tmp_path):
    assert main(["run", str(CONFIGS / "taylor_green.json"), "--out-dir", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["analytic_h2_rel_error"] < 1e-3


@pytest.mark.parametrize("doc", [
    {"scheme": {}, "preset": {"name": "taylor_green_2d"}, "extra": 1},
    {"scheme": {"nu": -1}, "preset": {"name": "taylor_green_2d"}},
    {"scheme": {"mode": "Leapfrog"}, "preset": {"name": "taylor_green_2d"}},
    {"scheme": {}},
    {"scheme": {}, "preset": {"name": "nope"}},
    {"scheme": {}, "preset": {"name": "random_decay", "params": {"L": 3, "s": 1.5, "C": 1}}},
    {"scheme": {}, "preset": {"name": "random_decay", "params": {"s": 1.5, "C": -1}}},
    {"scheme": {"n": 3}, "preset": {"name": "taylor_green_2d"}},
    {"scheme": {}, "preset": {"name": "taylor_green_2d"}, "adaptive": {"target_err": 0}},
    {"scheme": {}, "preset": {"name": "taylor_green_2d"}, "picard": {"bogus": 1}},
    {"scheme": {}, "preset": {"name": "file"}},
])
def test_malformed_config(tmp_path, doc):
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_ERROR


def test_unreadable_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_ERROR
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_ERROR
    assert main(["classify", str(bad)]) == EXIT_ERROR
    assert main(["verify", "nosuch"]) == EXIT_ERROR
    assert main([]) == EXIT_ERROR
    cfg = write(tmp_path, TG_SMALL)
    assert main(["run", cfg, "--threads", "0"]) == EXIT_ERROR


def test_run_diverged_exit(tmp_path):
    doc = {"scheme": {"n": 2, "L": 4, "nu": 1.0, "T": 1.0, "N": 4, "mode": "ForwardEuler"},
           "preset": {"name": "random_decay", "params": {"s": 1.5, "C": 1.0}}}
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_DIVERGED
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["verdict"] == "diverged" and summary["norm_history"]


def test_run_inconclusive_exit(tmp_path):
    doc = dict(TG_SMALL, adaptive={"target_err": 1e-12, "N_max": 6})
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_DIVERGED
    assert json.loads((tmp_path / "summary.json").read_text())["verdict"] == "inconclusive"


def test_run_picard_and_dilatation(tmp_path):
    base = {"scheme": {"n": 2, "L": 4, "nu": 0.05, "T": 0.5, "N": 5},
            "preset": {"name": "taylor_green_2d"}}
    pic = dict(base, picard={"max_iter": 5})
    assert main(["run", write(tmp_path, pic), "--out-dir", str(tmp_path / "p")]) == EXIT_OK
    s = json.loads((tmp_path / "p" / "summary.json").read_text())
    assert s["verdict"] == "converged" and s["picard_iterations"] <= 3
    dil = dict(base, dilatation={"lam": 1.0, "mu": 1.0})
    assert main(["run", write(tmp_path, dil), "--out-dir", str(tmp_path / "d")]) == EXIT_OK
    s = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert s["verdict"] == "completed" and abs(s["final_time"] - 0.5) < 1e-12


def test_run_controlled_single_stage(tmp_path):
    doc = {"scheme": {"n": 2, "L": 3, "T": 0.25, "N": 4, "control": "ExtendedZeroMode"},
           "preset": {"name": "random_decay", "params": {"s": 1.5, "C": 1.0}}}
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "diagnostics.csv")))
    assert all(float(r["zero_mode_max"]) == 0.0 for r in rows)


@pytest.mark.parametrize("suite", ["bounds", "bch", "trotter", "basis"])
def test_verify_suites(tmp_path, suite):
    assert main(["verify", suite, "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / f"verify_{suite}.csv")))
    assert len(rows) > 1


def test_compare_shear(tmp_path):
    assert main(["compare", str(CONFIGS / "shear_compare.json"), "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "comparison.csv")))
    assert [int(r["N"]) for r in rows] == [4, 5, 6, 7]
    assert all(float(r["dist_trotter"]) <= 1e-10 for r in rows)
    euler = [float(r["dist_euler"]) for r in rows]
    assert all(1.7 < a / b < 2.3 for a, b in zip(euler, euler[1:]))
    rk4 = [float(r["dist_rk4"]) for r in rows]
    assert all(b < a for a, b in zip(rk4, rk4[1:]))


def test_compare_small_random_monotone(tmp_path):
    doc = {"scheme": {"n": 2, "L": 4, "nu": 0.05, "T": 0.25, "N": 5},
           "preset": {"name": "random_decay", "params": {"s": 1.5, "C": 0.5}},
           "compare": {"N_min": 3, "N_max": 6}}
    assert main(["compare", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "comparison.csv")))
    for key in ("dist_trotter", "dist_euler", "dist_rk4"):
        d = [float(r[key]) for r in rows]
        assert all(b < a for a, b in zip(d, d[1:])), key


def test_classify(tmp_path, capsys):
    f = tmp_path / "f.json"
    save_field(presets.random_decay(8, 2, 1.5, 1.0, 0), f)
    assert main(["classify", str(f), "--out-dir", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["verdict"] == "Convergent"
    assert json.loads(capsys.readouterr().out) == doc


def test_file_preset(tmp_path):
    f = tmp_path / "h.json"
    save_field(presets.taylor_green_2d(4), f)
    doc = {"scheme": {"n": 2, "L": 4, "T": 0.1, "N": 3}, "preset": {"name": "file", "path": str(f)}}
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_OK
    doc["scheme"]["L"] = 5
    assert main(["run", write(tmp_path, doc), "--out-dir", str(tmp_path)]) == EXIT_ERROR


def test_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "torusns.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "run" in proc.stdout
