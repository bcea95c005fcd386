import csv
import json
from importlib import resources
from pathlib import Path

import pytest

from onlinecov import cli
from onlinecov.fixtures import MONITOR_K1, MONITOR_K2, MONITOR_PLANT, PANEL_PLANT_ROW

DATA = Path(resources.files("onlinecov") / "data")


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_lists_every_flag(capsys):
    for sub, flags in {
        "critval": ["--alpha", "--gamma", "--paths", "--seed", "--cache", "--out"],
        "monitor": ["--history", "--stream", "--k1", "--f", "--weight", "--gamma", "--alpha", "--critval-cache", "--out"],
        "simulate": ["--config", "--reps", "--seed", "--threads", "--out"],
        "analyze": ["--prices", "--top", "--k1", "--k2", "--f", "--weight", "--alpha", "--winsor-sd", "--out"],
        "detect-check": ["--c1", "--c2", "--tau1", "--tau2", "--f", "--kstar", "--n"],
    }.items():
        code, out, _ = run([sub, "--help"], capsys)
        assert code == 0
        for flag in flags + ["--log-level", "--threads"]:
            assert flag in out, (sub, flag)


def test_critval_reproduces_table_and_caches(tmp_path, capsys):
    cache = tmp_path / "cv.json"
    argv = ["critval", "--alpha", 0.05, "--gamma", 0, "--paths", 200000, "--seed", 7, "--cache", cache]
    code, out, _ = run(argv, capsys)
    assert code == 0
    first = float(out)
    assert abs(first - 1.33027) < 0.02
    code, out2, err = run(argv + ["--log-level", "INFO"], capsys)
    assert code == 0 and out2 == out and "cache hit" in err


def test_critval_cache_from_environment(tmp_path, capsys, monkeypatch):
    cache = tmp_path / "env.json"
    monkeypatch.setenv(cli.CACHE_ENV, str(cache))
    code, out, _ = run(["critval", "--alpha", 0.1, "--paths", 10000, "--seed", 1], capsys)
    assert code == 0 and cache.exists()
    assert json.loads(cache.read_text())["entries"][0]["value"] == pytest.approx(float(out), abs=1e-5)


def test_critval_bad_alpha(capsys):
    assert run(["critval", "--alpha", 1.5], capsys)[0] == 2


@pytest.mark.parametrize("f", ["linear", "log1p"])
def test_monitor_detects_planted_jump(tmp_path, capsys, f):
    out = tmp_path / "traj.csv"
    code, text, _ = run(
        ["monitor", "--history", DATA / "h1_history.csv", "--stream", DATA / "h1_stream.csv",
         "--k1", MONITOR_K1, "--f", f, "--critval", 1.33027, "--out", out],
        capsys,
    )
    assert code == 0 and text.startswith("DETECTED at k=")
    k_hat = int(text.split("=")[1])
    assert k_hat > MONITOR_K1 + MONITOR_K2 + MONITOR_PLANT
    rows = list(csv.DictReader(open(out, encoding="utf-8")))
    assert rows[-1]["alarm"] == "1" and int(rows[-1]["k"]) == k_hat
    assert all(r["alarm"] == "0" for r in rows[:-1])


def test_monitor_null_fixture(capsys):
    code, text, _ = run(
        ["monitor", "--history", DATA / "h0_history.csv", "--stream", DATA / "h0_stream.csv",
         "--k1", MONITOR_K1, "--critval", 1.33027],
        capsys,
    )
    assert code == 0 and text.strip() == "no detection"


def test_monitor_reads_stdin(capsys, monkeypatch):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO((DATA / "h1_stream.csv").read_text()))
    code, text, _ = run(["monitor", "--history", DATA / "h1_history.csv", "--k1", MONITOR_K1, "--critval", 1.33027], capsys)
    assert code == 0 and text.startswith("DETECTED")


def test_monitor_rho2_and_eigen_path(capsys):
    code, text, _ = run(
        ["monitor", "--history", DATA / "h1_history.csv", "--stream", DATA / "h1_stream.csv",
         "--k1", MONITOR_K1, "--weight", "rho2", "--path", "eigen"],
        capsys,
    )
    assert code == 0 and text.startswith("DETECTED")


def test_monitor_usage_errors(tmp_path, capsys):
    assert run(["monitor", "--history", DATA / "h0_history.csv"], capsys)[0] == 2
    assert run(["monitor", "--history", DATA / "h0_history.csv", "--k1", 5, "--critval", 1], capsys)[0] == 2
    assert run(["monitor", "--history", tmp_path / "nope.csv", "--k1", 40, "--critval", 1], capsys)[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("x0\n1\nfoo\n")
    assert run(["monitor", "--history", DATA / "h0_history.csv", "--stream", bad, "--k1", 40, "--critval", 1], capsys)[0] == 2


def test_monitor_numeric_failure(tmp_path, capsys):
    hist = tmp_path / "h.csv"
    hist.write_text("\n".join(",".join(["1"] * 3) for _ in range(10)))
    code, _, err = run(["monitor", "--history", hist, "--stream", hist, "--k1", 5, "--critval", 1], capsys)
    assert code == 3 and "numerical failure" in err


def test_simulate_table2_log_cell(tmp_path, capsys):
    out = tmp_path / "rep.json"
    code, _, _ = run(["simulate", "--config", DATA / "table2_gaussian.json", "--out", out], capsys)
    assert code == 0
    cells = {(c["f"], c["weight"]): c for c in json.loads(out.read_text())["cells"]}
    assert abs(cells[("log1p", "rho1_0")]["size_or_power"] - 0.0630) <= 0.025


def test_simulate_threads_byte_identical(tmp_path, capsys):
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}.json"
        argv = ["simulate", "--config", DATA / "table2_reduced.json", "--reps", 16, "--seed", 5, "--threads", threads, "--out", out]
        assert run(argv, capsys)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_csv_and_stdout(tmp_path, capsys):
    out = tmp_path / "r.csv"
    argv = ["simulate", "--config", DATA / "table2_reduced.json", "--reps", 4, "--format", "csv", "--out", out]
    assert run(argv, capsys)[0] == 0
    assert out.read_text().startswith("scenario,f,weight")
    code, text, _ = run(["simulate", "--config", DATA / "table2_reduced.json", "--reps", 4], capsys)
    assert code == 0 and json.loads(text)["meta"]["horizon"] == 300


def test_simulate_usage_errors(tmp_path, capsys):
    assert run(["simulate", "--config", DATA / "table2_reduced.json", "--reps", 0], capsys)[0] == 2
    assert run(["simulate", "--config", tmp_path / "missing.json"], capsys)[0] == 2


def test_analyze_synthetic_panel(tmp_path, capsys):
    out = tmp_path / "an"
    code, text, _ = run(
        ["analyze", "--prices", DATA / "synthetic_prices.csv", "--top", 30, "--k1", 40, "--k2", 40,
         "--f", "log1p", "--critval", 1.33027, "--out", out],
        capsys,
    )
    assert code == 0 and text.startswith("DETECTED")
    man = json.loads((out / "manifest.json").read_text())
    assert 0 <= man["detected_row"] - PANEL_PLANT_ROW <= 15
    assert man["dropped"] == {"ZLEAD": "leading-gap", "ZSPARSE": "missing-rate"}
    assert len(man["selected"]) == 30
    returns = (out / "returns.csv").read_text().splitlines()
    assert returns[man["detected_row"]].split(",")[0] == man["detected_date"]
    assert (out / "trajectory.csv").exists()


def test_analyze_top_too_large(tmp_path, capsys):
    argv = ["analyze", "--prices", DATA / "synthetic_prices.csv", "--top", 100, "--k1", 40, "--critval", 1, "--out", tmp_path]
    assert run(argv, capsys)[0] == 2


@pytest.mark.parametrize(
    "args,order",
    [
        (["--tau1", 1, "--tau2", 1.5, "--f", "linear"], "undetectable by this f"),
        (["--tau1", 1, "--tau2", 1.5, "--f", "square"], "sqrt(n)"),
        (["--tau1", 1, "--tau2", 1], "undetectable"),
        (["--tau1", 1.2, "--tau2", 1.44, "--f", "log1p"], "log n"),
    ],
)
def test_detect_check(capsys, args, order):
    code, text, _ = run(["detect-check", *args], capsys)
    report = json.loads(text)
    assert code == 0 and report["predicted_order"] == order
    if order == "sqrt(n)":
        assert report["regime"] == "late"


def test_detect_check_bad_ratios(capsys):
    assert run(["detect-check", "--c1", 1.2, "--tau1", 1, "--tau2", 1], capsys)[0] == 2
    assert run(["detect-check", "--c2", 0, "--tau1", 1, "--tau2", 1], capsys)[0] == 2
