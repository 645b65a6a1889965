import csv
import io
import json
import subprocess
import sys

import pytest

from iifs.cli import main, parse_grid


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def provenance(text):
    return dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))


def test_expand_golden_ratio(capsys):
    code, out, _ = run(["expand", "--system", "cf", "--x", "0.6180339887", "--digits", "10"], capsys)
    assert code == 0
    assert [r["digit"] for r in table(out)] == ["1"] * 10
    prov = provenance(out)
    assert {"seed", "precision", "trusted_count"} <= set(prov)


def test_spectrum_grid_contains_quarter(capsys):
    code, out, _ = run(["spectrum", "--family", "e-lambda", "--d", "2", "--sigma-t", "2",
                        "--alpha", "0:8:0.5"], capsys)
    assert code == 0
    rows = {(r["alpha"], r["dim"]) for r in table(out)}
    assert ("4", "0.25") in rows
    assert len(rows) == 17


def test_count(capsys):
    code, out, _ = run(["count", "--n", "2", "--ell", "3"], capsys)
    assert code == 0 and table(out)[0]["count"] == "6"
    code, out, _ = run(["count", "--n", "2", "--ell", "3", "--format", "json"], capsys)
    assert json.loads(out)["count"] == 6


def test_digit_csv_feeds_tau(tmp_path, capsys):
    path = tmp_path / "d.csv"
    assert main(["cantor", "--case", "PowerAlpha", "--alpha", "2", "--mode", "sample",
                 "--seed", "4", "--n-digits", "3000", "-o", str(path)]) == 0
    code, out, _ = run(["tau", "-i", str(path), "--format", "json"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert 1.3 < obj["value"] < 2.3
    assert obj["n_digits"] == 3000


def test_sequence_csv_feeds_formula(tmp_path, capsys):
    path = tmp_path / "seq.csv"
    assert main(["cantor", "--case", "E0", "--mode", "sequence", "--n-max", "600",
                 "-o", str(path)]) == 0
    code, out, _ = run(["cantor", "--table", str(path), "--d", "2"], capsys)
    assert code == 0
    assert abs(float(table(out)[0]["value"]) - 0.5) < 0.01


def test_malformed_csv_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("digit\n3\n4\nfive\n")
    code, _, err = run(["tau", "-i", str(path)], capsys)
    assert code == 1
    assert "line 4" in err


def test_usage_errors_exit_2(capsys):
    assert run(["nosuch"], capsys)[0] == 2
    assert run(["expand", "--system", "nope", "--x", "0.3", "--digits", "2"], capsys)[0] == 2
    assert run(["spectrum", "--family", "e", "--d", "2", "--alpha", "1:0:1"], capsys)[0] == 2


def test_computation_error_exits_1(capsys):
    code, _, err = run(["expand", "--system", "cf", "--x", "0.5", "--digits", "3"], capsys)
    assert code == 1 and "terminates" in err


def test_environment_precision(monkeypatch, capsys):
    monkeypatch.setenv("IIFS_PRECISION_BITS", "300")
    code, out, _ = run(["project", "--system", "qg", "--word", "2,3"], capsys)
    assert code == 0
    assert provenance(out)["precision"] == "300"


def test_khinchin_deterministic_across_threads(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["khinchin", "--system", "cf", "--samples", "12", "--depth", "150", "--seed", "8",
            "--format", "json"]
    assert main(base + ["--threads", "1", "-o", str(a)]) == 0
    assert main(base + ["--threads", "4", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["seed"] == 8


def test_covers_modes(capsys):
    code, out, _ = run(["covers", "--mode", "critical", "--format", "json"], capsys)
    obj = json.loads(out)
    assert code == 0 and abs(obj["s_star"] - 0.864323619499) < 1e-9
    assert {"M", "tol", "bracket_lo", "bracket_hi"} <= set(obj)
    code, out, _ = run(["covers", "--mode", "scan", "--system", "cf", "--M", "2", "--k", "20",
                        "--s-grid", "0.6:1.2:0.01"], capsys)
    assert code == 0
    assert abs(float(provenance(out)["crossing"]) - 0.8643) < 1e-2
    assert set(table(out)[0]) == {"s", "log_sum", "k"}
    code, out, _ = run(["covers", "--mode", "subdivision", "--alpha", "4", "--sigma-t", "2",
                        "--d", "2", "--n", "10"], capsys)
    assert table(out)[0]["exact"] == "5/19"


def test_pressure_and_density(capsys):
    code, out, _ = run(["pressure", "--system", "linear", "--d", "2", "--root"], capsys)
    assert code == 0 and abs(float(table(out)[0]["t_root"]) - 1) < 1e-6
    code, out, _ = run(["density", "--system", "luroth", "--grid-size", "64",
                        "--iterations", "2"], capsys)
    assert code == 0 and len(table(out)) == 64


def test_parse_grid():
    assert parse_grid("0:1:0.5,inf")[-1] == float("inf")
    assert len(parse_grid("0:8:0.5")) == 17


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "iifs", "count", "--n", "3", "--ell", "3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.strip().splitlines()[-1] == "3,3,10"
