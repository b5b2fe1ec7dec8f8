import csv
import io
import json
import os
import subprocess
import sys

import pytest

from qscissors.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_truncate_balanced_report(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert run("truncate", "--alpha-sq", 0.72, "--eta", 0.5, "--ratio", 1, "--out", out) == 0
    text = capsys.readouterr().out
    assert "rho_out" in text
    report = json.loads(out.read_text())
    assert report["fidelity"] == pytest.approx(0.89, abs=0.01)
    manifest = json.loads((tmp_path / "r.json.manifest.json").read_text())
    assert manifest["command"] == "truncate"
    assert {"version", "config", "outputs", "duration_s", "created"} <= set(manifest)


def test_truncate_vacuum(capsys):
    assert run("truncate", "--alpha-sq", 0, "--eta", 0.5) == 0
    line = capsys.readouterr().out.splitlines()[3]
    assert line.split()[0].startswith("+0.999")


def test_truncate_bad_eta(capsys):
    assert run("truncate", "--eta", 1.5) == 2
    assert "--eta" in capsys.readouterr().err


def test_truncate_no_event():
    assert run("truncate", "--alpha-sq", 0.5, "--eta", 0) == 3


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("scan", "--bogus", 1)
    assert exc.value.code == 2


def test_scan_csv_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["scan", "--range-lo", 0, "--range-hi", 2, "--grid-points", 5, "--eta-lo", 0.5, "--eta-hi", 1,
            "--eta-points", 3]
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    rows = read_csv(a)
    assert rows[0] == ["alpha_sq", "eta", "fidelity", "probability", "rate"]
    assert len(rows) == 1 + 15
    etas = [float(r[1]) for r in rows[1:]]
    assert etas == sorted(etas)
    assert [float(r[0]) for r in rows[1:6]] == [0, 0.5, 1, 1.5, 2]


def test_scan_single_point(tmp_path):
    out = tmp_path / "one.csv"
    assert run("scan", "--range-lo", 0.72, "--range-hi", 0.72, "--grid-points", 1, "--eta-lo", 0.5,
               "--eta-hi", 0.5, "--eta-points", 1, "--out", out) == 0
    assert len(read_csv(out)) == 2


def test_scan_independent_of_thread_count(tmp_path):
    args = ["scan", "--grid-points", 7, "--eta-points", 2]
    env = {**os.environ}
    outs = []
    for threads in ("1", "4"):
        env["QSD_THREADS"] = threads
        p = tmp_path / f"t{threads}.csv"
        subprocess.run([sys.executable, "-m", "qscissors", *map(str, args), "--out", str(p)], check=True, env=env)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_unwritable_output():
    assert run("scan", "--grid-points", 2, "--eta-points", 1, "--out", "/nonexistent/dir/x.csv") == 4


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "qsd.cfg"
    cfg.write_text("# anchor\nalpha_sq = 0.72\neta = 0.7\nratio = 1\n")
    assert run("truncate", "--config", cfg) == 0
    f_file = float(capsys.readouterr().out.split("fidelity")[1])
    assert run("truncate", "--config", cfg, "--eta", 0.5) == 0
    f_flag = float(capsys.readouterr().out.split("fidelity")[1])
    assert f_flag == pytest.approx(0.89117, abs=1e-4)
    assert f_file != f_flag


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run("truncate", "--config", cfg) == 2


def test_optimize_rows(capsys):
    assert run("optimize", "--ratio", 1, "--eta", 0.5, "--objective", "rate") == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["ratio", "eta", "objective", "rank", "alpha_sq", "fidelity", "probability", "rate"]
    assert len(rows) == 2


def test_optimize_vacuum_target(capsys):
    assert run("optimize", "--ratio", 0, "--eta", 0.5) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[1][4]) == 0.0


def test_optimize_json(tmp_path):
    out = tmp_path / "opt.json"
    assert run("optimize", "--ratio", "0.5,2", "--eta", 0.5, "--out", out) == 0
    records = json.loads(out.read_text())
    assert {r["ratio"] for r in records} == {0.5, 2.0}


def test_compare_ideal_csv(capsys):
    assert run("compare-ideal", "--ratio", "1,2", "--grid-points", 5, "--pair-cutoff", 1) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["ratio", "alpha_sq", "f_experimental", "f_ideal"]
    assert len(rows) == 11
    for r in rows[1:]:
        if float(r[1]) == 0:
            assert r[2] == r[3]


def test_calibrate(capsys):
    assert run("calibrate") == 0
    rep = float(capsys.readouterr().out.split()[1])
    assert rep == pytest.approx(1.00077165e8, rel=1e-8)
