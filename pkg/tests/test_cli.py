import json
import math
import re
import subprocess
import sys

import pytest

from multinorm.cli import main

SYSTEMS = {
    "table1": {"modes": [[[-0.3, 0.5], [0.2, -0.4]], [[-0.6, 0.0], [0.0, 1.0]]], "lower": [1, 1], "upper": [2, 2]},
    "example1": {"modes": [[[1, 0], [0, -3]], [[-3, 0], [0, 1]]], "lower": [1, 1], "upper": [2, 2]},
    "scalar": {"modes": [[[1]], [[-3]]], "lower": [1, 1], "upper": [2, 2]},
    "unbounded": {"modes": [[[-1, 0], [0, -2]], [[-1, 1], [-1, -1]]], "lower": [1, 1], "upper": [5, "inf"]},
}


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, data in SYSTEMS.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(data))
        out[name] = str(p)
    return out


def interval(text):
    m = re.search(r"sigma in \[([-\d.e+]+), ([-\d.e+]+)\]", text)
    return float(m.group(1)), float(m.group(2))


def test_compute_example1(files, capsys, tmp_path):
    report = tmp_path / "r.json"
    assert main(["compute", files["example1"], "--width", "0.02", "--out", str(report)]) == 0
    lo, hi = interval(capsys.readouterr().out)
    assert lo <= -1 / 3 + 1e-6 and -1 / 3 <= hi
    data = json.loads(report.read_text())
    assert data["upper_report"]["polytopes"]["vertices"]


def test_printed_digits(files, capsys):
    main(["compute", files["scalar"], "--width", "0.05"])
    out = capsys.readouterr().out
    lo_text = re.search(r"sigma in \[([^,]+),", out).group(1)
    assert len(lo_text.lstrip("-").replace(".", "").lstrip("0")) >= 6


@pytest.mark.parametrize("name, verdict", [("example1", "STABLE"), ("scalar", "STABLE"), ("table1", "UNSTABLE")])
def test_check_stability(files, capsys, name, verdict):
    assert main(["check-stability", files[name]]) == 0
    assert capsys.readouterr().out.splitlines()[0] == verdict


def test_input_errors(tmp_path, capsys):
    empty = tmp_path / "e.json"
    empty.write_text(json.dumps({"modes": [], "lower": [], "upper": []}))
    assert main(["compute", str(empty)]) == 2
    bad = tmp_path / "b.json"
    bad.write_text('{"modes": [[[1]]],\n "lower": [1,], "upper": [2]}')
    assert main(["compute", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["compute", str(tmp_path / "missing.json")]) == 2
    assert main(["compute"]) == 2


def test_infinite_bound_exit_code(files, capsys):
    assert main(["compute", files["unbounded"]]) == 3
    assert "cut-tail" in capsys.readouterr().err


def test_cut_tail_table_and_simplify(files, tmp_path, capsys):
    out = tmp_path / "reduced.json"
    assert main(["cut-tail", files["unbounded"], "--simplify", "reduce", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "0.88137359" in text and "closed_form_real_2d" in text
    reduced = json.loads(out.read_text())
    assert reduced["upper"][0] == pytest.approx(1.881374, abs=1e-6)
    assert math.isfinite(reduced["upper"][1])
    assert main(["compute", str(out), "--width", "0.05"]) == 0


def test_cut_tail_matrix_file_and_unstable(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"matrix": [[-1, 0], [0, -2]]}))
    assert main(["cut-tail", str(m)]) == 0
    assert "0.88137359" in capsys.readouterr().out
    u = tmp_path / "u.json"
    u.write_text(json.dumps([[0.5, 0], [0, -2]]))
    assert main(["cut-tail", str(u)]) == 0
    assert "skipped (unstable)" in capsys.readouterr().out


def test_export_csv_and_json(files, tmp_path, capsys):
    report = tmp_path / "t1.json"
    assert main(["compute", files["table1"], "--width", "0.05", "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    verts = data["upper_report"]["polytopes"]["vertices"]
    capsys.readouterr()
    assert main(["export", str(report), "--out", str(tmp_path / "csv")]) == 0
    printed = capsys.readouterr().out
    for j, V in enumerate(verts):
        assert f"space {j + 1}: len P = {len(V)}" in printed
        rows = (tmp_path / "csv" / f"t1_space{j + 1}.csv").read_text().splitlines()
        assert rows[0] == "x,y" and len(rows) == 1 + 2 * len(V)
        pts = [tuple(map(float, r.split(","))) for r in rows[1:]]
        ang = [math.atan2(y, x) for x, y in pts]
        assert ang == sorted(ang)
    assert main(["export", str(report), "--format", "json", "--out", str(tmp_path / "js")]) == 0
    for j, V in enumerate(verts):
        back = json.loads((tmp_path / "js" / f"t1_space{j + 1}.json").read_text())
        assert back["vertices"] == V  # lossless


def test_export_missing_artifact(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert main(["export", str(empty)]) == 4
    assert main(["export", str(tmp_path / "nope.json")]) == 4


def test_oracle_command(files, capsys, tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle", files["scalar"], "--grid-points", "3", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["lower_bound"] == pytest.approx(-1 / 3, abs=1e-12)
    assert data["law"] == [[1, 2.0], [2, 1.0]]


def test_simulate_command(files, capsys):
    assert main(["simulate", files["example1"], "--law", "[[1, 1], [2, 2]]", "--x0", "1,1", "--step", "0.5"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "t,x1,x2"
    t, x1, x2 = map(float, rows[-1].split(","))
    assert t == 3.0 and max(x1, x2) == pytest.approx(math.exp(-1), rel=1e-12)


def test_manifest_rerun_is_byte_identical(files, tmp_path):
    man = tmp_path / "m.json"
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--manifest", str(man), "compute", files["table1"], "--width", "0.02", "--out", str(a)]) == 0
    assert main(["rerun", str(man), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    recorded = json.loads(man.read_text())
    assert recorded["command"] == "compute" and recorded["config"]["n_grid"] == 10


def test_rerun_missing_manifest(tmp_path):
    assert main(["rerun", str(tmp_path / "none.json")]) == 4


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "multinorm", "check-stability", files["scalar"]],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("STABLE")
