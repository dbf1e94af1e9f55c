import csv
import json
import math
import subprocess
import sys

import pytest

from bicgrate.cli import main, make_manifest


def read_csv(path):
    return list(csv.reader(open(path)))


def test_thresholds(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["thresholds", "--kx", "0.5", "--nmax", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["index", "energy"]
    assert [r[0] for r in rows[1:]] == ["0", "-1", "1"]
    assert float(rows[2][1]) == pytest.approx((2 * math.pi - 0.5) ** 2, rel=1e-15)
    man = json.load(open(str(out) + ".manifest.json"))
    assert man["schema"] == "v1" and man["command"] == "thresholds"
    assert len(man["input_hash"]) == 64 and man["outputs"] == [str(out)]


def test_manifest_hash_ignores_time():
    a = make_manifest("x", {"k": 1.0}, [])
    b = make_manifest("x", {"k": 1.0}, [])
    c = make_manifest("x", {"k": 2.0}, [])
    assert a["input_hash"] == b["input_hash"] != c["input_hash"]


def test_bound_search_and_field_map(tmp_path):
    rec = tmp_path / "rec.json"
    assert main(["bound-search", "--region", "c1", "--kx", "0", "--nmax", "1",
                 "--out", str(rec)]) == 0
    doc = json.load(open(rec))
    assert doc["records"][0]["indices"] == [1]
    assert doc["records"][0]["k"] == pytest.approx(6.206137115600592, rel=1e-12)
    fm = tmp_path / "field.csv"
    assert main(["field-map", "--record-file", str(rec), "--nx", "4", "--nz", "8",
                 "--out", str(fm)]) == 0
    rows = read_csv(fm)
    assert rows[0] == ["x", "z", "re", "im", "abs"] and len(rows) == 33
    side = json.load(open(str(fm) + ".json"))
    assert side["bloch_residual"] < 1e-10
    assert json.load(open(str(fm) + ".manifest.json"))["command"] == "field-map"


def test_bound_search_below_stdout(capsys):
    assert main(["bound-search", "--region", "below", "--kx", str(math.pi), "--h", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["records"][0]["family"] == "plus"


def test_scatter_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("BICGRATE_THREADS", "1")
    out = tmp_path / "s.csv"
    assert main(["scatter-sweep", "--kx", "0.6", "--h-range", "0.3", "0.5",
                 "--k-range", "2", "4", "--grid", "3", "4", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["h", "k", "specular", "flux_error", "status"]
    assert len(rows) == 13
    for r in rows[1:]:
        assert r[4] == "ok" and 0 <= float(r[2]) <= 1 and abs(float(r[3])) < 1e-10


def test_field_map_scattering(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["field-map", "--scatter-at", "3.5", "--kx", "0.4", "--h", "0.5",
                 "--nx", "4", "--nz", "6", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 25


def test_diophantine(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["diophantine", "--channels", "3", "--bound", "3", "--R", "0.1",
                 "--out", str(out)]) == 0
    rows = {r[0]: r for r in read_csv(out)[1:]}
    assert "3 2 1" in rows and rows["3 2 1"][4] == "3"
    assert float(rows["2 1 1"][9]) > 1        # eps_c on a real curve
    assert rows["3 2 1"][9] == "nan"
    assert not any(v.startswith("-0") and float(v) == 0 for r in rows.values() for v in r[1:])


def test_exit_codes(tmp_path, capsys):
    assert main(["bound-search", "--region", "below", "--kx", "1"]) == 2
    assert main(["field-map", "--scatter-at", "3", "--out", str(tmp_path / "x")]) == 2
    assert main(["bound-search", "--region", "c1", "--kx", "3.0", "--R", "0.3",
                 "--eps", "10"]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "GateFailed" and err["lhs"] < err["rhs"]
    assert main(["bound-search", "--region", "c1", "--kx", "0.5", "--a", "0.2"]) == 4
    with pytest.raises(SystemExit) as exc:
        main(["thresholds"])
    assert exc.value.code == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "bicgrate.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
