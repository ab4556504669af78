import csv
import filecmp
import json
import subprocess
import sys

import pytest

from reroute.cli import main

SCENARIO = """\
[scenario]
n_countries = 8
n_products = 15
n_periods = 36
seed = 5
edge_density = 0.9

[injection.tiles]
product = 690710
exporter = C01
importer = C00
via = C02 C03
start = 2011-01
end = 2011-12
magnitude = 4

[injection.tubes]
product = 730411
exporter = C01
importer = C00
via = C04, C05
start = 2010-07
end = 2011-06
magnitude = 4

[decoy.motors]
product = 850134
exporter = C01
importer = C00
start = 2011-03
end = 2012-02
"""


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "scenario.ini"
    cfg.write_text(SCENARIO)
    assert main(["simulate", str(cfg), "-o", str(root / "data")]) == 0
    return root / "data"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_inputs(scenario, capsys):
    assert sorted(p.name for p in scenario.iterdir()) == ["duties.csv", "flows.csv", "focal.csv", "labels.csv"]
    assert [r["product"] for r in read_rows(scenario / "focal.csv")] == ["690710", "730411", "850134"]


def test_ingest_roundtrip(scenario, tmp_path):
    out = tmp_path / "flows.csv"
    assert main(["ingest", str(scenario / "flows.csv"), "-o", str(out)]) == 0
    rows = read_rows(out)
    assert set(rows[0]) == {"period", "origin", "destination", "hs6", "value_usd", "quantity_kg", "provenance"}
    assert {r["provenance"] for r in rows} == {"destination_reported"}


def test_export_network(scenario, capsys):
    assert main(["export-network", str(scenario / "flows.csv"), "--product", "690710", "--period", "2011-03"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "origin,destination,value_usd,quantity_kg" and len(lines) > 10


def test_index_command(scenario, tmp_path):
    out = tmp_path / "idx.csv"
    args = ["index", str(scenario / "flows.csv"), "--product", "690710", "--exporter", "C01", "--importer", "C00"]
    assert main(args + ["-o", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 36 and rows[0]["period"] == "2010-01"
    assert all(float(r["index_value"]) > 0 for r in rows)
    assert main(args + ["--standardize", "-o", str(out)]) == 0
    z = [float(r["index_value"]) for r in read_rows(out)]
    assert abs(sum(z)) < 1e-9


def test_controls_command(scenario, capsys):
    args = ["controls", str(scenario / "flows.csv"), "--duties", str(scenario / "duties.csv")]
    assert main(args + ["--product", "690710", "--exporter", "C01", "--importer", "C00"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "C_p=15" and len(lines) == 16
    assert "730411" not in lines and "850134" not in lines


def test_detect_then_evaluate(scenario, tmp_path, capsys):
    det = tmp_path / "det.csv"
    args = ["detect", str(scenario / "flows.csv"), "--duties", str(scenario / "duties.csv")]
    assert main(args + ["--focal", str(scenario / "focal.csv"), "--spec", "log", "-o", str(det)]) == 0
    rows = read_rows(det)
    assert [r["product"] for r in rows] == ["690710", "730411", "850134"]
    assert all(r["detected"] in ("0", "1") for r in rows)
    conf = tmp_path / "conf.csv"
    assert main(["evaluate", str(det), "--labels", str(scenario / "labels.csv"), "-o", str(conf)]) == 0
    text = capsys.readouterr().out
    assert "alpha=0.05" in text and "Detected" in text
    cells = read_rows(conf)
    assert [c["alpha"] for c in cells] == ["0.1", "0.05", "0.01"]
    for c in cells:
        assert sum(int(c[k]) for k in ("tp", "fp", "fn", "tn")) == 3


def test_run_deterministic_with_manifest(scenario, tmp_path):
    base = [
        "run",
        "--flows", str(scenario / "flows.csv"),
        "--duties", str(scenario / "duties.csv"),
        "--labels", str(scenario / "labels.csv"),
        "--focal", str(scenario / "focal.csv"),
    ]
    assert main(base + ["-o", str(tmp_path / "a")]) == 0
    assert main(["--threads", "3"] + base + ["-o", str(tmp_path / "b")]) == 0
    for name in ("detections.csv", "confusion.csv", "confusion.txt"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["n_flows"] == 3 and manifest["sample"] == ["2010-01", "2012-12"]
    assert set(manifest["inputs"]) == {"flows", "duties", "labels", "focal"}
    assert len(manifest["inputs"]["flows"]["sha256"]) == 64
    dets = read_rows(tmp_path / "a" / "detections.csv")
    assert set(dets[0]) >= {"detected_0.1", "detected_0.05", "detected_0.01"}


def test_missing_duties_file_names_path(scenario, tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(
        [
            "run",
            "--flows", str(scenario / "flows.csv"),
            "--duties", str(missing),
            "--labels", str(scenario / "labels.csv"),
            "--focal", str(scenario / "focal.csv"),
            "-o", str(tmp_path / "out"),
        ]
    )
    assert code != 0
    assert str(missing) in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_bad_alpha_rejected(scenario, tmp_path, capsys):
    code = main(
        [
            "run",
            "--flows", str(scenario / "flows.csv"),
            "--duties", str(scenario / "duties.csv"),
            "--labels", str(scenario / "labels.csv"),
            "--focal", str(scenario / "focal.csv"),
            "--alpha", "0.7",
            "-o", str(tmp_path / "out"),
        ]
    )
    assert code == 1 and "alpha" in capsys.readouterr().err


def test_console_script_module_entry():
    proc = subprocess.run([sys.executable, "-m", "reroute.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
