import csv
import json
import subprocess
import sys

import pytest

from roughheat.cli import _cell, main, table_filename
from roughheat.experiments import EXPERIMENTS, Table


@pytest.fixture(scope="module")
def kernel_runs(tmp_path_factory):
    """Two identical runs of the quickest experiment plus a manifest replay."""
    base = tmp_path_factory.mktemp("cli")
    codes = [main(["kernel_scaling", "--out", str(base / d)]) for d in ("a", "b")]
    codes.append(main(["kernel_scaling", "--config", str(base / "a" / "manifest.json"), "--out", str(base / "c")]))
    return base, codes


def test_cell_formatting():
    assert _cell(True) == "true" and _cell(3) == "3"
    assert _cell(0.1) == "0.1" and float(_cell(1 / 3)) == 1 / 3
    assert _cell(float("nan")) == "nan" and _cell(float("-inf")) == "-inf"
    assert table_filename("x", Table("t", ["c"], [], seed=4)) == "x_t_seed4.csv"
    assert table_filename("x", Table("t", ["c"], [])) == "x_t.csv"


def test_unknown_experiment_exits_2(tmp_path, capsys):
    assert main(["no_such_experiment", "--out", str(tmp_path)]) == 2


def test_missing_out_exits_2():
    assert main(["kernel_scaling"]) == 2


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nn1 = 48\n", encoding="utf-8")
    assert main(["kernel_scaling", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("value", ["two", "0"])
def test_invalid_thread_count_exits_2(tmp_path, monkeypatch, value):
    monkeypatch.setenv("ROUGHHEAT_THREADS", value)
    assert main(["kernel_scaling", "--out", str(tmp_path)]) == 2


def test_passing_run_exits_0_and_writes_outputs(kernel_runs):
    base, codes = kernel_runs
    assert codes == [0, 0, 0]
    manifest = json.loads((base / "a" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["passed"] is True and manifest["experiment"] == "kernel_scaling"
    assert {"roughheat", "numpy", "python"} <= set(manifest["versions"])
    for name in manifest["files"]:
        assert (base / "a" / name).exists()


def test_schema_lists_every_csv_header(kernel_runs):
    base, _ = kernel_runs
    schema = json.loads((base / "a" / "schema.json").read_text(encoding="utf-8"))
    csvs = sorted(p.name for p in (base / "a").glob("*.csv"))
    assert sorted(schema) == csvs
    for name, entry in schema.items():
        with open(base / "a" / name, encoding="utf-8", newline="") as fh:
            assert next(csv.reader(fh)) == entry["columns"]


def test_outputs_are_byte_identical_across_runs_and_replay(kernel_runs):
    base, _ = kernel_runs
    for p in (base / "a").glob("*.csv"):
        data = p.read_bytes()
        assert data == (base / "b" / p.name).read_bytes()
        assert data == (base / "c" / p.name).read_bytes()
        assert b"\r\n" not in data


def test_acceptance_failure_exits_1(tmp_path, capsys):
    # the literal decay window of the boundary layer is not attainable on this datum
    assert main(["heat_decay", "--out", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and out.strip().splitlines()[-1].startswith("heat_decay: FAIL")
    checks = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))["checks"]
    assert any(c["required"] and not c["passed"] for c in checks)


def test_console_entry_point_lists_experiments():
    out = subprocess.run([sys.executable, "-m", "roughheat", "--help"], capture_output=True, text=True, check=True)
    for name in EXPERIMENTS:
        assert name in out.stdout
