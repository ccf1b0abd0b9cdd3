import argparse
import csv
import io
import json
import subprocess
import sys

import pytest

from wgmaxwell.cli import RunConfig, main, parse_levels, run
from wgmaxwell.verify import NORMS, SLICE_FIELDS


def run_text(**kw):
    out = io.StringIO()
    cfg = RunConfig(**{"cases": ["s3"], "levels": [1, 2], **kw})
    assert run(cfg, out) == 0
    return out.getvalue()


@pytest.mark.parametrize("text, levels", [("1..3", [1, 2, 3]), ("2..2", [2]), ("4", [4])])
def test_parse_levels(text, levels):
    assert parse_levels(text) == levels


@pytest.mark.parametrize("text", ["0..2", "3..1", "a..b", "1-3"])
def test_parse_levels_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_levels(text)


def test_text_table():
    out = run_text()
    lines = out.splitlines()
    assert lines[0].startswith("case s3")
    assert "|||e_h|||_1" in lines[1]
    rows = [ln.split() for ln in lines[2:4]]
    assert [r[0] for r in rows] == ["1", "2"]
    assert rows[0][2] == "-" and float(rows[1][2]) > 0


def test_csv_table():
    rows = list(csv.DictReader(io.StringIO(run_text(fmt="csv"))))
    assert [r["level"] for r in rows] == ["1", "2"]
    assert rows[0]["rate_e0"] == "" and float(rows[1]["rate_e0"]) > 0
    assert all(float(rows[1][n]) > 0 for n in NORMS)


def test_json_table():
    d = json.loads(run_text(fmt="json"))
    assert d[0]["case"] == "s3" and d[0]["levels"] == [1, 2]
    assert set(d[0]["norms"]) == set(NORMS)


def test_output_is_deterministic():
    assert run_text(fmt="csv") == run_text(fmt="csv")


def test_paths_agree_at_display_precision():
    assert run_text(path="full").replace("path=full", "") == run_text().replace("path=condensed", "")


def test_out_file(tmp_path):
    target = tmp_path / "table.csv"
    assert run(RunConfig(["s1"], [1], fmt="csv", out=str(target)), io.StringIO()) == 0
    assert target.read_text().startswith("case,k,variant")


def test_slice_files(tmp_path):
    out = io.StringIO()
    assert run(RunConfig(["s3"], [2], slice_z=0.25, slice_res=4, out=str(tmp_path)), out) == 0
    for name in SLICE_FIELDS:
        assert (tmp_path / f"s3_L2_z0.25_{name}.csv").exists()
    assert out.getvalue().startswith("case s3")


def test_slice_to_stdout():
    text = run_text(levels=[1], slice_z=0.5, slice_res=2)
    assert text.count("# s3_L1_z0.5 ") == len(SLICE_FIELDS)


@pytest.mark.parametrize("argv", [
    ["--levels", "3..1"],
    ["--case", "s9"],
    ["--order", "0", "--level", "1"],
    ["--nu", "-1", "--level", "1"],
    ["--slice-z", "1.5", "--level", "1"],
    ["--level", "1", "--levels", "1..2"],
])
def test_bad_flags_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_main_runs(capsys):
    assert main(["--case", "s1", "--level", "1", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("case,k")


def test_dump_mesh(capsys):
    assert main(["--dump-mesh", "2"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert len(d["cells"]) == 8


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "wgmaxwell.cli", "--case", "s1", "--level", "1"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("case s1")
