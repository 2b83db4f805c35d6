from __future__ import annotations

import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from isingcdr.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CONFIG = """\
masterSeed = 2
methods = ["raw", "zne", "cdr"]
observables = ["Z2"]
shots = 1024
repeats = 2
trainingCount = 10

[model]
L = 4
hX = 0.5
hZ = 0.9

[initial]
kind = "all_up"

[grid]
dt = 0.5
nSteps = 2

[noise]
p2 = 0.02

[bootstrap]
subsets = 8
subsetSize = 5
"""


@pytest.fixture(autouse=True)
def _no_env_override(monkeypatch):
    monkeypatch.delenv("ISINGCDR_OUTPUT_DIR", raising=False)


def test_stats(capsys):
    assert main(["stats", "--L", "9", "--dt", "0.25", "--steps", "16"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["depth,cnotCount,nonCliffordCount", "176,256,416"]


def test_spectrum_stdout(capsys):
    assert main(["spectrum", "--L", "5", "--hZ", "0.5", "0.9"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 8 and rows[0]["alpha"] == "1" and rows[3]["omega"] == ""


def test_spectrum_to_env_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ISINGCDR_OUTPUT_DIR", str(tmp_path))
    assert main(["spectrum", "--L", "4", "--out", str(tmp_path / "ignored")]) == EXIT_OK
    assert (tmp_path / "spectrum.csv").exists()


def test_run_and_fit(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(CONFIG)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "Z2\tcdr\t" in text
    assert (out / "Z2.csv").exists() and (out / "manifest.json").exists()

    t = np.linspace(0, 3, 31)
    series = tmp_path / "series.csv"
    series.write_text("t,method,median\n" + "".join(f"{float(a)!r},x,{float(np.cos(1.7 * a))!r}\n" for a in t) + "0.0,y,5\n")
    assert main(["fit", str(series), "--where", "method=x"]) == EXIT_OK
    header, values = capsys.readouterr().out.splitlines()
    assert float(values.split(",")[2]) == pytest.approx(1.7, abs=1e-6)


def test_fit_degenerate_is_numeric_failure(tmp_path, capsys):
    f = tmp_path / "flat.csv"
    f.write_text("t,median\n" + "".join(f"{k / 10},0.5\n" for k in range(20)))
    assert main(["fit", str(f)]) == EXIT_NUMERIC


@pytest.mark.parametrize(
    "argv",
    [["run", "/nonexistent/config.toml"], ["fit", "/nonexistent.csv"]],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_bad_column(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("a,b\n1,2\n")
    assert main(["fit", str(f)]) == EXIT_CONFIG


def test_invalid_config_content(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(CONFIG.replace("repeats = 2", "repeats = 0"))
    assert main(["run", str(cfg)]) == EXIT_CONFIG


def test_numeric_failure_exit(capsys):
    assert main(["stats", "--L", "9", "--dt", "-1"]) == EXIT_NUMERIC
    assert main(["spectrum", "--L", "2"]) == EXIT_NUMERIC


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "isingcdr", "stats", "--L", "5"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.splitlines()[1] == "11,8,14"
