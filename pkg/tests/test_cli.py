import json
import subprocess
import sys

import pytest

from pcwqd import __version__
from pcwqd.cli import EXIT_FIT, EXIT_OK, EXIT_VALIDATION, main


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("argv", [
    ["fit-lifetime"],
    ["fit-iv"],
    ["fit-rc"],
    ["geometry", "solve"],
    ["geometry", "solve", "--region", "second-row", "--fraction", "0.5"],
])
def test_subcommands_succeed(argv, capsys, tmp_path):
    code, out, _ = _run(argv + ["--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert out


def test_simulate_then_fit(capsys, tmp_path):
    code, out, _ = _run(["simulate", "rt-scan", "--out-dir", str(tmp_path / "sim")], capsys)
    assert code == EXIT_OK
    scan = tmp_path / "sim" / "inputs" / "scan.csv"
    assert str(scan) in out
    code, _, _ = _run(["fit-scan", str(scan), "--out-dir", str(tmp_path / "fit")], capsys)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "fit" / "report.json").read_text())
    assert doc["kind"] == "rt-scan" and doc["provenance"]["inputs"]["scan"]["synthesized"] is False


def test_scenario_flag_uses_scenario_seed(capsys, tmp_path):
    code, _, _ = _run(["fit-scan", "--scenario", "population-79", "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["provenance"]["seed"] == 79
    assert abs(doc["results"]["statistics"]["fitted"] - 51) <= 5


def test_report_command_resolves_relative_inputs(capsys, tmp_path):
    _run(["simulate", "iv", "--out-dir", str(tmp_path)], capsys)
    (tmp_path / "exp.json").write_text(json.dumps({"kind": "iv", "inputs": {"iv": "inputs/iv.csv"}}))
    code, _, _ = _run(["report", str(tmp_path / "exp.json"), "--out-dir", str(tmp_path / "out")], capsys)
    assert code == EXIT_OK
    assert (tmp_path / "out" / "report.json").is_file()


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("make_argv", [
    lambda t: ["fit-iv", str(t / "missing.csv")],
    lambda t: ["fit-iv", _write(t, "bad.csv", "volts,amps\n0,0\n")],
    lambda t: ["fit-lifetime", "--config", _write(t, "c.json", '{"nope": 1}')],
    lambda t: ["fit-lifetime", "--config", _write(t, "c.json", "{not json")],
    lambda t: ["fit-lifetime", "--config", str(t / "missing.json")],
    lambda t: ["geometry", "solve", "--spec", _write(t, "g.txt", "pitch = 3\n")],
    lambda t: ["geometry", "solve", "--fraction", "1.5"],
    lambda t: ["report", _write(t, "e.json", '{"kind": "iv", "extra": 0}')],
])
def test_validation_errors_exit_2(make_argv, capsys, tmp_path):
    code, _, err = _run(make_argv(tmp_path) + ["--out-dir", str(tmp_path / "o")], capsys)
    assert code == EXIT_VALIDATION
    assert err.startswith("error:")


def test_fit_failure_exit_3_and_keep_going(capsys, tmp_path):
    flat = "f_ac_hz,intensity_counts_per_s\n" + "".join(f"{10 ** k},5.0\n" for k in range(3, 8))
    rc = _write(tmp_path, "flat.csv", flat)
    code, _, err = _run(["fit-rc", rc, "--out-dir", str(tmp_path / "a")], capsys)
    assert code == EXIT_FIT and "InsufficientSpan" in err
    code, _, _ = _run(["fit-rc", rc, "--keep-going", "--out-dir", str(tmp_path / "b")], capsys)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "b" / "report.json").read_text())
    assert doc["errors"][0]["stage"] == "rc"


def test_unreachable_fraction_exit_3(capsys):
    code, _, err = _run(["geometry", "solve", "--fraction", "0.3", "--d-max-nm", "20"], capsys)
    assert code == EXIT_FIT and "Unreachable" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pcwqd", "--version"], capture_output=True, text=True, check=True)
    assert __version__ in out.stdout
