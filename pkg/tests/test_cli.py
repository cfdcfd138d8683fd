import json
import subprocess
import sys

import pytest

from piezo_stab import cli
from piezo_stab.errors import ConfigError, InvalidParameters, NotResonant

from conftest import CONFIGS


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "piezo_stab", *args], capture_output=True, text=True, cwd=cwd)


def cfg(name):
    return str(CONFIGS / f"{name}.cfg")


@pytest.mark.parametrize(
    "name, head",
    [
        ("pe_golden", "QuadraticSurd; Polynomial energy decay t^{-1/2}"),
        ("pe_resonant", "RationalOddOdd 3/1; NOT strongly stable; resonance λ*=3π/(2σ₊)"),
        ("pe_mixed", "RationalMixedParity 2/1; Exponential"),
    ],
)
def test_classify_headline(name, head):
    r = run("classify", "--config", cfg(name))
    assert r.returncode == 0, r.stderr
    assert r.stdout.splitlines()[0] == head


def test_classify_report_fields(capsys):
    assert cli.main(["classify", "--config", cfg("pe_golden")]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines()[1:])
    assert out["sigma_plus_sq"] == "(3 + 1*sqrt(5))/2"
    assert float(out["sigma_plus"]) == pytest.approx((1 + 5**0.5) / 2)
    assert out["rate"] == "1/2"


def test_classify_witnesses(capsys):
    cli.main(["classify", "--config", cfg("pe_resonant")])
    lines = capsys.readouterr().out.splitlines()
    assert "witness=1,0 lambda_star=1.5707963267948966" in lines


def test_validate_exit_codes(tmp_path, capsys):
    assert cli.main(["validate", "--config", cfg("pe_mixed")]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text((CONFIGS / "pe_golden.cfg").read_text().replace("alpha = 2", "alpha = 1"))
    assert cli.main(["validate", "--config", str(bad)]) == InvalidParameters.exit_code
    assert "alpha1" in capsys.readouterr().out
    assert cli.main(["classify", "--config", str(bad)]) == InvalidParameters.exit_code


def test_config_error_reports_line(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("variant = PE\n# comment\nrho = 1\nrhoo = 2\n")
    r = run("classify", "--config", str(bad))
    assert r.returncode == ConfigError.exit_code
    assert "line 4" in r.stderr


def test_missing_file_and_bad_args(tmp_path):
    assert run("classify", "--config", str(tmp_path / "nope.cfg")).returncode == 1
    assert run("resolvent", "--config", cfg("pe_golden"), "--grid", "3:1:5").returncode == 2
    assert run("spectrum", "--config", cfg("pe_golden"), "--mesh", "a,b").returncode == 2


def test_modes_not_resonant():
    r = run("modes", "--config", cfg("pe_mixed"))
    assert r.returncode == NotResonant.exit_code


def test_modes_csv(capsys):
    assert cli.main(["modes", "--config", cfg("pe_resonant"), "--nmax", "4", "--points", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n_plus,n_minus,lambda_star,x,v,p"
    assert len(lines) == 1 + 2 * 5
    assert lines[1].startswith("1,0,1.5707963267948966,0,")


def test_mesh_arity_error():
    r = run("spectrum", "--config", cfg("epe_golden"), "--mesh", "4,4")
    assert r.returncode == 11


def test_resonant_simulation_reports_degenerate_fit(tmp_path):
    out = tmp_path / "o"
    r = run("simulate", "--config", cfg("pe_resonant"), "--mesh", "40", "--horizon", "10",
            "--init", "resonant", "--out", str(out))
    assert r.returncode == 12
    report = (out / "decay_report.csv").read_text()
    ratio = float(report.splitlines()[1].split(",")[2])
    assert ratio > 0.999
    assert (out / "energy_trace.csv").exists() and (out / "manifest.json").exists()


COMMANDS = [
    ["classify"],
    ["simulate", "--mesh", "10", "--horizon", "10"],
    ["spectrum", "--mesh", "8"],
    ["resolvent", "--mesh", "10", "--grid", "1:10:7", "--jobs", "2"],
    ["modes", "--nmax", "3", "--points", "11"],
]


@pytest.mark.parametrize("args", COMMANDS, ids=[c[0] for c in COMMANDS])
def test_outputs_are_byte_identical(args, tmp_path):
    name = "pe_resonant" if args[0] == "modes" else "epe_golden" if args[0] == "simulate" else "pe_golden"
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        r = run(*args, "--config", cfg(name), "--out", str(out))
        assert r.returncode == 0, r.stderr
        files = sorted(p.name for p in out.iterdir())
        digests.append({f: (out / f).read_bytes() for f in files})
    assert digests[0] == digests[1]
    manifest = json.loads(digests[0]["manifest.json"])
    assert manifest["subcommand"] == args[0]
    assert len(manifest["config_sha256"]) == 64
    assert set(manifest["outputs"]) | {"manifest.json"} == set(digests[0])


def test_simulate_stdout_is_decay_report(capsys):
    assert cli.main(["simulate", "--config", cfg("epe_golden"), "--mesh", "10", "--horizon", "20"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "model,param,value"
    assert lines[1].startswith("exponential,omega,")
