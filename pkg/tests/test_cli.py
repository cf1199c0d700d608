import json
import subprocess
import sys

import numpy as np
import pytest

from covbrackets import cli
from covbrackets.io import brackets_from_csv, read_section_binary

from conftest import CONFIGS

FREE = str(CONFIGS / "free_particle.json")
BOSON = str(CONFIGS / "vector_boson.json")
MAXWELL = str(CONFIGS / "electrodynamics.json")


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def test_bracket_free_particle(capsys):
    code, out = run(capsys, "bracket", "--config", FREE, "--format", "json")
    assert code == 0
    rows = json.loads(out)["brackets"]
    assert [r["value"] for r in rows] == pytest.approx([-3.0, 3.0], abs=1e-12)
    assert [(r["f"], r["g"]) for r in rows] == [("q(2)", "q(5)"), ("q(5)", "q(2)")]


def test_gauge_variant_pairs_become_error_rows(capsys):
    code, out = run(capsys, "bracket", "--config", MAXWELL, "--format", "csv", "--stable-output")
    assert code == 0
    rows = brackets_from_csv(out)
    assert len(rows) == 6
    bad = [r for r in rows if r["error"]]
    assert all(r["error"] == "GaugeVariantObservable" and "A2(1;100)" in (r["f"], r["g"]) for r in bad)
    assert len(bad) == 4
    good = {(r["f"], r["g"]): r["value"] for r in rows if not r["error"]}
    assert good[("AT1(0.5;000)", "AT2(1.5;100)")] == pytest.approx(-good[("AT2(1.5;100)", "AT1(0.5;000)")])


def test_analyze_reports(capsys):
    code, out = run(capsys, "analyze", "--config", MAXWELL, "--format", "json")
    rep = json.loads(out)
    assert code == 0
    assert rep["kernel_dim"] == 63
    assert rep["final_dim"] == 321
    assert rep["projector_idempotency"] < 1e-12
    assert "timings" in rep
    code, out = run(capsys, "analyze", "--config", BOSON, "--format", "json")
    rep = json.loads(out)
    assert rep["chain_dims"] == [320, 128]
    assert rep["constraints_per_step"] == [192]
    assert rep["omega_condition"] > 1e-3


@pytest.mark.parametrize("config", [FREE, BOSON, MAXWELL])
def test_verify_passes_on_shipped_configs(capsys, config):
    code, out = run(capsys, "verify", "--config", config, "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert all(c["passed"] for c in rep["checks"])


def test_injected_fault_exits_with_invariant_code(capsys):
    code, out = run(capsys, "verify", "--config", FREE, "--format", "csv", "--inject-fault", "asymmetric_omega")
    assert code == 2
    assert "NonAntisymmetric" in out


def test_bad_config_exits_with_validation_code(tmp_path, caplog):
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"kind": "free_particle"}, "time": {"dt": -1, "n_steps": 3}}')
    assert cli.main(["analyze", "--config", str(bad)]) == 1
    assert cli.main(["analyze", "--config", str(tmp_path / "missing.json")]) == 1
    assert "time/dt" in caplog.text


@pytest.mark.parametrize("command", ["analyze", "bracket", "evolve", "verify"])
def test_stable_output_is_byte_identical(capsys, command):
    outs = [run(capsys, command, "--config", BOSON, "--stable-output", "--format", "json")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    assert "timings" not in json.loads(outs[0])


def test_out_directory_writes_every_format(tmp_path, capsys):
    code, out = run(capsys, "evolve", "--config", FREE, "--out", str(tmp_path), "--stable-output")
    assert code == 0 and out == ""
    rep = json.loads((tmp_path / "evolve.json").read_text())
    lines = (tmp_path / "evolve.csv").read_text().splitlines()
    assert lines[0] == "t,site,component,value"
    assert len(lines) == 1 + 13
    with open(tmp_path / "section.bin", "rb") as fh:
        sec = read_section_binary(fh)
    np.testing.assert_array_equal(sec.phi.ravel(), rep["section"]["phi"]["data"])
    # the free particle moves uniformly
    q = sec.phi[:, 0, 0]
    np.testing.assert_allclose(np.diff(q, 2), 0.0, atol=1e-12)


def test_seed_changes_the_datum(capsys):
    a = run(capsys, "evolve", "--config", FREE, "--stable-output", "--format", "json", "--seed", "1")[1]
    b = run(capsys, "evolve", "--config", FREE, "--stable-output", "--format", "json", "--seed", "2")[1]
    c = run(capsys, "evolve", "--config", FREE, "--stable-output", "--format", "json", "--seed", "1")[1]
    assert a == c and a != b


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "covbrackets.cli", "bracket", "--config", FREE,
                          "--format", "csv", "--stable-output"], capture_output=True, text=True, check=True)
    assert out.stdout.splitlines()[1].startswith("0,q(2),q(5),-3.0")
