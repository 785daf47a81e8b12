import json
import subprocess
import sys

import pytest

from ellipsoidal_sme.harness.cli import main


@pytest.fixture
def scenario(tmp_path):
    p = tmp_path / "s.json"
    assert main(["gen-scenario", "--template", "stable", "--n", "3", "--horizon", "30",
                 "--seed", "4", "--m", "2", "--out", str(p)]) == 0
    return p


def test_gen_to_stdout(capsys):
    assert main(["gen-scenario", "--template", "rotation", "--n", "2", "--horizon", "5"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["n"] == 2 and d["template"]["name"] == "rotation"


def test_estimate_writes_outputs(scenario, tmp_path):
    out = tmp_path / "run"
    code = main(["estimate", "--scenario", str(scenario), "--pred", "trace", "--corr", "ssal",
                 "--seed", "1", "--samples", "20", "--out", str(out), "--diagnostics"])
    assert code == 0
    assert len((out / "records.csv").read_text().splitlines()) == 32
    assert (out / "diagnostics.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 1 and man["config"]["pred"]["kind"] == "trace"


def test_estimate_json(scenario, tmp_path):
    out = tmp_path / "run"
    assert main(["estimate", "--scenario", str(scenario), "--out", str(out),
                 "--emit", "json"]) == 0
    assert len(json.loads((out / "records.json").read_text())) == 31


def test_estimate_deterministic(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["estimate", "--scenario", str(scenario), "--seed", "9", "--out", str(d)]) == 0
    assert (a / "records.csv").read_bytes() == (b / "records.csv").read_bytes()


def test_timing_fills_ms(scenario, tmp_path):
    out = tmp_path / "t"
    main(["estimate", "--scenario", str(scenario), "--out", str(out), "--timing"])
    row = (out / "records.csv").read_text().splitlines()[2]
    assert row.rsplit(",", 1)[1] != ""


def test_verify_all(scenario, capsys):
    assert main(["verify", "--scenario", str(scenario), "--all-criteria", "--samples", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 6 and all(" ok " in line for line in lines)


def test_input_errors(tmp_path, capsys):
    assert main(["verify", "--scenario", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert main(["estimate", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "input error" in capsys.readouterr().err


def test_abort_policy_exit_code(tmp_path):
    p = tmp_path / "adv.json"
    main(["gen-scenario", "--template", "stable", "--n", "2", "--horizon", "30", "--out", str(p)])
    d = json.loads(p.read_text())
    d["schedule"]["adversarial"] = 1.0
    d["schedule"]["presence"] = 1.0
    p.write_text(json.dumps(d))
    assert main(["estimate", "--scenario", str(p), "--out", str(tmp_path / "o"),
                 "--policy", "abort"]) == 2
    assert main(["estimate", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 0


def test_module_entry_point(scenario):
    r = subprocess.run([sys.executable, "-m", "ellipsoidal_sme", "verify", "--scenario",
                        str(scenario), "--samples", "0"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "ok" in r.stdout
