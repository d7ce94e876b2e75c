import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from polarlat.cli import main
from polarlat.schemas import CONFIG_SCHEMA, OUTPUT_SCHEMAS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_shipped_configs_are_valid():
    for p in CONFIGS.glob("*.json"):
        jsonschema.validate(json.loads(p.read_text()), CONFIG_SCHEMA)


def test_transform_bec_eight_rows(capsys):
    code, out, _ = run(capsys, "transform", "--config", str(CONFIGS / "bec.json"))
    assert code == 0
    body = json.loads(out)
    jsonschema.validate(body, OUTPUT_SCHEMAS["transform"])
    assert body["n"] == 3 and len(body["entropies"]) == 8
    assert math.fsum(body["entropies"]) == pytest.approx(8 * 0.3 * math.log(2))
    assert len(body["config_digest"]) == 64 and body["command"] == "transform"


def test_transform_level_zero_echoes_input(capsys):
    code, out, _ = run(capsys, "transform", "--config", str(CONFIGS / "bec.json"), "--levels", "0")
    assert code == 0
    assert json.loads(out)["entropies"] == pytest.approx([0.3 * math.log(2)])


def test_transform_csv_and_out_files(capsys, tmp_path):
    code, out, _ = run(capsys, "transform", "--config", str(CONFIGS / "bec.json"), "--format",
                       "csv", "--exact")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config_digest=") and lines[1] == "n,i,element,epsilon"
    assert lines[2] == "3,1,1,5764801/100000000" and len(lines) == 2 + 16
    dest = tmp_path / "run" / "bec"
    code, _, _ = run(capsys, "transform", "--config", str(CONFIGS / "bec.json"), "--out", str(dest))
    assert code == 0
    assert (tmp_path / "run" / "bec.csv").exists()
    jsonschema.validate(json.loads((tmp_path / "run" / "bec.json").read_text()),
                        OUTPUT_SCHEMAS["transform"])


def test_asymptotic_examples(capsys):
    code, out, _ = run(capsys, "asymptotic", "--config", str(CONFIGS / "divisor6.json"))
    assert code == 0
    body = json.loads(out)
    jsonschema.validate(body, OUTPUT_SCHEMAS["asymptotic"])
    assert {k: v for k, v in body["mu"].items() if v != 0} == {"1": "3/5", "2": "1/10",
                                                               "6": "3/10"}
    assert body["entropy_exact_match"] is True
    code, out, _ = run(capsys, "asymptotic", "--config", str(CONFIGS / "chain.json"))
    body = json.loads(out)
    assert code == 0 and body["shortcut"].startswith("chain")
    assert body["mu"] == {"0": "1/5", "1": "1/2", "2": "3/10"}


def test_asymptotic_csv(capsys):
    code, out, _ = run(capsys, "asymptotic", "--config", str(CONFIGS / "bec.json"), "--format",
                       "csv")
    assert code == 0
    assert out.splitlines()[1:] == ["element,mass", "1,7/10", "2,3/10"]


def test_non_distributive_config_exit_2(capsys):
    code, _, err = run(capsys, "verify", "--config", str(CONFIGS / "pentagon.json"))
    assert code == 2 and "NotDistributive" in err


def test_malformed_dist_reports_field_path(capsys, tmp_path):
    cfg = json.loads((CONFIGS / "bec.json").read_text())
    cfg["source"]["dist"] = {"1": 0.6, "2": 0.3}
    code, _, err = run(capsys, "transform", "--config", write_cfg(tmp_path, cfg))
    assert code == 2 and "source.dist" in err
    cfg["normalize"] = True
    code, _, _ = run(capsys, "transform", "--config", write_cfg(tmp_path, cfg))
    assert code == 0


@pytest.mark.parametrize("mutate,where", [
    (lambda c: c["source"].update(dist={}), "source"),
    (lambda c: c["lattice"].update(modulus=0), "lattice"),
    (lambda c: c.update(colour="blue"), "<root>"),
    (lambda c: c["source"]["dist"].update({"5": 0.0}), "source.dist.5"),
])
def test_schema_and_semantic_errors(capsys, tmp_path, mutate, where):
    cfg = json.loads((CONFIGS / "bec.json").read_text())
    mutate(cfg)
    code, _, err = run(capsys, "transform", "--config", write_cfg(tmp_path, cfg))
    assert code == 2 and where in err


def test_bad_flags_exit_2(capsys):
    assert run(capsys, "simulate", "--config", str(CONFIGS / "divisor6.json"),
               "--samples", "0")[0] == 2
    assert run(capsys, "transform")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "transform", "--config", "/nonexistent.json")[0] == 2


def test_resource_guard_exit_4(capsys):
    code, _, err = run(capsys, "transform", "--config", str(CONFIGS / "bec.json"),
                       "--levels", "30")
    assert code == 4 and "resource" in err


def test_simulate_deterministic_bytes(capsys, tmp_path, monkeypatch):
    args = ["simulate", "--config", str(CONFIGS / "divisor6.json"), "--samples", "20000",
            "--seed", "99"]
    code, a, _ = run(capsys, *args)
    assert code == 0
    body = json.loads(a)
    jsonschema.validate(body, OUTPUT_SCHEMAS["simulate"])
    assert body["seed"] == 99 and body["pass"]
    monkeypatch.setenv("POLARLAT_WORKERS", "3")
    code, b, _ = run(capsys, *args)
    # the worker count is part of the effective config, so only the digest differs
    strip = lambda s: {k: v for k, v in json.loads(s).items() if k != "config_digest"}
    assert code == 0 and strip(a) == strip(b)
    code, c, _ = run(capsys, *args)
    assert c == b
    monkeypatch.setenv("POLARLAT_WORKERS", "many")
    assert run(capsys, *args)[0] == 2


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--config", str(CONFIGS / "divisor6.json"),
                       "--samples", "50000", "--format", "csv", "--levels", "1")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# config_digest=")
    assert lines[1] == "index,tv,entropy_hat,entropy_pred,sigma,pass" and len(lines) == 4


def test_verify_exact(capsys):
    code, out, _ = run(capsys, "verify", "--config", str(CONFIGS / "divisor30.json"), "--exact",
                       "--pairs", "300")
    body = json.loads(out)
    jsonschema.validate(body, OUTPUT_SCHEMAS["verify"])
    assert code == 0 and body["pass"] and body["violations"] == []
    assert all(v["max_discrepancy"] == 0 for v in body["identities"].values())


def test_config_digest_tracks_effective_config(capsys):
    a = json.loads(run(capsys, "transform", "--config", str(CONFIGS / "bec.json"))[1])
    b = json.loads(run(capsys, "transform", "--config", str(CONFIGS / "bec.json"))[1])
    c = json.loads(run(capsys, "transform", "--config", str(CONFIGS / "bec.json"),
                       "--levels", "2")[1])
    assert a["config_digest"] == b["config_digest"] != c["config_digest"]


def test_svg_output(capsys, tmp_path):
    pytest.importorskip("matplotlib")
    dest = tmp_path / "mu.svg"
    code, _, _ = run(capsys, "asymptotic", "--config", str(CONFIGS / "divisor6.json"),
                     "--svg", str(dest))
    assert code == 0 and dest.read_text().lstrip().startswith("<?xml")


@pytest.mark.skipif(shutil.which("polarlat") is None, reason="console script not installed")
def test_console_script_exit_codes():
    ok = subprocess.run(["polarlat", "asymptotic", "--config", str(CONFIGS / "bec.json")],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and json.loads(ok.stdout)["command"] == "asymptotic"
    bad = subprocess.run([sys.executable, "-m", "polarlat.cli", "verify", "--config",
                          str(CONFIGS / "pentagon.json")], capture_output=True, text=True)
    assert bad.returncode == 2
