import json
import subprocess
import sys

import pytest

from uind.cli import main
from uind.report import config_digest, emit_report, fmt_number, report_body


@pytest.fixture(autouse=True)
def cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("UIND_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path / "cache"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def fields(line):
    return dict(tok.split("=", 1) for tok in line.split())


def test_enum_reports_h(capsys):
    code, out, _ = run_cli(capsys, "enum", "--target", "0", "--max-len", "9", "--steps", "100", "--deterministic")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# uind version=")
    cx = fields(lines[2])
    assert cx["record"] == "complexity" and cx["h"] == "9" and cx["witness_ops"] == "ZERO,OUT,HALT"


def test_induce_operator(capsys, tmp_path):
    data = tmp_path / "d.tsv"
    data.write_text("k=2 w=4\n0\t0\n1\t1\n")
    code, out, _ = run_cli(capsys, "induce", "--mode", "operator", "--data", str(data),
                           "--max-len", "21", "--steps", "200", "--deterministic")
    assert code == 0
    recs = [fields(line) for line in out.splitlines()[1:]]
    assert recs[0]["record"] == "ensemble" and "Psi" in recs[0]
    assert any(r["record"] == "operator" and "psi" in r for r in recs)


def test_induce_set_and_seq(capsys, tmp_path):
    members = tmp_path / "set.txt"
    members.write_text("# members\n-\n")
    code, out, _ = run_cli(capsys, "induce", "--mode", "set", "--data", str(members), "--new", "-",
                           "--max-len", "12", "--deterministic")
    assert code == 0 and fields(out.splitlines()[1])["ratio"] == "1"
    seq = tmp_path / "x.txt"
    seq.write_text("11\n")
    code, out, _ = run_cli(capsys, "induce", "--mode", "seq", "--data", str(seq), "--max-len", "21",
                           "--deterministic")
    assert code == 0 and fields(out.splitlines()[1])["p_next_1"] == "1"


def test_unknown_flag_exits_one(capsys):
    code, _, err = run_cli(capsys, "enum", "--target", "0", "--bogus")
    assert code == 1 and "usage: uind" in err and "commands:" in err


def test_missing_command_exits_one(capsys):
    assert run_cli(capsys)[0] == 1
    assert run_cli(capsys, "agent")[0] == 1


def test_data_error_names_file_and_line(capsys, tmp_path):
    data = tmp_path / "bad.tsv"
    data.write_text("k=2 w=4\n0\t0\n0\tzz\n")
    code, _, err = run_cli(capsys, "induce", "--mode", "operator", "--data", str(data))
    assert code == 2 and f"{data}:3" in err


def test_missing_file_is_data_error(capsys, tmp_path):
    code, _, err = run_cli(capsys, "measure", "--kind", "legg", "--suite", str(tmp_path / "none.txt"))
    assert code == 2 and "none.txt" in err


def test_engine_failure_is_data_error(capsys, tmp_path):
    data = tmp_path / "d.tsv"
    data.write_text("k=2 w=4\n0\t0\n")
    code, _, err = run_cli(capsys, "induce", "--mode", "operator", "--data", str(data), "--max-len", "9")
    assert code == 2 and "EmptyEnsemble" in err


def test_jobs_do_not_change_report(capsys, tmp_path):
    data = tmp_path / "d.tsv"
    data.write_text("k=2 w=4\n01\t1\n10\t0\n11\t1\n")
    args = ["induce", "--mode", "operator", "--data", str(data), "--max-len", "21", "--deterministic",
            "--query", "00"]
    one = run_cli(capsys, *args, "--jobs", "1")[1]
    two = run_cli(capsys, *args, "--jobs", "2")[1]
    assert one == two


def test_timestamp_only_without_deterministic(capsys):
    args = ["enum", "--target", "1", "--max-len", "12"]
    plain = run_cli(capsys, *args)[1]
    det = run_cli(capsys, *args, "--deterministic")[1]
    assert "timestamp=" in plain.splitlines()[0] and "timestamp=" not in det.splitlines()[0]
    assert report_body(plain) == report_body(det)


def test_json_mirrors_text(capsys):
    args = ["enum", "--target", "1", "--max-len", "12", "--deterministic"]
    text = run_cli(capsys, *args)[1].splitlines()
    js = [json.loads(line) for line in run_cli(capsys, *args, "--format", "json")[1].splitlines()]
    assert js[0]["config_digest"] == fields(text[0].split(" ", 2)[2])["config_digest"]
    assert js[2]["h"] == int(fields(text[2])["h"])


def test_config_overlay(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"steps": 3, "seed": 5, "policy": "random"}))
    code, out, _ = run_cli(capsys, "agent", "rl", "--config", str(cfg), "--deterministic")
    assert code == 0 and len(fields(out.splitlines()[1])["actions"]) == 3
    code, out, _ = run_cli(capsys, "agent", "rl", "--config", str(cfg), "--steps", "2", "--deterministic")
    assert len(fields(out.splitlines()[1])["actions"]) == 2
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run_cli(capsys, "agent", "rl", "--config", str(cfg))[0] == 2


def test_agent_homeo(capsys):
    code, out, _ = run_cli(capsys, "agent", "homeo", "--steps", "500", "--episodes", "2", "--deterministic")
    assert code == 0
    assert fields(out.splitlines()[-1])["policy"] == "active"


def test_measure_legg(capsys, tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text("mdp name=DeterministicBandit\n")
    code, out, _ = run_cli(capsys, "measure", "--kind", "legg", "--suite", str(suite), "--agent", "always1",
                           "--episodes", "2", "--deterministic")
    assert code == 0
    total = fields(out.splitlines()[-1])
    assert total["record"] == "TOTAL"
    assert abs(float(total["total"]) - 9.0 / 64) < 1e-8


def test_cache_inspect_and_clear(capsys, cache_dir):
    run_cli(capsys, "enum", "--target", "0", "--max-len", "9")
    assert (cache_dir / "enum.cache").exists()
    out = run_cli(capsys, "cache", "inspect", "--deterministic")[1]
    assert fields(out.splitlines()[1])["records"] == "1"
    out = run_cli(capsys, "cache", "clear", "--deterministic")[1]
    assert fields(out.splitlines()[1])["cleared"] == "true"
    assert not (cache_dir / "enum.cache").exists()


def test_corrupt_cache_is_data_error(capsys, cache_dir):
    cache_dir.mkdir(parents=True)
    (cache_dir / "enum.cache").write_bytes(b"UINDCACHE1garbage")
    code, _, err = run_cli(capsys, "enum", "--target", "0", "--max-len", "9")
    assert code == 2 and "enum.cache" in err


def test_entry_point_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "uind.cli", "enum", "--target", "-", "--max-len", "6",
                           "--deterministic", "--no-cache"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "value_exact=13/64" in proc.stdout


# -- report format ------------------------------------------------------------

def test_empty_report_is_header_only():
    text = emit_report([], {"a": 1})
    assert text.count("\n") == 1 and text.startswith("# uind")


def test_digest_tracks_config():
    assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})
    assert config_digest({"a": 1}) != config_digest({"a": 2})


def test_twelve_significant_digits():
    assert fmt_number(1 / 3) == "0.333333333333"
    assert fmt_number(10) == "10"
