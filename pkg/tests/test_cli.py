import json
import subprocess
import sys

import pytest

from greedylab.cli import ExperimentConfig, exit_code, main
from greedylab.reproductions import REPRODUCTIONS

LP1 = '{"kind": "lp", "p": 1}'
RW_INF = {"kind": "rosenthal_woo", "q": "inf", "p": 1, "weight": {"kind": "power", "theta": 0.4}}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("spec,vec,expected", [
    (LP1, "[1, 1]", "2.000000000000"),
    ('{"kind": "james", "q": 2}', "1 -1 1", "1.732050807569"),
    ('{"kind": "schreier"}', "0,0,0,0,1,1", "2.000000000000"),
])
def test_norm_command(spec, vec, expected, capsys):
    code, out, _ = run(["norm", spec, vec], capsys)
    assert code == 0 and out.strip() == expected


def test_norm_reads_files(tmp_path, capsys):
    (tmp_path / "s.json").write_text(LP1)
    (tmp_path / "v.txt").write_text("3\n-4\n")
    code, out, _ = run(["norm", str(tmp_path / "s.json"), str(tmp_path / "v.txt")], capsys)
    assert code == 0 and out.strip() == "7.000000000000"


@pytest.mark.parametrize("argv", [
    ["norm", '{"kind": "nope"}', "1 2"],
    ["norm", "{not json", "1 2"],
    ["norm", LP1, "a b"],
])
def test_norm_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and "error" in err


def test_estimate_examples(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["estimate", "--spec", json.dumps(RW_INF), "--weight", '{"kind": "power", "theta": 0.4}',
                      "--window", "10", "--name", "Ca", "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["format_version"] and report["config"]["window"] == 10
    assert abs(report["results"][0]["value"] - 1.0) <= 1e-9
    assert (tmp_path / "r.summary.csv").exists()

    code, _, _ = run(["estimate", "--spec", '{"kind": "lp", "p": 2}', "--window", "6", "--name", "Cd",
                      "--out", str(out)], capsys)
    assert code == 0 and json.loads(out.read_text())["results"][0]["value"] == pytest.approx(1.0)

    code, _, _ = run(["estimate", "--spec", '{"kind": "ebasis"}', "--window", "12", "--name", "d(4)",
                      "--out", str(out)], capsys)
    assert code == 0 and json.loads(out.read_text())["results"][0]["value"] >= 0.5


def test_estimate_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": {"kind": "lp", "p": 1}, "window": 5, "estimates": ["Cd", "Ku"]}))
    code, out, _ = run(["estimate", str(cfg)], capsys)
    assert code == 0
    report = json.loads(out)
    assert [r["name"] for r in report["results"]] == ["Cd", "Ku"]


def test_config_validation():
    with pytest.raises(Exception):
        ExperimentConfig.from_json({"window": 4})
    with pytest.raises(Exception):
        ExperimentConfig.from_json({"spec": {"kind": "lp"}, "bogus": 1})
    cfg = ExperimentConfig.from_json({"spec": {"kind": "lp", "p": 2}, "window": 4})
    again = ExperimentConfig.from_json({k: v for k, v in cfg.to_json().items() if k != "format_version"})
    assert again == cfg


def test_check_exit_codes(capsys):
    spec = json.dumps(RW_INF)
    w = '{"kind": "power", "theta": 0.4}'
    code, _, _ = run(["check", "--spec", spec, "--weight", w, "--window", "8", "--name", "greedy-char-upper"], capsys)
    assert code == 0
    # exact constants are unknown for the James norm
    cfg = json.dumps({"spec": {"kind": "james", "q": 2}, "window": 5, "checks": ["greedy-char-upper"],
                      "exact_only": True, "family": {"sigma_vectors": 2}})
    code, _, _ = run(["check", cfg], capsys)
    assert code == 2
    code, _, _ = run(["check", "--spec", spec, "--window", "6", "--name", "nonexistent"], capsys)
    assert code == 2
    code, _, _ = run(["check", "--spec", '{"kind": "ebasis"}', "--window", "8", "--name", "greedy-char-upper",
                      "--budget", "10"], capsys)
    assert code == 3


def test_exit_code_precedence():
    ok = {"status": "ok", "binding": True, "all_pass": True}
    bad = {"status": "ok", "binding": True, "all_pass": False}
    loose = {"status": "ok", "binding": False, "all_pass": False}
    partial = {"status": "partial"}
    unavailable = {"status": "mode-unavailable"}
    assert exit_code([ok, loose]) == 0
    assert exit_code([ok, bad]) == 1
    assert exit_code([partial, bad]) == 1
    assert exit_code([ok, partial]) == 3
    assert exit_code([bad, unavailable]) == 2
    assert exit_code([ok], [{"name": "c", "pass": False, "detail": ""}]) == 1


def test_nothing_selected_is_usage_error(capsys):
    code, _, _ = run(["estimate", "--spec", '{"kind": "lp", "p": 2}', "--window", "4"], capsys)
    assert code == 2


def test_usage_errors(capsys):
    assert run(["estimate", "--spec", LP1, "--window", "4", "--name", "Cx"], capsys)[0] == 2
    assert run(["estimate", "--window", "4", "--name", "Cd"], capsys)[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["estimate", "--spec", LP1, "--workers", "0", "--name", "Cd"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main([])


def _csv_run(tmp_path, tag, capsys, extra=(), env_seed=None, monkeypatch=None):
    if env_seed is not None:
        monkeypatch.setenv("GREEDYLAB_SEED", str(env_seed))
    out = tmp_path / f"{tag}.json"
    code, _, _ = run(["estimate", "--spec", '{"kind": "james", "q": 2}', "--window", "6",
                      "--name", "Cd", "--name", "Ku", "--name", "Cq", "--out", str(out), *extra], capsys)
    assert code == 0
    return (tmp_path / f"{tag}.summary.csv").read_text(), json.loads(out.read_text())


def test_csv_deterministic_across_reruns_and_workers(tmp_path, capsys):
    a, _ = _csv_run(tmp_path, "a", capsys)
    b, _ = _csv_run(tmp_path, "b", capsys)
    c, _ = _csv_run(tmp_path, "c", capsys, extra=("--workers", "2"))
    assert a == b == c
    assert a.splitlines()[0].startswith("name") or "," in a.splitlines()[0]


def test_seed_precedence(tmp_path, capsys, monkeypatch):
    _, rep = _csv_run(tmp_path, "env", capsys, env_seed=7, monkeypatch=monkeypatch)
    assert rep["config"]["seed"] == 7
    _, rep = _csv_run(tmp_path, "flag", capsys, extra=("--seed", "3"), env_seed=7, monkeypatch=monkeypatch)
    assert rep["config"]["seed"] == 3
    monkeypatch.setenv("GREEDYLAB_SEED", "x")
    assert run(["estimate", "--spec", LP1, "--window", "4", "--name", "Cd"], capsys)[0] == 2


def test_csv_format_to_stdout(capsys):
    code, out, _ = run(["estimate", "--spec", LP1, "--window", "4", "--name", "Cd", "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2 and "Cd" in lines[1]


def test_reproduce_registry(capsys):
    assert set(REPRODUCTIONS) == {"schreier-gap", "ebasis-no-propD", "rw-one-w-greedy", "rw-not-conservative",
                                  "rw-not-w-democratic", "sw-trivial", "pathological-f1q", "theorem-suite"}
    code, _, err = run(["reproduce", "nope"], capsys)
    assert code == 2 and "schreier-gap" in err


def test_reproduce_sw_trivial(tmp_path, capsys):
    out = tmp_path / "sw.json"
    code, _, err = run(["reproduce", "sw-trivial", "--out", str(out)], capsys)
    assert code == 0 and "[PASS]" in err and "[FAIL]" not in err
    assert (tmp_path / "sw.criteria.csv").exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "greedylab.cli", "norm", LP1, "[1, 1]"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "2.000000000000"
