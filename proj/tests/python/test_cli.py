import csv
import json
import os
import subprocess

import pytest

from conftest import generation_replies, removal_reply


def run(cli, *args, env=None):
    e = dict(os.environ)
    e.pop("CHAT2SVG_LLM_ENDPOINT", None)
    e.pop("CHAT2SVG_ENHANCER_ENDPOINT", None)
    e.update(env or {})
    return subprocess.run([cli, "-q", *args], capture_output=True, text=True, env=e, timeout=600)


@pytest.fixture(scope="module")
def generated(cli, tmp_path_factory, unicorn, expansion):
    d = tmp_path_factory.mktemp("gen")
    script = d / "script.json"
    script.write_text(json.dumps({"replies": generation_replies(expansion, unicorn, 2, 5)}))
    out = d / "out"
    r = run(cli, "generate", "--prompt", "A unicorn is eating a carrot.", "--rounds", "2", "--repeats", "5",
            "--out", str(out), "--llm-script", str(script), "--echo-target", "--iters", "6", "--resolution", "64",
            "--snapshot-every", "3")
    assert r.returncode == 0, r.stdout + r.stderr
    return out, json.loads(r.stdout)


def test_generate_writes_artifacts(generated):
    out, summary = generated
    for name in ("template.svg", "target.png", "optimized.svg", "trace.csv", "candidates.json", "session.json"):
        assert (out / name).exists(), name
    cands = json.loads((out / "candidates.json").read_text())
    assert summary["candidates"] == cands["count"] == 15
    assert 0 <= cands["selected"] < 15
    assert sorted((c["repeat"], c["round"]) for c in cands["candidates"]) == \
        [(s, k) for s in range(1, 6) for k in range(3)]
    assert all((out / c["file"]).exists() for c in cands["candidates"])
    with open(out / "trace.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["iteration", "total", "mse", "curvature", "iou"]
    assert len(rows) == 12
    assert (out / "target.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert list((out / "snapshots").glob("*.svg"))


def test_optimize_is_offline(cli, generated, tmp_path):
    out, _ = generated
    r = run(cli, "optimize", "--svg", str(out / "template.svg"), "--target", str(out / "target.png"),
            "--out", str(tmp_path), "--iters", "4",
            env={"CHAT2SVG_LLM_ENDPOINT": "http://127.0.0.1:9/unreachable"})
    assert r.returncode == 0, r.stdout + r.stderr
    assert (tmp_path / "optimized.svg").read_text().startswith("<svg")
    with open(tmp_path / "trace.csv") as f:
        assert len(list(csv.DictReader(f))) == 8


def test_optimize_rejects_mismatched_target(cli, generated, tmp_path):
    out, _ = generated
    r = run(cli, "optimize", "--svg", str(out / "template.svg"), "--target", str(out / "target.png"),
            "--out", str(tmp_path), "--resolution", "32", "--iters", "2")
    assert r.returncode != 0
    assert json.loads(r.stdout)["error"] == "ARGUMENT"


def test_generate_without_endpoint_names_the_variable(cli, tmp_path):
    r = run(cli, "generate", "--prompt", "a cat", "--out", str(tmp_path), "--echo-target")
    assert r.returncode != 0
    err = json.loads(r.stdout)
    assert err["error"] == "CONFIG"
    assert "CHAT2SVG_LLM_ENDPOINT" in err["message"]


def test_failed_stage_reports_json(cli, tmp_path, expansion):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"replies": [expansion, "no code here", "still none"]}))
    r = run(cli, "generate", "--prompt", "a cat", "--rounds", "0", "--repeats", "1", "--out", str(tmp_path / "o"),
            "--llm-script", str(script), "--echo-target")
    assert r.returncode != 0
    assert json.loads(r.stdout)["error"] == "FORMAT"


def test_edit_removes_a_path(cli, generated, tmp_path):
    out, _ = generated
    current = json.loads((out / "session.json").read_text())["current"]["svg"]
    script = tmp_path / "edit.json"
    script.write_text(json.dumps({"replies": [removal_reply(current, "path_3")]}))
    r = run(cli, "edit", "--session", str(out / "session.json"), "--instruction", "remove the third leg",
            "--out", str(tmp_path / "e"), "--llm-script", str(script), "--echo-target", "--iters", "4",
            "--resolution", "64")
    assert r.returncode == 0, r.stdout + r.stderr
    res = json.loads(r.stdout)
    assert res["ops"]["removed"] == ["path_3"]
    assert res["ops"]["modified"] == [] and res["ops"]["added"]["ids"] == []
    assert res["history_length"] == 1
    after = json.loads((tmp_path / "e" / "session.json").read_text())
    assert after["history"][0]["instruction"] == "remove the third leg"
    assert after["current"]["svg"].count("<path") == current.count("<path") - 1


def test_validate_exit_codes(cli, tmp_path, unicorn):
    good = tmp_path / "good.svg"
    good.write_text(unicorn)
    assert run(cli, "validate", "--svg", str(good)).returncode == 0
    bad = tmp_path / "bad.svg"
    bad.write_text('<svg viewBox="0 0 100 100"><path id="a" d="M 0 0 L 1 1"/></svg>')
    r = run(cli, "validate", "--svg", str(bad))
    assert r.returncode == 1
    assert json.loads(r.stdout)["valid"] is False


def test_usage_error(cli):
    assert run(cli, "generate").returncode != 0
