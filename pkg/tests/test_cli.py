import json
from pathlib import Path

import pytest

from abeacs.cli import main

ROOT = Path(__file__).resolve().parent.parent
TINY = ["--backend", "exponent", "--reps", "3"]


def test_init_default(tmp_path, capsys):
    assert main(["init", "--out", str(tmp_path)]) == 0
    dep = json.loads((tmp_path / "deployment.json").read_text())
    assert len(dep["topology"]["nodes"]) == 9 and dep["seed"] == 0
    assert "g_beta" in dep["public_key"] and "beta" not in dep["public_key"]


def test_init_duplicate_ids(tmp_path, capsys):
    assert main(["init", "--config", str(ROOT / "scenarios" / "duplicate_ids.json"), "--out", str(tmp_path)]) == 2
    assert "duplicate node ids" in capsys.readouterr().err


def test_init_missing_config(tmp_path, capsys):
    assert main(["init", "--config", str(tmp_path / "nope.json")]) == 2
    assert "file not found" in capsys.readouterr().err


def test_run_and_validate(tmp_path, capsys):
    assert main(["run", str(ROOT / "scenarios" / "canonical.json"), "--nbits", "6", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.csv").exists() and (tmp_path / "log.jsonl").exists()
    chain = tmp_path / "chain.jsonl"
    assert main(["validate", str(chain)]) == 0
    assert "valid (ok)" in capsys.readouterr().out

    lines = chain.read_text().splitlines()
    block = json.loads(lines[2])
    block["created_at"] += 1
    lines[2] = json.dumps(block, sort_keys=True, separators=(",", ":"))
    chain.write_text("\n".join(lines) + "\n")
    assert main(["validate", str(chain)]) == 1
    assert "INVALID" in capsys.readouterr().out


def test_run_default_json_metrics(tmp_path):
    assert main(["run", "--nbits", "4", "--seed", "3", "--format", "json", "--out", str(tmp_path)]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["seed"] == 3
    assert metrics["counts"].get("expectation_mismatches", 0) == 0
    assert metrics["counts"]["decrypt_honest"] == 3


def test_run_expectation_mismatch(tmp_path):
    script = {
        "nbits": 4,
        "events": [
            {"op": "register", "nodes": ["edge1", "edge2", "edge3", "term1"]},
            {"op": "request_access", "subject": "term1", "object": "term1", "expect": "resource granted"},
        ],
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(script))
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 1


def test_run_script_error(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"events": [{"op": "register", "node": "ghost"}]}))
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "ghost" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.jsonl")]) == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["bench-pow", "--nbits", "x,y"])
    assert info.value.code == 2


def test_bench_pow(tmp_path, capsys):
    args = ["bench-pow", "--nbits", "0,4", "--runs", "20", "--seed", "5", "--format", "json", "--out", str(tmp_path)] + TINY
    assert main(args) == 0
    report = json.loads((tmp_path / "bench-pow.json").read_text())
    assert report["seed"] == 5 and len(report["config_digest"]) == 16
    zero = [r for r in report["rows"] if r.get("section") == "attempts" and r["nbits"] == 0]
    assert {r["strategy"] for r in zero} == {"sequential", "random", "hybrid"}
    assert all(r["mean_attempts"] == 1 for r in zero)
    assert {r["concurrency"] for r in report["rows"] if r["section"] == "concurrency"} == {1, 3, 4, 5}


def test_bench_pow_reproducible(tmp_path):
    args = ["bench-pow", "--nbits", "4", "--runs", "10", "--format", "json"] + TINY
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    rows = lambda d: [{k: v for k, v in r.items() if "time" not in k} for r in json.loads((tmp_path / d / "bench-pow.json").read_text())["rows"]]  # noqa: E731
    assert rows("a") == rows("b")


def test_bench_abe_csv(tmp_path):
    args = ["bench-abe", "--counts", "2,4,6", "--sizes", "1,1024", "--out", str(tmp_path)] + TINY
    assert main(args) == 0
    text = (tmp_path / "bench-abe.csv").read_text()
    assert text.startswith("section,mode,attrs,op,median_s")
    flags = (tmp_path / "bench-abe-flags.csv").read_text()
    assert "or_decrypt_flat" in flags and "size_constant" in flags


def test_bench_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nbits": [2], "pow_runs": 5, "repetitions": 3, "concurrency": [1]}))
    assert main(["bench-pow", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    cfg.write_text(json.dumps({"repetitions": 2}))
    assert main(["bench-pow", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["bench-pow", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "unknown config keys: colour" in capsys.readouterr().err


def test_bench_throughput(tmp_path):
    args = ["bench-throughput", "--requests", "4", "--format", "json", "--out", str(tmp_path)] + TINY
    assert main(args) == 0
    report = json.loads((tmp_path / "bench-throughput.json").read_text())
    assert len(report["rows"]) == 3 and "ordering_holds" in report["flags"]
