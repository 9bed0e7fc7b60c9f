"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 usage / configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import bench
from .chain.block import validate_file
from .encoding import canonical_bytes, canonical_json, sha256
from .errors import ABEACSError, ConfigError, ScriptError
from .netsim import BACKENDS, Scenario, Simulation, Topology, canonical_scenario, make_params

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 already; keep the text terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _str_list(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _write_rows(path: Path, rows: List[Dict[str, Any]]) -> None:
    keys: List[str] = []
    for row in rows:
        keys += [k for k in row if k not in keys]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _table(rows: List[Dict[str, Any]]) -> str:
    if not rows:
        return "(no rows)"
    keys: List[str] = []
    for row in rows:
        keys += [k for k in row if k not in keys]

    def fmt(v: Any) -> str:
        if isinstance(v, float):
            return f"{v:.6g}"
        return "" if v is None else str(v)

    cells = [[fmt(r.get(k)) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(cell, widths)) for cell in cells]
    return "\n".join(lines)


# ------------------------------------------------------------------ commands


def cmd_init(args: argparse.Namespace) -> int:
    if args.config:
        data = _read_json(args.config)
        topo_data = data.get("topology", data) if isinstance(data, dict) else None
        if not isinstance(topo_data, dict):
            raise ConfigError(f"{args.config}: expected a topology object")
        topology = Topology.from_json(topo_data)
    else:
        topology = canonical_scenario().topology
    params = make_params(args.backend)
    sim = Simulation(topology, seed=args.seed, nbits=args.nbits, params=params)
    deployment = {
        "seed": args.seed,
        "nbits": args.nbits,
        "backend": args.backend,
        "group": params.to_text(),
        "public_key": {"g_alpha": sim.engine.pk.g_alpha.encode().hex(), "g_beta": sim.engine.pk.g_beta.encode().hex()},
        "manager_id": sim.engine.manager_id,
        "genesis": sim.chain.blocks[0].block_hash.hex(),
        "topology": topology.to_json(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "deployment.json").write_text(json.dumps(deployment, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"initialized {len(topology.nodes)} nodes ({args.backend} backend) -> {out / 'deployment.json'}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenario = canonical_scenario()
    if args.seed is not None:
        scenario.seed = args.seed
    if args.nbits is not None:
        scenario.nbits = args.nbits
    if args.backend is not None:
        scenario.backend = args.backend
    sim = Simulation.from_scenario(scenario)
    chain, metrics = sim.run(scenario.events)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chain.save(out / "chain.jsonl")
    (out / "log.jsonl").write_text("".join(canonical_json(e) + "\n" for e in sim.log), encoding="utf-8")
    summary = metrics.summary()
    summary["seed"] = scenario.seed
    summary["scenario_digest"] = sha256(canonical_bytes({"events": scenario.events, "topology": scenario.topology.to_json()})).hex()[:16]
    if args.format == "json":
        (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        _write_rows(out / "metrics.csv", [{"kind": k, "name": n, "value": v} for k, n, v in metrics.rows()])

    ok, reason = validate_file(out / "chain.jsonl")
    mismatches = metrics.counts.get("expectation_mismatches", 0)
    print(f"blocks={chain.height} txs={sum(len(b.transactions) for b in chain.blocks)} chain={reason} expectation_mismatches={mismatches}")
    print(f"outputs in {out}")
    return EXIT_OK if ok and not mismatches else EXIT_INVALID


def cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.chain)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    ok, reason = validate_file(path, args.min_nbits)
    print(f"{path}: {'valid' if ok else 'INVALID'} ({reason})")
    return EXIT_OK if ok else EXIT_INVALID


def _bench_config(args: argparse.Namespace) -> bench.BenchConfig:
    data: Dict[str, Any] = _read_json(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise ConfigError("bench config must be a JSON object")
    overrides = {
        "attr_counts": args.counts,
        "sizes": args.sizes,
        "modes": args.modes,
        "nbits": args.nbits,
        "strategies": args.strategies,
        "repetitions": args.reps,
        "pow_runs": args.runs,
        "backend": args.backend,
        "seed": args.seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("backend", "curve") not in BACKENDS:
        raise ConfigError(f"unknown backend {data['backend']!r}")
    return bench.BenchConfig.from_json(data)


def _emit_report(args: argparse.Namespace, report: Dict[str, Any]) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = f"bench-{report['bench']}"
    if args.format == "json":
        path = out / f"{name}.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        path = out / f"{name}.csv"
        _write_rows(path, report["rows"])
        _write_rows(out / f"{name}-flags.csv", [{"flag": k, "value": v} for k, v in report["flags"].items()])
    print(_table(report["rows"]))
    print()
    print(_table([{"flag": k, "value": v} for k, v in report["flags"].items()]))
    print(f"\nseed={report['seed']} config={report['config_digest']} -> {path}")
    failed = [k for k, v in report["flags"].items() if v is False]
    if args.strict and failed:
        print(f"shape checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_bench_abe(args: argparse.Namespace) -> int:
    return _emit_report(args, bench.bench_abe(_bench_config(args)))


def cmd_bench_pow(args: argparse.Namespace) -> int:
    return _emit_report(args, bench.bench_pow(_bench_config(args)))


def cmd_bench_throughput(args: argparse.Namespace) -> int:
    return _emit_report(args, bench.bench_throughput(_bench_config(args), requests=args.requests))


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")

    parser = _Parser(prog="abeacs", description="Attribute-based access control on a lightweight blockchain.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", parents=[common], help="create a deployment from a topology file")
    p.add_argument("--config", help="topology JSON (default: canonical 3 terminals / 3 edges)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nbits", type=int, default=12)
    p.add_argument("--backend", choices=BACKENDS, default="exponent")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("run", parents=[common], help="run a scenario script")
    p.add_argument("scenario", nargs="?", help="scenario JSON (default: built-in canonical scenario)")
    p.add_argument("--seed", type=int)
    p.add_argument("--nbits", type=int)
    p.add_argument("--backend", choices=BACKENDS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a persisted chain file")
    p.add_argument("chain")
    p.add_argument("--min-nbits", type=int, default=0, help="reject blocks easier than this difficulty")
    p.set_defaults(func=cmd_validate)

    for name, func, help_text in (
        ("bench-abe", cmd_bench_abe, "ABE cost vs attribute count and payload size"),
        ("bench-pow", cmd_bench_pow, "mining attempts per strategy and difficulty"),
        ("bench-throughput", cmd_bench_throughput, "successful / failed access and verification TPS"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--config", help="bench config JSON")
        p.add_argument("--seed", type=int)
        p.add_argument("--counts", type=_int_list, help="attribute counts, e.g. 2,4,6")
        p.add_argument("--sizes", type=_int_list, help="payload sizes in bytes")
        p.add_argument("--modes", type=_str_list, help="gate modes: and,or")
        p.add_argument("--nbits", type=_int_list, help="difficulties, e.g. 8,12,16")
        p.add_argument("--strategies", type=_str_list, help="sequential,random,hybrid")
        p.add_argument("--reps", type=int, help="repetitions (>= 3)")
        p.add_argument("--runs", type=int, help="mining runs per (strategy, nbits)")
        p.add_argument("--backend", choices=BACKENDS)
        p.add_argument("--requests", type=int, default=60, help="requests per throughput repetition")
        p.add_argument("--strict", action="store_true", help="exit 1 when a shape check fails")
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ABEACSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
