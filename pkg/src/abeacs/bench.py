"""Benchmarks reproducing cost *shapes*: ABE vs attribute count, PoW attempts, access throughput."""

from __future__ import annotations

import dataclasses
import gc
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

from . import abe
from .chain.block import STRATEGIES, mine
from .chain.consensus import Miner, consensus_round
from .chain.tx import record
from .encoding import canonical_bytes, sha256
from .errors import ConfigError
from .netsim import make_params, measure_throughput
from .policy import assign_shares, build_tree, parse_policy

MODES = ("and", "or")
KIB = 1024
MIB = 1024 * KIB


@dataclass
class BenchConfig:
    attr_counts: List[int] = field(default_factory=lambda: list(range(2, 21, 2)))
    sizes: List[int] = field(default_factory=lambda: [1, KIB, 64 * KIB, MIB, 10 * MIB])
    modes: List[str] = field(default_factory=lambda: list(MODES))
    nbits: List[int] = field(default_factory=lambda: [8, 12, 16])
    strategies: List[str] = field(default_factory=lambda: list(STRATEGIES))
    concurrency: List[int] = field(default_factory=lambda: [1, 3, 4, 5])
    repetitions: int = 9
    pow_runs: int = 100
    size_attrs: int = 10
    backend: str = "curve"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions < 3:
            raise ConfigError("repetitions must be at least 3")
        for name in ("attr_counts", "sizes", "modes", "nbits", "strategies", "concurrency"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        if any(m not in MODES for m in self.modes):
            raise ConfigError(f"modes must be drawn from {MODES}")
        if any(s not in STRATEGIES for s in self.strategies):
            raise ConfigError(f"strategies must be drawn from {STRATEGIES}")
        if any(not 0 <= n <= 32 for n in self.nbits):
            raise ConfigError("nbits must be within 0..32")
        if any(c < 1 for c in self.attr_counts) or any(c < 1 for c in self.concurrency):
            raise ConfigError("attribute counts and concurrency levels must be positive")
        if any(s < 0 for s in self.sizes) or self.pow_runs < 1 or self.size_attrs < 1:
            raise ConfigError("sizes must be non-negative; pow_runs and size_attrs positive")

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "BenchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return sha256(canonical_bytes(self.to_json())).hex()[:16]


def r_squared(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line."""
    if len(set(ys)) == 1:
        return 1.0
    return statistics.correlation(xs, ys) ** 2


def _formula(mode: str, n: int) -> str:
    return f" {mode.upper()} ".join(f"attr_{i}" for i in range(n))


def _report(config: BenchConfig, kind: str, rows: List[Dict[str, Any]], flags: Dict[str, Any]) -> Dict[str, Any]:
    return {"bench": kind, "seed": config.seed, "config_digest": config.digest(), "rows": rows, "flags": flags}


def _interleaved(
    cases: Dict[Any, Callable[[], Any]],
    reps: int,
    reference: Callable[[], Any],
    min_sample: float = 0.05,
) -> Dict[Any, Tuple[float, float]]:
    """Per-call (speed-normalized median, raw median) time for each case.

    Cases are measured round-robin in an order reshuffled every round, so
    slow drifts and periodic background load spread evenly over all cases.
    Each sample repeats a case until it lasts about ``min_sample`` seconds
    and is immediately preceded by a sample of the fixed ``reference``
    workload. The case/reference ratio cancels whatever speed the machine
    had at that moment; the median ratio is scaled back to seconds by the
    reference's median time. The collector is paused while timing.
    """

    def calibrate(fn: Callable[[], Any]) -> int:
        start = time.perf_counter()
        fn()
        return max(1, math.ceil(min_sample / max(time.perf_counter() - start, 1e-9)))

    def sample(fn: Callable[[], Any], n: int) -> float:
        start = time.perf_counter()
        for _ in range(n):
            fn()
        return (time.perf_counter() - start) / n

    inner = {key: calibrate(fn) for key, fn in cases.items()}
    ref_n = calibrate(reference)
    raw: Dict[Any, List[float]] = {k: [] for k in cases}
    ratios: Dict[Any, List[float]] = {k: [] for k in cases}
    ref_times: List[float] = []
    order = list(cases)
    shuffler = random.Random(len(order))
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(reps):
            shuffler.shuffle(order)
            for key in order:
                ref = sample(reference, ref_n)
                t = sample(cases[key], inner[key])
                ref_times.append(ref)
                raw[key].append(t)
                ratios[key].append(t / ref)
            gc.collect()
    finally:
        if was_enabled:
            gc.enable()
    unit = statistics.median(ref_times)
    return {k: (statistics.median(ratios[k]) * unit, statistics.median(raw[k])) for k in cases}


def bench_abe(config: BenchConfig) -> Dict[str, Any]:
    """Median encrypt / keygen / decrypt times per (mode, attribute count), then per payload size."""
    params = make_params(config.backend)
    rng = random.Random(config.seed)
    pk, mk = abe.setup(params, rng)
    h = params.random_scalar(rng)

    cases: Dict[Tuple[str, int, str], Callable[[], Any]] = {}
    for mode in config.modes:
        for n in config.attr_counts:
            labels = [f"attr_{i}" for i in range(n)]
            tree = build_tree(parse_policy(_formula(mode, n)))
            _, matrix, _ = assign_shares(tree, rng, params.field)
            m = params.random_gt(rng)
            ct = abe.encrypt(pk, m, matrix, h)
            sk = abe.keygen(pk, mk, labels, h, rng)
            if abe.decrypt(pk, sk, ct) != m:
                raise AssertionError("benchmark decryption failed")
            cases[(mode, n, "encrypt")] = lambda m=m, matrix=matrix: abe.encrypt(pk, m, matrix, h)
            cases[(mode, n, "keygen")] = lambda labels=labels: abe.keygen(pk, mk, labels, h, rng)
            cases[(mode, n, "decrypt")] = lambda sk=sk, ct=ct: abe.decrypt(pk, sk, ct)
    reference = lambda: params.pair(pk.g_alpha, pk.g_beta)
    medians = _interleaved(cases, config.repetitions, reference)

    rows: List[Dict[str, Any]] = []
    series: Dict[Tuple[str, str], List[float]] = {}
    for (mode, n, op), (t, raw) in medians.items():
        rows.append({"section": "attrs", "mode": mode, "attrs": n, "op": op, "median_s": t, "raw_median_s": raw})
        series.setdefault((mode, op), []).append(t)

    flags: Dict[str, Any] = {}
    xs = [float(n) for n in config.attr_counts]
    if len(xs) >= 3:
        for (mode, op), ys in sorted(series.items()):
            flags[f"{mode}_{op}_r2"] = r_squared(xs, ys)
        for mode in config.modes:
            flags[f"{mode}_encrypt_linear"] = flags[f"{mode}_encrypt_r2"] >= 0.9
            flags[f"{mode}_keygen_linear"] = flags[f"{mode}_keygen_r2"] >= 0.9
        if "and" in config.modes:
            flags["and_decrypt_linear"] = flags["and_decrypt_r2"] >= 0.9
    if "or" in config.modes:
        ys = series[("or", "decrypt")]
        flags["or_decrypt_ratio"] = max(ys) / min(ys)
        flags["or_decrypt_flat"] = flags["or_decrypt_ratio"] <= 1.5

    # payload sweep at a fixed all-AND policy
    n = config.size_attrs
    labels = [f"attr_{i}" for i in range(n)]
    _, matrix, _ = assign_shares(build_tree(parse_policy(_formula("and", n))), rng, params.field)
    sk = abe.keygen(pk, mk, labels, h, rng)
    size_cases: Dict[Tuple[int, str], Callable[[], Any]] = {}
    for size in config.sizes:
        payload = rng.randbytes(size)
        wp = abe.wrap(pk, payload, matrix, h, rng)
        if abe.unwrap(pk, sk, wp) != payload:
            raise AssertionError("benchmark payload round-trip failed")
        size_cases[(size, "wrap")] = lambda payload=payload: abe.wrap(pk, payload, matrix, h, rng)
        size_cases[(size, "unwrap")] = lambda wp=wp: abe.unwrap(pk, sk, wp)
    size_medians = _interleaved(size_cases, config.repetitions, reference)
    small: Dict[str, List[float]] = {"wrap": [], "unwrap": []}
    for (size, op), (t, raw) in size_medians.items():
        rows.append({"section": "sizes", "mode": "and", "attrs": n, "op": op, "bytes": size, "median_s": t, "raw_median_s": raw})
        if size <= MIB:
            small[op].append(t)
    if small["wrap"]:
        ratio = max(max(v) / min(v) for v in small.values())
        flags["size_variation_ratio"] = ratio
        flags["size_constant"] = ratio <= 2.0
    return _report(config, "abe", rows, flags)


def attempts_summary(attempts: Sequence[int], nbits: int) -> Dict[str, Any]:
    """Mean and spread of attempt counts against the geometric expectation 2^nbits."""
    n = len(attempts)
    mean = statistics.fmean(attempts)
    sd = statistics.stdev(attempts) if n > 1 else 0.0
    expected = 2.0**nbits
    # standard error of the mean for a geometric law with success probability 2^-nbits
    q = 1.0 / expected
    se = math.sqrt((1 - q) / q**2 / n)
    return {
        "runs": n,
        "mean_attempts": mean,
        "sd_attempts": sd,
        "expected": expected,
        "z": (mean - expected) / se if se else 0.0,
        "within_3sigma": abs(mean - expected) <= 3 * se,
    }


def bench_pow(config: BenchConfig) -> Dict[str, Any]:
    """Attempts per block for every strategy / difficulty, then consensus rounds per concurrency level."""
    rows: List[Dict[str, Any]] = []
    flags: Dict[str, Any] = {}
    for nbits in config.nbits:
        for strategy in config.strategies:
            rng = random.Random(f"{config.seed}:{nbits}:{strategy}")
            attempts, times = [], []
            for _ in range(config.pow_runs):
                prefix = rng.randbytes(81)
                start = time.perf_counter()
                res = mine(prefix, nbits, strategy, rng)
                times.append(time.perf_counter() - start)
                attempts.append(res.attempts)
            summary = attempts_summary(attempts, nbits)
            rows.append(
                {
                    "section": "attempts",
                    "nbits": nbits,
                    "strategy": strategy,
                    **summary,
                    "mean_time_s": statistics.fmean(times),
                }
            )
            flags[f"{strategy}_{nbits}_within_3sigma"] = summary["within_3sigma"]
    flags["all_within_3sigma"] = all(v for k, v in flags.items() if k.endswith("within_3sigma"))

    nbits = config.nbits[len(config.nbits) // 2]
    msg = [record({"contract": "SCED", "method": "decrypt_result", "reference": "bench", "commit": "00"}, 0)]
    for strategy in config.strategies:
        for c in config.concurrency:
            rng = random.Random(f"{config.seed}:round:{strategy}:{c}")
            first, times = [], []
            for rep in range(config.repetitions):
                miners = [Miner(sha256(b"bench-node", bytes([i])), random.Random(rng.getrandbits(64)), strategy) for i in range(c)]
                prev = rng.randbytes(32)
                start = time.perf_counter()
                result = consensus_round(miners, [msg] * c, prev, nbits, rep)
                times.append(time.perf_counter() - start)
                first.append(min(result.attempts.values()))
            rows.append(
                {
                    "section": "concurrency",
                    "nbits": nbits,
                    "strategy": strategy,
                    "concurrency": c,
                    "mean_first_attempts": statistics.fmean(first),
                    "mean_round_time_s": statistics.fmean(times),
                }
            )
    return _report(config, "pow", rows, flags)


def bench_throughput(config: BenchConfig, requests: int = 60) -> Dict[str, Any]:
    rows = []
    for rep in range(config.repetitions):
        res = measure_throughput(requests=requests, seed=config.seed + rep)
        rows.append({"section": "throughput", "rep": rep, **res})
    med = {k: statistics.median(r[k] for r in rows) for k in ("success_tps", "failure_tps", "verification_tps")}
    flags = {
        **{f"median_{k}": v for k, v in med.items()},
        "ordering_holds": med["success_tps"] > med["failure_tps"] > med["verification_tps"],
    }
    return _report(config, "throughput", rows, flags)
