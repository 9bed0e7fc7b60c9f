"""Deterministic tick-driven simulation of an edge-IoT deployment.

Terminals own sensor data, edges mine and perform outsourced work, a
manager node runs the contracts, and users request access. Scenario
scripts are JSON; every contract call becomes a signed transaction and
every event that produced transactions is sealed into a block by a
consensus round among the edges.

Wall-clock time is only ever used for metrics, never for chain content,
so ``(script, seed)`` fully determines the chain bytes.
"""

from __future__ import annotations

import csv
import json
import random
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import psutil

from .abe import KeyComponent, MasterKey, PrivateKey
from .chain.block import Block, Chain, data_digest, meets_difficulty, validate_chain
from .chain.ledger import Ledger
from .chain.tx import NodeKey, Transaction, sign_tx, verify_tx
from .contracts import BEHAVIORS, DENIED_LOCKED, DENIED_PENALIZED, GRANTED, ContractEngine
from .curve import DEMO_PRIME, curve_params
from .encoding import canonical_bytes
from .errors import ABEACSError, ChainError, ConfigError, ConsensusError, DecryptionError, ScriptError
from .pairing import BENCH_PRIME, GroupParams, exponent_params

ROLES = ("terminal", "edge", "manager", "user")
MALICIOUS = BEHAVIORS[1:] + ("tamper_tx",)
BACKENDS = ("exponent", "curve")
CSV_HEADER = ["tick", "site", "temperature_c", "humidity_pct"]


def make_params(backend: str) -> GroupParams:
    if backend == "exponent":
        return exponent_params(BENCH_PRIME)
    if backend == "curve":
        return curve_params(DEMO_PRIME)
    raise ConfigError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")


# ---------------------------------------------------------------- topology


@dataclass
class NodeSpec:
    name: str
    role: str
    raw: Tuple[str, str, str, str] = ("", "", "", "")
    edge: Optional[str] = None  # terminals: the edge acting as their agent
    strategy: str = "hybrid"


@dataclass
class Topology:
    nodes: List[NodeSpec]

    def __post_init__(self) -> None:
        names = [n.name for n in self.nodes]
        dupes = sorted(n for n, c in Counter(names).items() if c > 1)
        if dupes:
            raise ConfigError(f"duplicate node ids: {', '.join(dupes)}")
        by_name = {n.name: n for n in self.nodes}
        for n in self.nodes:
            if n.role not in ROLES:
                raise ConfigError(f"node {n.name}: unknown role {n.role!r}")
            if n.edge is not None and (n.edge not in by_name or by_name[n.edge].role != "edge"):
                raise ConfigError(f"node {n.name}: attached edge {n.edge!r} is not an edge node")
        if sum(1 for n in self.nodes if n.role == "manager") > 1:
            raise ConfigError("at most one manager node")

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Topology":
        try:
            specs = []
            for item in data["nodes"]:
                raw = item.get("raw") or [item["name"], "", "", ""]
                if len(raw) != 4:
                    raise ConfigError(f"node {item['name']}: raw identity needs 4 fields")
                specs.append(
                    NodeSpec(
                        name=str(item["name"]),
                        role=str(item["role"]),
                        raw=tuple(str(r) for r in raw),  # type: ignore[arg-type]
                        edge=item.get("edge"),
                        strategy=item.get("strategy", "hybrid"),
                    )
                )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed topology: {exc}") from exc
        return cls(specs)

    def to_json(self) -> Dict[str, Any]:
        out = []
        for n in self.nodes:
            item: Dict[str, Any] = {"name": n.name, "role": n.role, "raw": list(n.raw)}
            if n.edge is not None:
                item["edge"] = n.edge
            if n.strategy != "hybrid":
                item["strategy"] = n.strategy
            out.append(item)
        return {"nodes": out}

    @classmethod
    def canonical(cls, terminals: int = 3, edges: int = 3) -> "Topology":
        nodes = [NodeSpec("manager", "manager", ("manager", "", "", "10.0.0.1:7000"))]
        for i in range(1, edges + 1):
            nodes.append(NodeSpec(f"edge{i}", "edge", (f"edge{i}", "", f"02:00:00:00:01:{i:02x}", f"10.0.1.{i}:7000")))
        for i in range(1, terminals + 1):
            nodes.append(
                NodeSpec(
                    f"term{i}",
                    "terminal",
                    (f"term{i}", f"COM{i}", f"02:00:00:00:02:{i:02x}", f"10.0.2.{i}:7000"),
                    edge=f"edge{(i - 1) % edges + 1}",
                )
            )
        return cls(nodes)


# ------------------------------------------------------------------- nodes


@dataclass
class SimNode:
    name: str
    role: str
    key: NodeKey
    seed: int
    id: Optional[str] = None
    inbox: List[Block] = field(default_factory=list)
    replica: Optional[Chain] = None
    edge: Optional[str] = None
    readings: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    behavior: str = "honest"


def agent_boundary_violations(node: SimNode) -> List[str]:
    """Paths inside ``node`` holding a master key, a decryption key or a foreign signing key."""
    found: List[str] = []
    seen: set = set()

    def walk(obj: Any, path: str) -> None:
        if id(obj) in seen or isinstance(obj, (str, bytes, int, float, bool, type(None))):
            return
        seen.add(id(obj))
        if isinstance(obj, (MasterKey, PrivateKey, KeyComponent)):
            found.append(f"{path}: {type(obj).__name__}")
            return
        if isinstance(obj, NodeKey):
            if obj is not node.key:
                found.append(f"{path}: foreign signing key")
            return
        if isinstance(obj, ContractEngine):
            found.append(f"{path}: contract engine")
            return
        if isinstance(obj, Mapping):
            for k, v in obj.items():
                walk(k, f"{path}[key]")
                walk(v, f"{path}[{k!r}]")
        elif isinstance(obj, (list, tuple, set, frozenset)):
            for i, v in enumerate(obj):
                walk(v, f"{path}[{i}]")
        elif is_dataclass(obj):
            for f in fields(obj):
                walk(getattr(obj, f.name), f"{path}.{f.name}")
        elif hasattr(obj, "__dict__"):
            for k, v in vars(obj).items():
                walk(v, f"{path}.{k}")

    walk(node, node.name)
    return found


# ----------------------------------------------------------------- metrics


@dataclass
class Metrics:
    counts: Counter = field(default_factory=Counter)
    latencies: Dict[str, List[float]] = field(default_factory=dict)
    block_times: List[float] = field(default_factory=list)
    attempts: List[int] = field(default_factory=list)
    samples: List[Dict[str, float]] = field(default_factory=list)

    def incr(self, name: str, n: int = 1) -> None:
        self.counts[name] += n

    @contextmanager
    def timed(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.latencies.setdefault(name, []).append(time.perf_counter() - start)

    def tps(self, name: str) -> float:
        lat = self.latencies.get(name, [])
        total = sum(lat)
        return len(lat) / total if total > 0 else 0.0

    def sample(self, tick: int) -> None:
        proc = psutil.Process()
        cpu = proc.cpu_times()
        self.samples.append({"tick": tick, "rss_bytes": proc.memory_info().rss, "cpu_s": cpu.user + cpu.system})

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"counts": dict(sorted(self.counts.items()))}
        out["tps"] = {k: self.tps(k) for k in sorted(self.latencies)}
        out["mean_latency_s"] = {k: sum(v) / len(v) for k, v in sorted(self.latencies.items()) if v}
        if self.block_times:
            out["block_time_s"] = sum(self.block_times) / len(self.block_times)
            out["attempts_per_block"] = sum(self.attempts) / len(self.attempts)
        if self.samples:
            out["peak_rss_bytes"] = max(s["rss_bytes"] for s in self.samples)
            out["cpu_s"] = self.samples[-1]["cpu_s"] - self.samples[0]["cpu_s"]
        return out

    def rows(self) -> List[Tuple[str, str, float]]:
        """(kind, name, value) rows for CSV output."""
        s = self.summary()
        rows: List[Tuple[str, str, float]] = [("count", k, v) for k, v in s["counts"].items()]
        rows += [("tps", k, v) for k, v in s["tps"].items()]
        rows += [("mean_latency_s", k, v) for k, v in s["mean_latency_s"].items()]
        for key in ("block_time_s", "attempts_per_block", "peak_rss_bytes", "cpu_s"):
            if key in s:
                rows.append(("scalar", key, s[key]))
        return rows


# -------------------------------------------------------------- sensor data


def load_sensor_csv(source: Union[str, Path, None] = None) -> List[Dict[str, Any]]:
    """Read ``tick,site,temperature_c,humidity_pct`` records; None = bundled fixture."""
    if source is None or source == "builtin":
        text = resources.files("abeacs").joinpath("data/sensors_3sites.csv").read_text(encoding="utf-8")
        label = "builtin fixture"
    else:
        text = Path(source).read_text(encoding="utf-8")
        label = str(source)
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ScriptError(f"{label}:1: expected header {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, 2):
        try:
            tick, site, temp, hum = row
            out.append({"tick": int(tick), "site": site, "temperature_c": float(temp), "humidity_pct": float(hum)})
        except ValueError as exc:
            raise ScriptError(f"{label}:{lineno}: {exc}") from exc
    return out


def encode_reading(reading: Mapping[str, Any]) -> bytes:
    return canonical_bytes(dict(reading))


# -------------------------------------------------------------- simulation


@dataclass
class Scenario:
    topology: Topology
    events: List[Dict[str, Any]]
    seed: int = 0
    nbits: int = 12
    backend: str = "exponent"
    drop_rate: float = 0.0

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Scenario":
        try:
            topo = data.get("topology")
            topology = Topology.from_json(topo) if topo is not None else Topology.canonical()
            events = list(data.get("events", []))
            if not all(isinstance(e, dict) and "op" in e for e in events):
                raise ScriptError("every event must be an object with an 'op' field")
            return cls(
                topology,
                events,
                seed=int(data.get("seed", 0)),
                nbits=int(data.get("nbits", 12)),
                backend=str(data.get("backend", "exponent")),
                drop_rate=float(data.get("drop_rate", 0.0)),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, ABEACSError):
                raise
            raise ScriptError(f"malformed scenario: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScriptError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_json(data)


class Simulation:
    def __init__(
        self,
        topology: Topology,
        seed: int = 0,
        nbits: int = 12,
        backend: str = "exponent",
        drop_rate: float = 0.0,
        params: Optional[GroupParams] = None,
        sample_every: int = 1,
    ):
        if not 0.0 <= drop_rate < 1.0:
            raise ConfigError("drop_rate must be within [0, 1)")
        self.topology = topology
        self.seed = seed
        self.tick = 0
        self.drop_rate = drop_rate
        self.sample_every = sample_every
        self.metrics = Metrics()
        self.log: List[Dict[str, Any]] = []
        self._drop_rng = random.Random(f"{seed}:drops")

        self.nodes: Dict[str, SimNode] = {}
        for spec in topology.nodes:
            node_seed = random.Random(f"{seed}:{spec.name}").getrandbits(64)
            node = SimNode(spec.name, spec.role, NodeKey.from_rng(random.Random(node_seed)), node_seed, edge=spec.edge)
            self.nodes[spec.name] = node
        self._specs = {s.name: s for s in topology.nodes}
        manager = next((n for n in self.nodes.values() if n.role == "manager"), None)

        self.ledger = Ledger(nbits=nbits)
        self.engine = ContractEngine(
            params or make_params(backend),
            random.Random(f"{seed}:engine"),
            self.ledger,
            manager_key=manager.key if manager else None,
        )
        if manager is not None:
            manager.id = self.engine.manager_id
            manager.replica = Chain()

    # --------------------------------------------------------------- api

    @classmethod
    def from_scenario(cls, scenario: Scenario, **kw: Any) -> "Simulation":
        return cls(scenario.topology, scenario.seed, scenario.nbits, scenario.backend, scenario.drop_rate, **kw)

    @property
    def chain(self) -> Chain:
        return self.ledger.chain

    def node(self, name: Any) -> SimNode:
        if not isinstance(name, str) or name not in self.nodes:
            raise ScriptError(f"unknown node {name!r}")
        return self.nodes[name]

    def registered(self, name: Any) -> SimNode:
        node = self.node(name)
        if node.id is None:
            raise ScriptError(f"node {name!r} is not registered")
        return node

    def run(self, events: Sequence[Mapping[str, Any]]) -> Tuple[Chain, Metrics]:
        self.metrics.sample(self.tick)
        for i, event in enumerate(events):
            try:
                self.apply(event)
            except ABEACSError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ScriptError(f"event {i} ({event.get('op')}): {exc}") from exc
            if self.sample_every and (i + 1) % self.sample_every == 0:
                self.metrics.sample(self.tick)
        self._seal()
        self.check_agent_boundary()
        return self.chain, self.metrics

    def apply(self, event: Mapping[str, Any]) -> None:
        op = event.get("op")
        handler = getattr(self, f"_op_{op}", None) if isinstance(op, str) else None
        if handler is None:
            raise ScriptError(f"unknown event op {op!r}")
        self.metrics.incr(f"event_{op}")
        handler(event)
        self._seal()
        self.check_agent_boundary()

    def check_agent_boundary(self) -> None:
        for node in self.nodes.values():
            if node.role == "terminal":
                bad = agent_boundary_violations(node)
                if bad:
                    raise AssertionError(f"agent boundary breached: {bad}")

    # ----------------------------------------------------------- sealing

    def _seal(self) -> None:
        if not self.ledger.mempool or not self.ledger.miners:
            return
        start = time.perf_counter()
        result = self.ledger.seal(self.tick)
        self._record_round(result, time.perf_counter() - start)

    def _record_round(self, result: Any, elapsed: float) -> None:
        self.metrics.block_times.append(elapsed)
        self.metrics.attempts.append(result.attempts[result.block.creator])
        self.metrics.incr("blocks")
        self._broadcast(result.block)

    def _broadcast(self, block: Block) -> None:
        # synchronous delivery in sender-id order; the drop knob loses copies
        for node in sorted(self.nodes.values(), key=lambda n: n.id or ""):
            if node.replica is None:
                continue
            if self.drop_rate and self._drop_rng.random() < self.drop_rate:
                self.metrics.incr("messages_dropped")
                continue
            node.inbox.append(block)
            self._drain(node)

    def _drain(self, node: SimNode) -> None:
        assert node.replica is not None
        while node.inbox:
            block = node.inbox.pop(0)
            try:
                node.replica.append_block(block)
            except ChainError:
                # missed an earlier block: catch up from the canonical chain
                self.metrics.incr("replica_resyncs")
                for b in self.chain.blocks[len(node.replica.blocks) :]:
                    node.replica.append_block(b)
                    if b is block:
                        break

    # ------------------------------------------------------------ events

    def _op_register(self, ev: Mapping[str, Any]) -> None:
        names = ev.get("nodes") or [ev["node"]]
        for name in names:
            node = self.node(name)
            if node.id is not None:
                raise ScriptError(f"node {name!r} registered twice")
            spec = self._specs[name]
            if node.role == "manager":
                raise ScriptError("the manager is registered at deployment")
            if node.role == "user":
                node.id = self.engine.register_user(spec.raw[0], node.key, self.tick)
            else:
                node.id = self.engine.register_device(spec.raw, node.key, node.role, self.tick)
                if node.role == "edge":
                    miner = self.ledger.miners[-1]
                    miner.strategy = spec.strategy
                    node.replica = Chain()
                    for b in self.chain.blocks[1:]:
                        node.replica.append_block(b)
            self.metrics.incr("registrations")

    def _op_add_att(self, ev: Mapping[str, Any]) -> None:
        node = self.registered(ev["node"])
        self.engine.scpi_add_att(node.id, ev["labels"], self.tick)

    def _op_del_att(self, ev: Mapping[str, Any]) -> None:
        node = self.registered(ev["node"])
        self.engine.scpi_del_att(node.id, self.tick)

    def _op_add_policy(self, ev: Mapping[str, Any]) -> None:
        subject = self.registered(ev["subject"])
        obj = self.registered(ev["object"])
        self.engine.scpa_add_policy(subject.id, obj.id, ev["formula"], self.tick)

    def _op_ingest_data(self, ev: Mapping[str, Any]) -> None:
        node = self.registered(ev["node"])
        if node.role != "terminal":
            raise ScriptError(f"{node.name} is not a terminal")
        if "series" in ev:
            site = ev.get("site", node.name)
            readings = [
                {"tick": int(t), "site": site, "temperature_c": float(temp), "humidity_pct": float(hum)}
                for t, temp, hum in ev["series"]
            ]
        else:
            readings = load_sensor_csv(ev.get("csv"))
            if "site" in ev:
                readings = [r for r in readings if r["site"] == ev["site"]]
        if "limit" in ev:
            readings = readings[: int(ev["limit"])]
        agent = self.registered(node.edge).id if node.edge else None
        for reading in readings:
            try:
                ref = self.engine.sced_encrypt(node.id, encode_reading(reading), self.tick, via=agent)
            except ChainError:
                self.metrics.incr("tx_rejected")
                self.log.append({"op": "ingest_data", "tick": self.tick, "outcome": "rejected"})
                continue
            node.readings[ref] = dict(reading)
            self.metrics.incr("records_ingested")
            self.log.append({"op": "ingest_data", "tick": self.tick, "outcome": "stored", "reference": ref})

    def _op_request_access(self, ev: Mapping[str, Any]) -> None:
        subject = self.registered(ev["subject"])
        obj = self.registered(ev["object"])
        self.engine.emit(subject.id, {"contract": "SCPE", "method": "enforce", "object": obj.id}, self.tick)
        start = time.perf_counter()
        res = self.engine.scpe_enforce(subject.id, obj.id, self.tick)
        elapsed = time.perf_counter() - start
        entry: Dict[str, Any] = {"op": "request_access", "tick": self.tick, "outcome": res.outcome, "reason": res.reason}
        if res.penalty is not None:
            entry["n_time"], entry["t"] = res.penalty
        if res.outcome == GRANTED:
            self.metrics.incr("access_granted")
            self.metrics.latencies.setdefault("access_success", []).append(elapsed)
            record = ev.get("record")
            if record is not None:
                refs = list(obj.readings)
                if not 0 <= int(record) < len(refs):
                    raise ScriptError(f"{obj.name} holds {len(refs)} records; no record {record}")
                ref = refs[int(record)]
                before = len(self.ledger.rounds)
                start = time.perf_counter()
                try:
                    plain = self.engine.sced_decrypt(subject.id, ref, self.tick)
                except ConsensusError:
                    self.metrics.incr("consensus_failures")
                    entry["decrypt"] = "consensus_failed"
                except DecryptionError:
                    self.metrics.incr("decrypt_failed")
                    entry["decrypt"] = "failed"
                else:
                    honest = plain == encode_reading(obj.readings[ref])
                    self.metrics.incr("decrypt_honest" if honest else "decrypt_forged")
                    entry["decrypt"] = "honest" if honest else "forged"
                    entry["plaintext"] = plain.decode("utf-8", "replace")
                elapsed = time.perf_counter() - start
                self.metrics.latencies.setdefault("decrypt", []).append(elapsed)
                for result in self.ledger.rounds[before:]:
                    self._record_round(result, elapsed)
            self.engine.scpe_release(subject.id, obj.id)
        else:
            self.metrics.latencies.setdefault("access_failure", []).append(elapsed)
            self.metrics.incr(
                {DENIED_PENALIZED: "access_penalized", DENIED_LOCKED: "access_locked"}.get(res.outcome, "access_denied")
            )
        expect = ev.get("expect")
        if expect is not None and expect != res.outcome:
            self.metrics.incr("expectation_mismatches")
            entry["expected"] = expect
        self.log.append(entry)

    def _op_inject_malicious(self, ev: Mapping[str, Any]) -> None:
        node = self.registered(ev["node"])
        behavior = ev["behavior"]
        if node.role != "edge":
            raise ScriptError(f"{node.name} is a {node.role}; only edges can be made malicious")
        if behavior not in MALICIOUS and behavior != "honest":
            raise ScriptError(f"unknown behavior {behavior!r}")
        node.behavior = behavior
        if behavior == "tamper_tx":
            key, nid = node.key, node.id

            def tampering(payload: Dict[str, Any], tick: int) -> Transaction:
                tx = sign_tx(key, nid, payload, tick)
                altered = dict(tx.payload, tampered=True)
                return Transaction(altered, tx.sender, tx.timestamp, tx.signature)

            self.engine.set_signer(node.id, tampering)
            self.engine.set_behavior(node.id, "honest")
        else:
            self.engine.set_signer(node.id, lambda payload, tick, _k=node.key, _id=node.id: sign_tx(_k, _id, payload, tick))
            self.engine.set_behavior(node.id, behavior)
        self.metrics.incr("faults_injected")

    def _op_advance(self, ev: Mapping[str, Any]) -> None:
        ticks = int(ev.get("ticks", 1))
        if ticks < 0:
            raise ScriptError("cannot advance by a negative number of ticks")
        self.tick += ticks


def run_scenario(scenario: Scenario, **kw: Any) -> Tuple[Simulation, Chain, Metrics]:
    sim = Simulation.from_scenario(scenario, **kw)
    chain, metrics = sim.run(scenario.events)
    return sim, chain, metrics


def canonical_scenario(seed: int = 7, nbits: int = 12, records: int = 4) -> Scenario:
    """Three terminals (outside / lab / aisle), three edges, two users."""
    if records < 1:
        raise ConfigError("the canonical scenario needs at least one record per terminal")
    topo = Topology.canonical()
    topo.nodes += [NodeSpec("nurse", "user", ("nurse", "", "", "")), NodeSpec("visitor", "user", ("visitor", "", "", ""))]
    Topology(topo.nodes)  # re-validate
    sites = {"term1": "outside", "term2": "lab", "term3": "aisle"}
    events: List[Dict[str, Any]] = [
        {"op": "register", "nodes": ["edge1", "edge2", "edge3"]},
        {"op": "register", "nodes": ["term1", "term2", "term3", "nurse", "visitor"]},
        {"op": "add_att", "node": "nurse", "labels": ["Sub_nurse", "Sub_ward_3", "Op_read", "En_day_shift"]},
        {"op": "add_att", "node": "visitor", "labels": ["Sub_visitor", "Op_read"]},
    ]
    for term, site in sites.items():
        events.append({"op": "add_att", "node": term, "labels": [f"Ob_sensor_{site}"]})
        events.append(
            {
                "op": "add_policy",
                "subject": "nurse",
                "object": term,
                "formula": f"(Sub_nurse OR Sub_ward_3) AND Ob_sensor_{site} AND Op_read AND En_day_shift",
            }
        )
        events.append({"op": "ingest_data", "node": term, "csv": "builtin", "site": site, "limit": records})
    events += [
        {"op": "advance", "ticks": 1},
        {"op": "request_access", "subject": "nurse", "object": "term2", "record": 0, "expect": GRANTED},
        {"op": "request_access", "subject": "visitor", "object": "term2", "expect": DENIED_PENALIZED},
        {"op": "advance", "ticks": 1},
        {"op": "request_access", "subject": "visitor", "object": "term2", "expect": DENIED_LOCKED},
        {"op": "inject_malicious", "node": "edge3", "behavior": "forge_decrypt"},
        {"op": "request_access", "subject": "nurse", "object": "term1", "record": 1 % records, "expect": GRANTED},
        {"op": "inject_malicious", "node": "edge2", "behavior": "tamper_tx"},
        {"op": "ingest_data", "node": "term2", "series": [[100, 22.5, 44.0]], "site": "lab"},
        {"op": "inject_malicious", "node": "edge2", "behavior": "honest"},
        {"op": "advance", "ticks": 24},
        {"op": "request_access", "subject": "nurse", "object": "term3", "record": 2 % records, "expect": GRANTED},
    ]
    return Scenario(topo, events, seed=seed, nbits=nbits)


# -------------------------------------------------------------- throughput


def verify_transaction(chain: Chain, txid: str) -> bool:
    """Locate ``txid`` and re-check it the way an auditor would.

    The transaction's own signature, the containing block's data digest
    and proof of work, and every other signature in that block are all
    re-verified against the key registry rebuilt from the chain.
    """
    registry: Dict[str, str] = {}
    for block in chain.blocks:
        hit = any(tx.txid == txid for tx in block.transactions)
        for tx in block.transactions:
            vk = tx.payload.get("vk") if tx.payload.get("contract") == "REG" and tx.payload.get("id") == tx.sender else None
            if vk:
                registry.setdefault(tx.sender, vk)
        if hit:
            if data_digest(block.transactions) != block.data_digest:
                return False
            if block.compute_hash() != block.block_hash or not meets_difficulty(block.block_hash, block.nbits):
                return False
            return all(tx.is_record or verify_tx(tx, registry.get(tx.sender)) for tx in block.transactions)
    return False


def measure_throughput(requests: int = 60, seed: int = 11, nbits: int = 8, batch: int = 20) -> Dict[str, float]:
    """TPS for successful access, failed access and transaction verification.

    success:      judge + one signed decision transaction
    failure:      judge + penalty, i.e. two signed transactions
    verification: locate a transaction and re-verify it with its block
    """
    scenario = canonical_scenario(seed=seed, nbits=nbits, records=1)
    sim = Simulation.from_scenario(scenario)
    sim.run(scenario.events[:13])  # deployment, attributes and policies
    eng = sim.engine
    nurse, visitor, obj = (sim.nodes[n].id for n in ("nurse", "visitor", "term2"))
    metrics = Metrics()
    tick = sim.tick + 1
    for i in range(requests):
        with metrics.timed("success"):
            res = eng.scpe_enforce(nurse, obj, tick)
        assert res.outcome == GRANTED
        eng.scpe_release(nurse, obj)
        with metrics.timed("failure"):
            res = eng.scpe_enforce(visitor, obj, tick)
        assert res.outcome == DENIED_PENALIZED, res
        tick += 2  # let the lockout lapse so every failure is judged afresh
        if (i + 1) % batch == 0:
            sim.tick = tick
            sim._seal()
    sim.tick = tick
    sim._seal()
    decisions = [tx.txid for _, tx in sim.chain.transactions() if tx.payload.get("contract") == "SCPD"]
    for txid in decisions[:requests]:
        with metrics.timed("verification"):
            ok = verify_transaction(sim.chain, txid)
        assert ok
    return {
        "success_tps": metrics.tps("success"),
        "failure_tps": metrics.tps("failure"),
        "verification_tps": metrics.tps("verification"),
        "chain_valid": float(validate_chain(sim.chain)),
    }
