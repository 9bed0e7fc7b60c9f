import json

import pytest

from abeacs.chain import validate_chain
from abeacs.contracts import DENIED_LOCKED, DENIED_PENALIZED, GRANTED
from abeacs.errors import ConfigError, ScriptError
from abeacs.netsim import (
    CSV_HEADER,
    NodeSpec,
    Scenario,
    SimNode,
    Simulation,
    Topology,
    agent_boundary_violations,
    canonical_scenario,
    load_sensor_csv,
    measure_throughput,
    run_scenario,
    verify_transaction,
)

SETUP = 13  # events in the canonical script before the first access request


def small_sim(**kw):
    scenario = canonical_scenario(nbits=4, records=2)
    sim = Simulation.from_scenario(scenario, **kw)
    return sim, scenario


@pytest.fixture(scope="module")
def canonical_run():
    return run_scenario(canonical_scenario())


class TestTopology:
    def test_duplicate_ids(self):
        with pytest.raises(ConfigError, match="duplicate node ids: edge1"):
            Topology([NodeSpec("edge1", "edge"), NodeSpec("edge1", "edge")])

    def test_bad_role_and_edge(self):
        with pytest.raises(ConfigError):
            Topology([NodeSpec("x", "satellite")])
        with pytest.raises(ConfigError):
            Topology([NodeSpec("t", "terminal", edge="nowhere")])

    def test_json_roundtrip(self):
        topo = Topology.canonical()
        assert Topology.from_json(topo.to_json()) == topo

    def test_canonical_shape(self):
        roles = [n.role for n in Topology.canonical().nodes]
        assert roles.count("edge") == 3 and roles.count("terminal") == 3 and roles.count("manager") == 1


class TestScenario:
    def test_empty_script_is_genesis_only(self):
        sim = Simulation(Topology.canonical(), seed=1)
        chain, _ = sim.run([])
        assert chain.height == 0 and chain.validate()

    def test_canonical_outcomes(self, canonical_run):
        sim, chain, metrics = canonical_run
        assert validate_chain(chain)
        assert metrics.counts["expectation_mismatches"] == 0
        assert metrics.counts["decrypt_honest"] == 3 and metrics.counts["decrypt_forged"] == 0
        assert metrics.counts["tx_rejected"] == 1
        outcomes = [e["outcome"] for e in sim.log if e["op"] == "request_access"]
        assert outcomes == [GRANTED, DENIED_PENALIZED, DENIED_LOCKED, GRANTED, GRANTED]
        assert all(b.nbits == 12 for b in chain.blocks[1:])

    def test_plaintext_matches_reading(self, canonical_run):
        sim, _, _ = canonical_run
        grants = [e for e in sim.log if e.get("decrypt") == "honest"]
        first = json.loads(grants[0]["plaintext"])
        lab = [r for r in load_sensor_csv() if r["site"] == "lab"][0]
        assert first == lab

    def test_deterministic_chain_bytes(self):
        scenario = canonical_scenario(nbits=4, records=2)
        a = run_scenario(scenario)[1].to_lines()
        b = run_scenario(scenario)[1].to_lines()
        assert a == b
        c = run_scenario(canonical_scenario(seed=8, nbits=4, records=2))[1].to_lines()
        assert a != c

    def test_replicas_follow_canonical_chain(self, canonical_run):
        sim, chain, _ = canonical_run
        for node in sim.nodes.values():
            if node.replica is not None:
                assert node.replica.to_lines() == chain.to_lines()

    def test_drop_rate_resync(self):
        scenario = canonical_scenario(nbits=4, records=2)
        scenario.drop_rate = 0.4
        sim, chain, metrics = run_scenario(scenario)
        assert metrics.counts["messages_dropped"] > 0
        assert metrics.counts["replica_resyncs"] > 0
        assert validate_chain(chain)

    def test_bad_drop_rate(self):
        with pytest.raises(ConfigError):
            Simulation(Topology.canonical(), drop_rate=1.0)


class TestFaults:
    def test_two_of_three_forgers_win(self):
        sim, scenario = small_sim()
        sim.run(scenario.events[:SETUP])
        sim.run(
            [
                {"op": "inject_malicious", "node": "edge1", "behavior": "forge_decrypt"},
                {"op": "inject_malicious", "node": "edge2", "behavior": "forge_decrypt"},
                {"op": "request_access", "subject": "nurse", "object": "term1", "record": 0},
            ]
        )
        assert sim.metrics.counts["decrypt_forged"] == 1

    def test_skip_work_minority(self):
        sim, scenario = small_sim()
        sim.run(scenario.events[:SETUP])
        sim.run(
            [
                {"op": "inject_malicious", "node": "edge1", "behavior": "skip_work"},
                {"op": "request_access", "subject": "nurse", "object": "term1", "record": 0},
            ]
        )
        assert sim.metrics.counts["decrypt_honest"] == 1

    def test_terminal_cannot_be_malicious(self):
        sim, scenario = small_sim()
        sim.run(scenario.events[:2])
        with pytest.raises(ScriptError):
            sim.run([{"op": "inject_malicious", "node": "term1", "behavior": "forge_decrypt"}])

    def test_tamper_counted(self):
        sim, scenario = small_sim()
        sim.run(scenario.events[:SETUP])
        sim.run(
            [
                {"op": "inject_malicious", "node": "edge1", "behavior": "tamper_tx"},
                {"op": "ingest_data", "node": "term1", "series": [[1, 20.0, 50.0], [2, 20.5, 51.0]]},
            ]
        )
        assert sim.metrics.counts["tx_rejected"] == 2
        assert all(r == "bad_signature" for _, r in sim.ledger.rejected)


class TestIngest:
    def test_hundred_records(self):
        sim, scenario = small_sim()
        sim.run(scenario.events[:SETUP])
        before = len(sim.nodes["term1"].readings)
        series = [[t, 20 + t / 10, 50 - t / 10] for t in range(100)]
        sim.run([{"op": "ingest_data", "node": "term1", "series": series}])
        refs = list(sim.nodes["term1"].readings)[before:]
        assert len(refs) == 100
        on_chain = {tx.payload["reference"] for _, tx in sim.chain.transactions() if tx.payload.get("method") == "encrypt"}
        assert set(refs) <= on_chain
        sim.run([{"op": "request_access", "subject": "nurse", "object": "term1", "record": before + 42}])
        entry = sim.log[-1]
        assert entry["decrypt"] == "honest"
        assert json.loads(entry["plaintext"])["temperature_c"] == 20 + 42 / 10

    def test_fixture_all_sites(self):
        rows = load_sensor_csv("builtin")
        assert {r["site"] for r in rows} == {"outside", "lab", "aisle"}
        sim, scenario = small_sim()
        sim.run(scenario.events[:SETUP])
        sim.run([{"op": "ingest_data", "node": "term3", "csv": "builtin"}])
        assert sim.metrics.counts["records_ingested"] == 3 * 2 + len(rows)

    def test_custom_csv_and_bad_header(self, tmp_path):
        good = tmp_path / "good.csv"
        good.write_text(",".join(CSV_HEADER) + "\n0,lab,21.0,40.0\n")
        assert load_sensor_csv(good) == [{"tick": 0, "site": "lab", "temperature_c": 21.0, "humidity_pct": 40.0}]
        bad = tmp_path / "bad.csv"
        bad.write_text("t,s,temp\n")
        with pytest.raises(ScriptError, match=":1:"):
            load_sensor_csv(bad)
        bad.write_text(",".join(CSV_HEADER) + "\n0,lab,hot,40\n")
        with pytest.raises(ScriptError, match=":2:"):
            load_sensor_csv(bad)

    def test_unregistered_terminal(self):
        sim, _ = small_sim()
        with pytest.raises(ScriptError):
            sim.run([{"op": "ingest_data", "node": "term1", "series": [[0, 1.0, 2.0]]}])


class TestScriptErrors:
    @pytest.mark.parametrize(
        "event",
        [
            {"op": "register", "node": "ghost"},
            {"op": "teleport"},
            {"op": "advance", "ticks": -1},
            {"op": "add_att", "node": "edge1"},
        ],
    )
    def test_rejected(self, event):
        sim, _ = small_sim()
        sim.run([{"op": "register", "nodes": ["edge1"]}])
        with pytest.raises(ScriptError):
            sim.run([event])

    def test_double_registration(self):
        sim, _ = small_sim()
        with pytest.raises(ScriptError):
            sim.run([{"op": "register", "node": "edge1"}, {"op": "register", "node": "edge1"}])

    def test_malformed_scenario(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text('{"events": [{"no_op": 1}]}')
        with pytest.raises(ScriptError):
            Scenario.load(path)
        path.write_text("{oops")
        with pytest.raises(ScriptError, match=":1:"):
            Scenario.load(path)


class TestAgentBoundary:
    def test_clean_after_run(self, canonical_run):
        sim, _, _ = canonical_run
        for node in sim.nodes.values():
            if node.role == "terminal":
                assert agent_boundary_violations(node) == []

    def test_detects_leaks(self, canonical_run):
        sim, _, _ = canonical_run
        term = sim.nodes["term1"]
        leaky = SimNode("leaky", "terminal", term.key, 0)
        leaky.readings["x"] = {"mk": sim.engine._mk}
        assert agent_boundary_violations(leaky)
        leaky.readings["x"] = {"other": sim.nodes["edge1"].key}
        assert agent_boundary_violations(leaky)


class TestMetrics:
    def test_summary(self, canonical_run):
        _, chain, metrics = canonical_run
        s = metrics.summary()
        assert s["counts"]["blocks"] == chain.height
        assert s["attempts_per_block"] > 0 and s["peak_rss_bytes"] > 0
        assert ("count", "blocks", chain.height) in metrics.rows()

    def test_verify_transaction(self, canonical_run):
        _, chain, _ = canonical_run
        tx = chain.blocks[3].transactions[0]
        assert verify_transaction(chain, tx.txid)
        assert not verify_transaction(chain, "00" * 32)

    def test_throughput_probe(self):
        res = measure_throughput(requests=6, nbits=4, batch=3)
        assert res["chain_valid"] == 1.0
        assert min(res["success_tps"], res["failure_tps"], res["verification_tps"]) > 0


def test_record_index_out_of_range():
    sim, scenario = small_sim()
    sim.run(scenario.events[:SETUP])
    with pytest.raises(ScriptError, match="no record 9"):
        sim.run([{"op": "request_access", "subject": "nurse", "object": "term1", "record": 9}])
