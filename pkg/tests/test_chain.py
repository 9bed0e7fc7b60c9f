import dataclasses
import json
import random

import pytest

from abeacs.chain import (
    GENESIS,
    Block,
    Chain,
    Miner,
    NodeKey,
    build_block,
    consensus_round,
    data_digest,
    load_chain,
    meets_difficulty,
    mine,
    record,
    sign_tx,
    validate_chain,
    validate_file,
    verify_tx,
)
from abeacs.chain.block import STRATEGIES, validate_blocks
from abeacs.chain.ledger import Ledger
from abeacs.encoding import sha256
from abeacs.errors import ChainError, ConsensusError, MiningError

from helpers import build_chain, contract_call, identity, registration


def result_msg(text):
    return [record({"contract": "SCED", "method": "decrypt_result", "reference": "ref", "commit": text}, 5)]


def miners(n, strategy="hybrid", seed=0):
    return [Miner(sha256(b"node", bytes([i])), random.Random(f"{seed}:{i}"), strategy) for i in range(n)]


class TestTransactions:
    def test_sign_and_verify(self):
        node_id, key = identity("alice")
        tx = sign_tx(key, node_id, {"contract": "SCPE", "method": "enforce"}, 3)
        assert verify_tx(tx, key.vk)

    def test_payload_flip_breaks_signature(self):
        tx = contract_call("alice", 3, object="door")
        forged = dataclasses.replace(tx, payload={**tx.payload, "object": "doos"})
        assert not verify_tx(forged, identity("alice")[1].vk)

    def test_timestamp_and_sender_are_signed(self):
        tx = contract_call("alice", 3, object="door")
        vk = identity("alice")[1].vk
        assert not verify_tx(dataclasses.replace(tx, timestamp=4), vk)
        assert not verify_tx(dataclasses.replace(tx, sender="00" * 32), vk)

    def test_other_key_fails(self):
        tx = contract_call("alice", 3)
        assert not verify_tx(tx, identity("bob")[1].vk)
        assert not verify_tx(tx, None)

    def test_unsigned_only_for_results(self):
        with pytest.raises(ValueError):
            record({"contract": "SCPE", "method": "enforce"}, 0)

    def test_json_roundtrip(self):
        tx = contract_call("alice", 3, object="door")
        assert type(tx).from_json(json.loads(json.dumps(tx.to_json()))) == tx

    def test_key_from_seed_is_deterministic(self):
        assert NodeKey.from_rng(random.Random(1)).vk == NodeKey.from_rng(random.Random(1)).vk


class TestMining:
    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_zero_difficulty_takes_first_nonce(self, strategy):
        res = mine(b"x" * 81, 0, strategy, random.Random(0))
        assert res.attempts == 1

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_eight_bits(self, strategy):
        prefix = bytes(81)
        res = mine(prefix, 8, strategy, random.Random(1))
        assert res.block_hash[0] == 0
        assert res.block_hash == sha256(prefix, res.nonce.to_bytes(8, "big"))

    def test_sequential_starts_at_zero(self):
        res = mine(b"abc", 4, "sequential", random.Random(0))
        assert res.nonce == res.attempts - 1

    def test_difficulty_predicate(self):
        assert meets_difficulty(b"\x00\x0f" + bytes(30), 12)
        assert not meets_difficulty(b"\x00\x10" + bytes(30), 12)
        assert meets_difficulty(b"\xff" * 32, 0)

    def test_budget_exhaustion(self):
        with pytest.raises(MiningError):
            mine(b"abc", 30, "random", random.Random(0), max_attempts=10)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            mine(b"abc", 1, "greedy", random.Random(0))


class TestConsensus:
    def test_unanimous(self):
        res = consensus_round(miners(3), [result_msg("aa")] * 3, GENESIS.block_hash, 6, 5)
        assert res.message == tuple(result_msg("aa"))
        assert res.support == 2  # the round stops once a strict majority is reached
        assert len(res.candidates) == 1

    def test_two_of_five_malicious(self):
        msgs = [result_msg("good")] * 3 + [result_msg("forged")] * 2
        res = consensus_round(miners(5), msgs, GENESIS.block_hash, 6, 5)
        assert res.message[0].payload["commit"] == "good"
        assert res.support >= 3

    def test_malicious_early_block_needs_recomputation(self):
        # the forgers always finish first; their block still gathers no honest support
        ms = miners(5, strategy="sequential")
        msgs = [result_msg("good")] * 3 + [result_msg("forged")] * 2
        res = consensus_round(ms, msgs, GENESIS.block_hash, 4, 5)
        forged = [c for c in res.candidates if c.block.transactions[0].payload["commit"] == "forged"]
        assert all(set(c.supporters) <= {m.node_id for m in ms[3:]} for c in forged)
        assert res.message[0].payload["commit"] == "good"

    def test_split_fails(self):
        msgs = [result_msg("a"), result_msg("a"), result_msg("b"), result_msg("b")]
        with pytest.raises(ConsensusError) as info:
            consensus_round(miners(4), msgs, GENESIS.block_hash, 4, 5)
        assert sorted(info.value.results.values()) == [2, 2]

    def test_result_set_counts(self):
        msgs = [result_msg("a")] * 4 + [result_msg("b")] * 3
        res = consensus_round(miners(7), msgs, GENESIS.block_hash, 4, 5)
        assert max(res.result_set().values()) == 4
        assert sum(res.result_set().values()) <= 7

    def test_message_count_checked(self):
        with pytest.raises(ValueError):
            consensus_round(miners(3), [result_msg("a")], GENESIS.block_hash, 0, 0)

    def test_deterministic(self):
        a = consensus_round(miners(3, seed=4), [result_msg("a")] * 3, GENESIS.block_hash, 8, 5)
        b = consensus_round(miners(3, seed=4), [result_msg("a")] * 3, GENESIS.block_hash, 8, 5)
        assert a.block == b.block


class TestChain:
    def test_ten_blocks_validate(self):
        chain = build_chain(10, 8)
        assert chain.height == 10
        assert chain.validate() and validate_chain(chain)
        assert all(b.block_hash[0] == 0 for b in chain.blocks[1:])

    def test_tampered_transaction(self):
        chain = build_chain(6, 4)
        blocks = list(chain.blocks)
        tx = blocks[3].transactions[0]
        blocks[3] = dataclasses.replace(blocks[3], transactions=(dataclasses.replace(tx, timestamp=tx.timestamp + 1),))
        ok, reason = validate_blocks(blocks)
        assert not ok and "data_digest_mismatch" in reason

    def test_stale_prev_hash(self):
        chain = build_chain(3, 4)
        stale, _ = build_block([], chain.blocks[1].block_hash, sha256(b"m"), 9, 4, "hybrid", random.Random(0))
        with pytest.raises(ChainError) as info:
            chain.append_block(stale)
        assert info.value.reason == "broken_link"

    def test_unknown_sender_rejected(self):
        chain = Chain()
        block, _ = build_block([contract_call("carol", 1)], GENESIS.block_hash, sha256(b"m"), 1, 0, "hybrid", random.Random(0))
        with pytest.raises(ChainError) as info:
            chain.append_block(block)
        assert info.value.reason == "unknown_sender"

    def test_key_rebinding_rejected(self):
        chain = Chain()
        first, _ = build_block([registration("alice")], GENESIS.block_hash, sha256(b"m"), 1, 0, "hybrid", random.Random(0))
        chain.append_block(first)
        node_id, _ = identity("alice")
        other = NodeKey.from_rng(random.Random(5))
        rebind = sign_tx(other, node_id, {"contract": "REG", "id": node_id, "vk": other.vk}, 2)
        block, _ = build_block([rebind], first.block_hash, sha256(b"m"), 2, 0, "hybrid", random.Random(0))
        with pytest.raises(ChainError) as info:
            chain.append_block(block)
        assert info.value.reason == "key_rebinding"

    def test_insufficient_work(self):
        chain = Chain(min_nbits=0)
        txs = [registration("alice")]
        digest = data_digest(txs)
        proto = Block(tuple(txs), GENESIS.block_hash, sha256(b"m"), 1, digest, 0, 16, b"")
        nonce = next(n for n in range(1000) if not meets_difficulty(dataclasses.replace(proto, nonce=n).compute_hash(), 16))
        bad = dataclasses.replace(proto, nonce=nonce)
        bad = dataclasses.replace(bad, block_hash=bad.compute_hash())
        with pytest.raises(ChainError) as info:
            chain.append_block(bad)
        assert info.value.reason == "insufficient_work"

    def test_minimum_difficulty_schedule(self):
        chain = build_chain(3, 2)
        assert validate_blocks(chain.blocks, min_nbits=2)[0]
        ok, reason = validate_blocks(chain.blocks, min_nbits=3)
        assert not ok and "difficulty_below_schedule" in reason

    def test_find_tx(self):
        chain = build_chain(4, 2)
        tx = chain.blocks[2].transactions[0]
        assert chain.find_tx(tx.txid) == (2, tx)
        assert chain.find_tx("00") is None


class TestPersistence:
    def test_save_load_roundtrip(self, tmp_path):
        chain = build_chain(5, 6)
        path = tmp_path / "chain.jsonl"
        chain.save(path)
        assert validate_file(path) == (True, "ok")
        loaded = load_chain(path)
        assert loaded.to_lines() == chain.to_lines()

    def test_genesis_constant(self, tmp_path):
        path = tmp_path / "chain.jsonl"
        Chain().save(path)
        assert path.read_text() == GENESIS.to_line() + "\n"
        assert GENESIS.nbits == 0 and GENESIS.prev_hash == bytes(32)

    def test_non_canonical_line_rejected(self, tmp_path):
        chain = build_chain(2, 2)
        path = tmp_path / "chain.jsonl"
        lines = chain.to_lines()
        lines[1] = json.dumps(json.loads(lines[1]), indent=1).replace("\n", "")
        path.write_text("\n".join(lines) + "\n")
        ok, reason = validate_file(path)
        assert not ok and "line 2" in reason

    def test_missing_newline_and_garbage(self, tmp_path):
        path = tmp_path / "chain.jsonl"
        path.write_text(GENESIS.to_line())
        assert not validate_file(path)[0]
        path.write_text(GENESIS.to_line() + "\n{not json\n")
        assert not validate_file(path)[0]

    def test_load_invalid_raises(self, tmp_path):
        path = tmp_path / "chain.jsonl"
        path.write_text("garbage\n")
        with pytest.raises(ChainError):
            load_chain(path)


class TestLedger:
    def test_submit_and_seal(self):
        ledger = Ledger(nbits=4)
        ledger.miners = miners(3)
        assert ledger.submit(registration("alice"))
        assert ledger.submit(contract_call("alice", 1))
        assert not ledger.submit(contract_call("mallory", 1))
        assert ledger.rejected[0][1] == "unknown_sender"
        res = ledger.seal(1)
        assert len(res.block.transactions) == 2
        assert ledger.mempool == [] and ledger.chain.height == 1
        assert ledger.chain.validate()

    def test_per_miner_results(self):
        ledger = Ledger(nbits=4)
        ledger.miners = miners(3)
        extra = {m.node_id: result_msg("good" if i else "bad") for i, m in enumerate(ledger.miners)}
        res = ledger.seal(2, extra)
        assert res.block.transactions[-1].payload["commit"] == "good"

    def test_no_miners(self):
        with pytest.raises(RuntimeError):
            Ledger().seal(0)
