"""Shared builders for chain-level tests."""

import random

from abeacs.chain import Chain, NodeKey, build_block, record, sign_tx
from abeacs.encoding import sha256


def identity(name):
    key = NodeKey.from_rng(random.Random(f"key:{name}"))
    node_id = sha256(name.encode()).hex()
    return node_id, key


def registration(name, tick=0):
    node_id, key = identity(name)
    return sign_tx(key, node_id, {"contract": "REG", "id": node_id, "vk": key.vk}, tick)


def contract_call(name, tick, **fields):
    node_id, key = identity(name)
    return sign_tx(key, node_id, {"contract": "SCPE", "method": "enforce", **fields}, tick)


def build_chain(n_blocks, nbits, seed=0, strategy="hybrid"):
    """A chain of ``n_blocks`` mined blocks mixing registrations, signed calls and records."""
    rng = random.Random(seed)
    chain = Chain()
    creator = sha256(b"miner")
    for height in range(1, n_blocks + 1):
        txs = []
        if height == 1:
            txs = [registration("alice"), registration("bob")]
        else:
            txs.append(contract_call("alice" if height % 2 else "bob", height, object=f"obj{height % 3}"))
            if height % 5 == 0:
                txs.append(record({"contract": "SCED", "method": "decrypt_result", "reference": f"r{height}", "commit": "00"}, height))
        block, _ = build_block(txs, chain.head.block_hash, creator, height, nbits, strategy, rng)
        chain.append_block(block)
    return chain
