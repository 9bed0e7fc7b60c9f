"""Result consensus: miners confirm a candidate only by re-hashing their own result."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..encoding import sha256
from ..errors import ConsensusError
from .block import Block, build_block, data_digest, header_prefix
from .tx import Transaction


@dataclass
class Miner:
    node_id: bytes  # 32 bytes
    rng: random.Random
    strategy: str = "hybrid"


@dataclass
class Candidate:
    block: Block
    supporters: List[bytes]

    @property
    def key(self) -> Tuple[bytes, int]:
        return self.block.block_hash, self.block.nonce

    @property
    def support(self) -> int:
        return len(self.supporters)


@dataclass
class RoundResult:
    block: Block
    message: Tuple[Transaction, ...]
    candidates: List[Candidate]  # publication order; this is R_PoW
    attempts: Dict[bytes, int] = field(default_factory=dict)
    order: List[bytes] = field(default_factory=list)

    @property
    def support(self) -> int:
        return next(c.support for c in self.candidates if c.block is self.block)

    def result_set(self) -> Dict[Tuple[bytes, int], int]:
        return {c.key: c.support for c in self.candidates}


def _rehash(own_digest: bytes, cand: Block) -> bytes:
    prefix = header_prefix(own_digest, cand.prev_hash, cand.created_at, cand.nbits, cand.creator)
    return sha256(prefix, cand.nonce.to_bytes(8, "big"))


def consensus_round(
    miners: Sequence[Miner],
    messages: Sequence[Sequence[Transaction]],
    prev_hash: bytes,
    nbits: int,
    tick: int,
) -> RoundResult:
    """Run one round; ``messages[i]`` is the result computed by ``miners[i]``.

    Every node first mines its own candidate. Nodes are then processed in
    the order they finish (fewest attempts, then node id). A node compares
    each published candidate against its own result by recomputing the
    candidate's hash over its own data digest; a match adds its support,
    otherwise it publishes its own block. The first candidate backed by a
    strict majority wins.
    """
    if not miners:
        raise ValueError("a round needs at least one miner")
    if len(messages) != len(miners):
        raise ValueError("one message per miner is required")
    ids = [m.node_id for m in miners]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate miner ids")

    mined: List[Tuple[int, bytes, Block, bytes]] = []
    attempts: Dict[bytes, int] = {}
    for miner, msg in zip(miners, messages):
        block, n = build_block(msg, prev_hash, miner.node_id, tick, nbits, miner.strategy, miner.rng)
        attempts[miner.node_id] = n
        mined.append((n, miner.node_id, block, data_digest(msg)))
    mined.sort(key=lambda item: (item[0], item[1]))

    majority = len(miners) // 2 + 1
    candidates: List[Candidate] = []
    winner: Optional[Candidate] = None
    for _, node_id, own_block, own_digest in mined:
        for cand in candidates:
            if _rehash(own_digest, cand.block) == cand.block.block_hash:
                cand.supporters.append(node_id)
                break
        else:
            candidates.append(Candidate(own_block, [node_id]))
        best = _leader(candidates)
        if best.support >= majority:
            winner = best
            break
    order = [item[1] for item in mined]
    if winner is None:
        raise ConsensusError(
            f"no candidate reached {majority} of {len(miners)} supporters",
            {c.key: c.support for c in candidates},
        )
    return RoundResult(winner.block, winner.block.transactions, candidates, attempts, order)


def _leader(candidates: List[Candidate]) -> Candidate:
    # most support, then smallest block hash, then earliest tick
    return min(candidates, key=lambda c: (-c.support, c.block.block_hash, c.block.created_at))
