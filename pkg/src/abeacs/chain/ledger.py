"""Mempool plus chain: the single-writer path all transactions go through."""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .block import Chain, KeyRegistry
from .consensus import Miner, RoundResult, consensus_round
from .tx import Transaction


class Ledger:
    def __init__(self, nbits: int = 12, min_nbits: int = 0):
        self.chain = Chain(min_nbits)
        self.nbits = nbits
        self.mempool: List[Transaction] = []
        self.registry = KeyRegistry()
        self.rejected: List[Tuple[Transaction, str]] = []
        self.miners: List[Miner] = []
        self.rounds: List[RoundResult] = []

    def submit(self, tx: Transaction) -> bool:
        """Verify ``tx`` against known keys and queue it; False if rejected."""
        reason = self.registry.check(tx)
        if reason:
            self.rejected.append((tx, reason))
            return False
        self.registry.learn(tx)
        self.mempool.append(tx)
        return True

    def seal(self, tick: int, extra: Optional[Mapping[bytes, Sequence[Transaction]]] = None) -> RoundResult:
        """Run a consensus round over the mempool and append the winning block.

        ``extra[node_id]`` is appended to that miner's message, which is how
        per-node computation results enter a round.
        """
        if not self.miners:
            raise RuntimeError("no miners enrolled")
        pending = list(self.mempool)
        if extra is None:
            messages = [pending for _ in self.miners]
        else:
            missing = [m.node_id.hex() for m in self.miners if m.node_id not in extra]
            if missing:
                raise ValueError(f"no result from miners {missing}")
            messages = [pending + list(extra[m.node_id]) for m in self.miners]
        result = consensus_round(self.miners, messages, self.chain.head.block_hash, self.nbits, tick)
        self.chain.append_block(result.block)
        included = {id(tx) for tx in result.block.transactions}
        self.mempool = [tx for tx in self.mempool if id(tx) not in included]
        self.rounds.append(result)
        return result
