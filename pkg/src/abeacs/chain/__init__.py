"""Lightweight proof-of-work blockchain."""

from .block import (
    GENESIS,
    STRATEGIES,
    Block,
    Chain,
    KeyRegistry,
    MiningResult,
    build_block,
    data_digest,
    load_chain,
    meets_difficulty,
    mine,
    validate_blocks,
    validate_chain,
    validate_file,
    validate_lines,
)
from .consensus import Candidate, Miner, RoundResult, consensus_round
from .tx import NodeKey, Transaction, record, sign_tx, verify_signature, verify_tx

__all__ = [
    "GENESIS",
    "STRATEGIES",
    "Block",
    "Candidate",
    "Chain",
    "KeyRegistry",
    "Miner",
    "MiningResult",
    "NodeKey",
    "RoundResult",
    "Transaction",
    "build_block",
    "consensus_round",
    "data_digest",
    "load_chain",
    "meets_difficulty",
    "mine",
    "record",
    "sign_tx",
    "validate_blocks",
    "validate_chain",
    "validate_file",
    "validate_lines",
    "verify_signature",
    "verify_tx",
]
