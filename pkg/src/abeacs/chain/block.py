"""Hash-linked blocks, proof-of-work search and chain validation."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from ..encoding import canonical_bytes, canonical_json, sha256
from ..errors import ChainError, MiningError
from .tx import Transaction, registration_key, verify_tx

STRATEGIES = ("sequential", "random", "hybrid")
NONCE_SPACE = 1 << 64
ZERO32 = bytes(32)


def data_digest(transactions: Sequence[Transaction]) -> bytes:
    return sha256(message_bytes(transactions))


def message_bytes(transactions: Sequence[Transaction]) -> bytes:
    """The block content ``m`` whose SHA-256 is the data digest."""
    return canonical_bytes([tx.to_json() for tx in transactions])


def header_prefix(data: bytes, prev_hash: bytes, created_at: int, nbits: int, creator: bytes) -> bytes:
    # nonce is appended last so mining can reuse the hashed prefix
    return data + prev_hash + created_at.to_bytes(8, "big") + nbits.to_bytes(1, "big") + creator


def meets_difficulty(block_hash: bytes, nbits: int) -> bool:
    if nbits == 0:
        return True
    return int.from_bytes(block_hash[:8], "big") >> (64 - nbits) == 0


@dataclass(frozen=True)
class Block:
    transactions: Tuple[Transaction, ...]
    prev_hash: bytes
    creator: bytes
    created_at: int
    data_digest: bytes
    nonce: int
    nbits: int
    block_hash: bytes

    def prefix(self) -> bytes:
        return header_prefix(self.data_digest, self.prev_hash, self.created_at, self.nbits, self.creator)

    def compute_hash(self) -> bytes:
        return sha256(self.prefix(), self.nonce.to_bytes(8, "big"))

    def to_json(self) -> Dict[str, Any]:
        return {
            "block_hash": self.block_hash.hex(),
            "created_at": self.created_at,
            "creator": self.creator.hex(),
            "data_digest": self.data_digest.hex(),
            "nbits": self.nbits,
            "nonce": self.nonce,
            "prev_hash": self.prev_hash.hex(),
            "transactions": [tx.to_json() for tx in self.transactions],
        }

    def to_line(self) -> str:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Block":
        expected = {"block_hash", "created_at", "creator", "data_digest", "nbits", "nonce", "prev_hash", "transactions"}
        if set(data) != expected:
            raise ValueError(f"unexpected block fields {sorted(data)}")
        for name in ("created_at", "nbits", "nonce"):
            if not isinstance(data[name], int) or isinstance(data[name], bool):
                raise ValueError(f"{name} must be an integer")
        if not 0 <= data["nonce"] < NONCE_SPACE or not 0 <= data["nbits"] <= 255 or data["created_at"] < 0:
            raise ValueError("integer field out of range")

        def h32(name: str) -> bytes:
            raw = bytes.fromhex(data[name])
            if len(raw) != 32:
                raise ValueError(f"{name} must be 32 bytes")
            return raw

        return cls(
            transactions=tuple(Transaction.from_json(t) for t in data["transactions"]),
            prev_hash=h32("prev_hash"),
            creator=h32("creator"),
            created_at=data["created_at"],
            data_digest=h32("data_digest"),
            nonce=data["nonce"],
            nbits=data["nbits"],
            block_hash=h32("block_hash"),
        )

    @classmethod
    def from_line(cls, line: str) -> "Block":
        block = cls.from_json(json.loads(line))
        if block.to_line() != line:
            raise ValueError("line is not in canonical form")
        return block


def _genesis() -> Block:
    digest = data_digest(())
    proto = Block((), ZERO32, ZERO32, 0, digest, 0, 0, b"")
    return replace(proto, block_hash=proto.compute_hash())


GENESIS = _genesis()


@dataclass
class MiningResult:
    nonce: int
    block_hash: bytes
    attempts: int


def mine(prefix: bytes, nbits: int, strategy: str, rng: random.Random, max_attempts: Optional[int] = None) -> MiningResult:
    """Search a nonce so that SHA-256(prefix || nonce) has ``nbits`` leading zeros.

    sequential: 0, 1, 2, ...
    random:     fresh 64-bit nonces, never repeating
    hybrid:     start at 0; after a miss, step +1 if the hash's first bit is
                set, otherwise jump to an unused random nonce
    ``attempts`` counts hash evaluations, including the successful one.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not 0 <= nbits <= 64:
        raise ValueError("nbits must be within 0..64")
    base = hashlib.sha256(prefix)
    shift = 64 - nbits
    limit = max_attempts if max_attempts is not None else NONCE_SPACE
    used: set = set()

    def fresh() -> int:
        while True:
            n = rng.getrandbits(64)
            if n not in used:
                return n

    nonce = fresh() if strategy == "random" else 0
    attempts = 0
    while attempts < limit:
        h = base.copy()
        h.update(nonce.to_bytes(8, "big"))
        digest = h.digest()
        attempts += 1
        if nbits == 0 or int.from_bytes(digest[:8], "big") >> shift == 0:
            return MiningResult(nonce, digest, attempts)
        used.add(nonce)
        if strategy == "sequential":
            nonce += 1
            if nonce >= NONCE_SPACE:
                break
        elif strategy == "random":
            nonce = fresh()
        elif digest[0] & 0x80:
            nonce = (nonce + 1) % NONCE_SPACE
        else:
            nonce = fresh()
    raise MiningError(f"no nonce found after {attempts} attempts")


def build_block(
    transactions: Sequence[Transaction],
    prev_hash: bytes,
    creator: bytes,
    created_at: int,
    nbits: int,
    strategy: str,
    rng: random.Random,
) -> Tuple[Block, int]:
    """Mine a block over ``transactions``; returns the block and attempt count."""
    digest = data_digest(transactions)
    prefix = header_prefix(digest, prev_hash, created_at, nbits, creator)
    res = mine(prefix, nbits, strategy, rng)
    block = Block(tuple(transactions), prev_hash, creator, created_at, digest, res.nonce, nbits, res.block_hash)
    return block, res.attempts


class KeyRegistry:
    """id -> verification key, learned from self-certifying registrations."""

    def __init__(self) -> None:
        self.keys: Dict[str, str] = {}

    def check(self, tx: Transaction) -> Optional[str]:
        """Return a rejection reason, or None if ``tx`` verifies."""
        if tx.is_record:
            return None
        vk = registration_key(tx)
        if vk is not None:
            known = self.keys.get(tx.sender)
            if known is not None and known != vk:
                return "key_rebinding"
            return None if verify_tx(tx, vk) else "bad_signature"
        vk = self.keys.get(tx.sender)
        if vk is None:
            return "unknown_sender"
        return None if verify_tx(tx, vk) else "bad_signature"

    def learn(self, tx: Transaction) -> None:
        vk = registration_key(tx)
        if vk is not None:
            self.keys.setdefault(tx.sender, vk)


def check_block(block: Block, prev: Block, registry: KeyRegistry, min_nbits: int = 0) -> None:
    """Raise ChainError with a reason code unless ``block`` may follow ``prev``."""
    if block.prev_hash != prev.block_hash:
        raise ChainError("broken_link", block.prev_hash.hex())
    if block.created_at < prev.created_at:
        raise ChainError("time_regression", str(block.created_at))
    if block.nbits < min_nbits:
        raise ChainError("difficulty_below_schedule", str(block.nbits))
    if data_digest(block.transactions) != block.data_digest:
        raise ChainError("data_digest_mismatch", block.block_hash.hex())
    if block.compute_hash() != block.block_hash:
        raise ChainError("hash_mismatch", block.block_hash.hex())
    if not meets_difficulty(block.block_hash, block.nbits):
        raise ChainError("insufficient_work", block.block_hash.hex())
    staged = KeyRegistry()
    staged.keys = dict(registry.keys)
    for tx in block.transactions:
        reason = staged.check(tx)
        if reason:
            raise ChainError(reason, tx.txid)
        staged.learn(tx)


class Chain:
    """Append-only block list rooted at the fixed genesis block."""

    def __init__(self, min_nbits: int = 0):
        self.blocks: List[Block] = [GENESIS]
        self.min_nbits = min_nbits
        self.registry = KeyRegistry()

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def append_block(self, block: Block) -> "Chain":
        check_block(block, self.head, self.registry, self.min_nbits)
        for tx in block.transactions:
            self.registry.learn(tx)
        self.blocks.append(block)
        return self

    def transactions(self) -> Iterable[Tuple[int, Transaction]]:
        for height, block in enumerate(self.blocks):
            for tx in block.transactions:
                yield height, tx

    def find_tx(self, txid: str) -> Optional[Tuple[int, Transaction]]:
        for height, tx in self.transactions():
            if tx.txid == txid:
                return height, tx
        return None

    def to_lines(self) -> List[str]:
        return [b.to_line() for b in self.blocks]

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.to_lines()), encoding="ascii")

    def validate(self) -> bool:
        return validate_blocks(self.blocks, self.min_nbits)[0]


def validate_blocks(blocks: Sequence[Block], min_nbits: int = 0) -> Tuple[bool, str]:
    """Walk genesis -> head; returns (ok, reason code)."""
    if not blocks or blocks[0] != GENESIS:
        return False, "bad_genesis"
    registry = KeyRegistry()
    for i in range(1, len(blocks)):
        try:
            check_block(blocks[i], blocks[i - 1], registry, min_nbits)
        except ChainError as exc:
            return False, f"block {i}: {exc.reason}"
        for tx in blocks[i].transactions:
            registry.learn(tx)
    return True, "ok"


def validate_chain(chain: Union[Chain, Sequence[Block]], min_nbits: int = 0) -> bool:
    blocks = chain.blocks if isinstance(chain, Chain) else chain
    return validate_blocks(blocks, min_nbits)[0]


def validate_lines(lines: Sequence[str], min_nbits: int = 0) -> Tuple[bool, str]:
    blocks = []
    for lineno, line in enumerate(lines, 1):
        try:
            blocks.append(Block.from_line(line))
        except (ValueError, KeyError, TypeError) as exc:
            return False, f"line {lineno}: unparsable block ({exc})"
    return validate_blocks(blocks, min_nbits)


def validate_file(path: Union[str, Path], min_nbits: int = 0) -> Tuple[bool, str]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        return False, f"byte {exc.start}: non-ascii data"
    if not text.endswith("\n"):
        return False, "missing trailing newline"
    return validate_lines(text[:-1].split("\n"), min_nbits)


def load_chain(path: Union[str, Path], min_nbits: int = 0) -> Chain:
    ok, reason = validate_file(path, min_nbits)
    if not ok:
        raise ChainError("invalid_chain", reason)
    chain = Chain(min_nbits)
    for line in Path(path).read_text(encoding="ascii").splitlines()[1:]:
        chain.append_block(Block.from_line(line))
    return chain
