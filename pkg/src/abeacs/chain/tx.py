"""ECDSA (secp256k1) node keys and signed transactions."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ..encoding import canonical_bytes, sha256

CURVE = ec.SECP256K1()
# order of the secp256k1 base point
SECP256K1_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
# RFC 6979 nonces keep signatures, and hence replayed chains, byte-identical
_ALG = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)

# Unsigned transactions are only legal for these (contract, method) pairs;
# they are consensus results whose integrity rests on the block hash.
RECORD_METHODS = {("SCED", "decrypt_result")}


class NodeKey:
    """A signing key derived from an explicit secret scalar."""

    def __init__(self, secret: int):
        self._key = ec.derive_private_key(secret, CURVE)
        self.vk = self._key.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint).hex()

    @classmethod
    def from_rng(cls, rng: random.Random) -> "NodeKey":
        return cls(rng.randrange(1, SECP256K1_N))

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message, _ALG)

    def __repr__(self) -> str:
        return f"NodeKey(vk={self.vk[:16]}...)"


def verify_signature(vk_hex: str, message: bytes, signature: bytes) -> bool:
    try:
        key = ec.EllipticCurvePublicKey.from_encoded_point(CURVE, bytes.fromhex(vk_hex))
        key.verify(signature, message, _ALG)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


@dataclass(frozen=True)
class Transaction:
    payload: Dict[str, Any]
    sender: str  # hex id, "" for unsigned consensus records
    timestamp: int
    signature: str  # hex DER

    def signing_bytes(self) -> bytes:
        return canonical_bytes({"payload": self.payload, "sender": self.sender, "timestamp": self.timestamp})

    def to_json(self) -> Dict[str, Any]:
        return {
            "payload": self.payload,
            "sender": self.sender,
            "signature": self.signature,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Transaction":
        if set(data) != {"payload", "sender", "signature", "timestamp"}:
            raise ValueError(f"unexpected transaction fields {sorted(data)}")
        if not isinstance(data["payload"], dict) or not isinstance(data["timestamp"], int):
            raise ValueError("malformed transaction")
        return cls(dict(data["payload"]), str(data["sender"]), data["timestamp"], str(data["signature"]))

    @property
    def txid(self) -> str:
        return sha256(canonical_bytes(self.to_json())).hex()

    @property
    def is_record(self) -> bool:
        return not self.sender and (self.payload.get("contract"), self.payload.get("method")) in RECORD_METHODS


def sign_tx(key: NodeKey, sender: str, payload: Dict[str, Any], timestamp: int) -> Transaction:
    unsigned = Transaction(payload, sender, timestamp, "")
    return Transaction(payload, sender, timestamp, key.sign(unsigned.signing_bytes()).hex())


def verify_tx(tx: Transaction, vk_hex: Optional[str]) -> bool:
    if vk_hex is None or not tx.signature:
        return False
    try:
        sig = bytes.fromhex(tx.signature)
    except ValueError:
        return False
    return verify_signature(vk_hex, tx.signing_bytes(), sig)


def record(payload: Dict[str, Any], timestamp: int) -> Transaction:
    """Unsigned consensus-result record."""
    tx = Transaction(payload, "", timestamp, "")
    if not tx.is_record:
        raise ValueError("only consensus result payloads may be unsigned")
    return tx


def registration_key(tx: Transaction) -> Optional[str]:
    """The verification key a registration transaction binds to its sender."""
    p = tx.payload
    if p.get("contract") == "REG" and p.get("id") == tx.sender and isinstance(p.get("vk"), str):
        return p["vk"]
    return None
