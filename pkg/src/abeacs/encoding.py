"""Canonical byte and JSON encodings used for hashing and persistence."""

from __future__ import annotations

import base64
import hashlib
import json
from typing import Any


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonical_bytes(obj: Any) -> bytes:
    return canonical_json(obj).encode("ascii")


def sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def int_bytes(value: int) -> bytes:
    """Minimal-length big-endian encoding; zero encodes as a single 0x00 byte."""
    if value < 0:
        raise ValueError("negative integers have no canonical encoding")
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def length_prefixed(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)
