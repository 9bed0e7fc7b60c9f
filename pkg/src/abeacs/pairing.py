"""Bilinear group abstraction with swappable backends.

Two backends implement the same small interface:

* ``ExponentBackend`` represents every element by its discrete logarithm.
  It is completely insecure and exists so that every protocol identity can
  be checked exactly in tests and simulations.
* ``CurveBackend`` (in :mod:`abeacs.curve`) is a real symmetric pairing on a
  supersingular curve, used for demonstration and benchmarks.

Elements are immutable; the group law is written multiplicatively
(``u * v``, ``u ** k``, ``u / v``).
"""

from __future__ import annotations

import random
from typing import Any, Tuple, Union

from .errors import ParameterError
from .field import FieldElement, PrimeField

EXPONENT_TAG = "exponent-tracking"
CURVE_TAG = "external-pairing"

TEST_PRIME = 1009
BENCH_PRIME = 2**61 - 1

Scalar = Union[int, FieldElement]


class ExponentBackend:
    """Elements of G1 and GT are stored as their logs base g and gT."""

    tag = EXPONENT_TAG

    def __init__(self, p: int):
        self.p = p
        self.width = (p.bit_length() + 7) // 8

    # G1 and GT share one representation
    def g1_gen(self) -> int:
        return 1

    def g1_identity(self) -> int:
        return 0

    def g1_mul(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def g1_inv(self, a: int) -> int:
        return -a % self.p

    def g1_pow(self, a: int, k: int) -> int:
        return a * k % self.p

    gt_gen = g1_gen
    gt_identity = g1_identity
    gt_mul = g1_mul
    gt_inv = g1_inv
    gt_pow = g1_pow

    def pair(self, a: int, b: int) -> int:
        return a * b % self.p

    def g1_encode(self, a: int) -> bytes:
        return a.to_bytes(self.width, "big")

    def g1_decode(self, data: bytes) -> int:
        if len(data) != self.width:
            raise ValueError("bad element length")
        v = int.from_bytes(data, "big")
        if v >= self.p:
            raise ValueError("element out of range")
        return v

    gt_encode = g1_encode
    gt_decode = g1_decode

    def describe(self) -> str:
        return f"{self.tag} p={self.p} g=1 gT=1"


class GroupParams:
    """A bilinear group ``(G1, GT, g, gT, p, e)``."""

    def __init__(self, backend: Any):
        self.backend = backend
        self.p = backend.p
        self.field = PrimeField(backend.p)
        self.g = G1Element(self, backend.g1_gen())
        self.gT = GTElement(self, backend.gt_gen())

    @property
    def tag(self) -> str:
        return self.backend.tag

    @property
    def exponent_tracking(self) -> bool:
        return self.backend.tag == EXPONENT_TAG

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, GroupParams) and self.to_text() == other.to_text()

    def __hash__(self) -> int:
        return hash(self.to_text())

    def __repr__(self) -> str:
        return f"GroupParams({self.to_text()!r})"

    def to_text(self) -> str:
        return self.backend.describe()

    @classmethod
    def from_text(cls, text: str) -> "GroupParams":
        tag, *fields = text.split()
        kv = dict(f.split("=", 1) for f in fields)
        if tag == EXPONENT_TAG:
            if kv.get("g") != "1" or kv.get("gT") != "1":
                raise ParameterError("exponent-tracking generators must have log 1")
            return exponent_params(int(kv["p"]))
        if tag == CURVE_TAG:
            from .curve import CurveBackend

            return cls(CurveBackend.from_fields(kv))
        raise ParameterError(f"unknown backend tag {tag!r}")

    # element construction
    def g1_identity(self) -> "G1Element":
        return G1Element(self, self.backend.g1_identity())

    def gt_identity(self) -> "GTElement":
        return GTElement(self, self.backend.gt_identity())

    def random_scalar(self, rng: random.Random) -> FieldElement:
        return self.field.random(rng)

    def random_gt(self, rng: random.Random) -> "GTElement":
        return self.gT ** rng.randrange(1, self.p)

    def pair(self, u: "G1Element", v: "G1Element") -> "GTElement":
        if u.params is not self and u.params != self:
            raise ParameterError("first pairing argument is from other parameters")
        if v.params is not self and v.params != self:
            raise ParameterError("second pairing argument is from other parameters")
        return GTElement(self, self.backend.pair(u.value, v.value))

    def hash_to_group(self, label: str, rng: random.Random) -> Tuple["G1Element", FieldElement]:
        """Map an attribute label to a fresh random point ``(g^rv, rv)``.

        Repeated queries for one label are answered consistently only by a
        caching registry such as :class:`abeacs.abe.AttributeHash`.
        """
        if not label:
            raise ValueError("attribute label must be non-empty")
        rv = self.field.random(rng)
        return self.g ** rv, rv

    def decode_g1(self, data: bytes) -> "G1Element":
        return G1Element(self, self.backend.g1_decode(data))

    def decode_gt(self, data: bytes) -> "GTElement":
        return GTElement(self, self.backend.gt_decode(data))


def pair(u: "G1Element", v: "G1Element") -> "GTElement":
    return u.params.pair(u, v)


def exponent_params(p: int = TEST_PRIME) -> GroupParams:
    return GroupParams(ExponentBackend(p))


def _scalar(k: Scalar, p: int) -> int:
    if isinstance(k, FieldElement):
        if k.field.p != p:
            raise ParameterError("exponent from a different field")
        return k.value
    return int(k) % p


class _Element:
    __slots__ = ("params", "value")
    _kind = ""

    def __init__(self, params: GroupParams, value: Any):
        self.params = params
        self.value = value

    def _check(self, other: "_Element") -> None:
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.params is not self.params and other.params != self.params:
            raise ParameterError("elements come from different group parameters")

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.params == other.params and self.value == other.value  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash((self._kind, self.value))

    @property
    def log(self) -> int:
        """Discrete log; only the exponent-tracking backend can answer."""
        if not self.params.exponent_tracking:
            raise ParameterError("discrete logs are only visible under the exponent-tracking backend")
        return self.value


class G1Element(_Element):
    __slots__ = ()
    _kind = "G1"

    def __mul__(self, other: "G1Element") -> "G1Element":
        self._check(other)
        return G1Element(self.params, self.params.backend.g1_mul(self.value, other.value))

    def __truediv__(self, other: "G1Element") -> "G1Element":
        self._check(other)
        b = self.params.backend
        return G1Element(self.params, b.g1_mul(self.value, b.g1_inv(other.value)))

    def __pow__(self, k: Scalar) -> "G1Element":
        return G1Element(self.params, self.params.backend.g1_pow(self.value, _scalar(k, self.params.p)))

    def encode(self) -> bytes:
        return self.params.backend.g1_encode(self.value)

    def is_identity(self) -> bool:
        return self.value == self.params.backend.g1_identity()

    def __repr__(self) -> str:
        return f"G1Element({self.encode().hex()})"


class GTElement(_Element):
    __slots__ = ()
    _kind = "GT"

    def __mul__(self, other: "GTElement") -> "GTElement":
        self._check(other)
        return GTElement(self.params, self.params.backend.gt_mul(self.value, other.value))

    def __truediv__(self, other: "GTElement") -> "GTElement":
        self._check(other)
        b = self.params.backend
        return GTElement(self.params, b.gt_mul(self.value, b.gt_inv(other.value)))

    def __pow__(self, k: Scalar) -> "GTElement":
        return GTElement(self.params, self.params.backend.gt_pow(self.value, _scalar(k, self.params.p)))

    def encode(self) -> bytes:
        return self.params.backend.gt_encode(self.value)

    def is_identity(self) -> bool:
        return self.value == self.params.backend.gt_identity()

    def __repr__(self) -> str:
        return f"GTElement({self.encode().hex()})"
