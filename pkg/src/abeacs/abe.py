"""Ciphertext-policy ABE with an owner-bound exponent ``h`` and a KEM-DEM wrapper.

Notation (all exponents in Z_p, ``e`` the pairing, ``g`` the G1 generator)::

    PK = (g, g^alpha, g^beta, H)          MK = (g^alpha, beta)

    encrypt:  CT0 = m * e(g,g)^((alpha+h)*s)     C = g^(beta*s)
              per leaf i:  C_i = g^(s_i)         M_i = H(rho(i))^(s_i)

    keygen:   K  = g^((rv+h)/beta)               D = g^(alpha/beta)
              per attribute j:  D_j = g^(rv_j)   A_j = g^rv * H(j)^(rv_j)

    decrypt:  e(C_i, A_j) / e(D_j, M_i) = e(g,g)^(rv*s_i)     when rho(i) = j
              interpolate gate by gate -> e(g,g)^(rv*s)
              m = CT0 * e(g,g)^(rv*s) / (e(K, C) * e(D, C))

``h`` is the exponent of ``H(owner id)`` and binds a ciphertext to the
keys generated for that owner's data.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .encoding import b64, int_bytes, sha256, unb64
from .errors import DecryptionError, InsufficientSharesError, ParameterError
from .field import FieldElement
from .pairing import G1Element, GroupParams, GTElement
from .policy import PolicyMatrix, lagrange_at_zero, policy_id, reconstruct_secret

Attr = Union[str, G1Element]


class AttributeHash:
    """The hash ``H``: attribute label -> random point ``g^rv``, cached.

    Distinct labels always receive distinct exponents, which matters for
    small test primes where random collisions would otherwise merge two
    attributes. The label table is private state of whoever runs the
    registry and is never written to the chain.
    """

    def __init__(self, params: GroupParams, rng: random.Random):
        self.params = params
        self._rng = rng
        self._table: Dict[str, Tuple[G1Element, FieldElement]] = {}
        self._used: set = set()

    def _entry(self, label: str) -> Tuple[G1Element, FieldElement]:
        entry = self._table.get(label)
        if entry is None:
            if len(self._used) >= self.params.p - 1:
                raise ParameterError("attribute universe exceeds the group order")
            while True:
                point, rv = self.params.hash_to_group(label, self._rng)
                if rv.value not in self._used:
                    break
            self._used.add(rv.value)
            entry = self._table[label] = (point, rv)
        return entry

    def point(self, label: str) -> G1Element:
        return self._entry(label)[0]

    def exponent(self, label: str) -> FieldElement:
        return self._entry(label)[1]

    def resolve(self, attr: Attr) -> G1Element:
        return attr if isinstance(attr, G1Element) else self.point(attr)

    def __contains__(self, label: str) -> bool:
        return label in self._table

    def __len__(self) -> int:
        return len(self._table)


@dataclass(frozen=True)
class PublicKey:
    params: GroupParams
    g_alpha: G1Element
    g_beta: G1Element
    H: AttributeHash = field(repr=False, compare=False)


@dataclass(frozen=True)
class MasterKey:
    g_alpha: G1Element
    beta: FieldElement


@dataclass(frozen=True)
class KeyComponent:
    attr: G1Element
    D: G1Element
    A: G1Element


@dataclass
class PrivateKey:
    pk: G1Element
    D: G1Element
    components: List[KeyComponent]

    def __post_init__(self) -> None:
        self._by_attr = {c.attr: c for c in self.components}

    def component(self, attr: G1Element) -> Optional[KeyComponent]:
        return self._by_attr.get(attr)

    @property
    def attrs(self) -> List[G1Element]:
        return [c.attr for c in self.components]


@dataclass
class Ciphertext:
    ct0: GTElement
    c: G1Element
    components: List[Tuple[G1Element, G1Element]]
    shape: PolicyMatrix  # shares zeroed; leaf links hold attribute points
    policy_id: bytes

    def leaf_index(self) -> Dict[Tuple[int, int], int]:
        return {(row, x): i for i, (row, x, _) in enumerate(self.shape.leaf_positions())}

    def to_json(self) -> Dict[str, Any]:
        return {
            "ct0": b64(self.ct0.encode()),
            "c": b64(self.c.encode()),
            "components": [[b64(ci.encode()), b64(mi.encode())] for ci, mi in self.components],
            "shape": self.shape.to_json(encode_attr=lambda pt: b64(pt.encode())),
            "policy_id": self.policy_id.hex(),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: Mapping[str, Any]) -> "Ciphertext":
        g1 = lambda s: params.decode_g1(unb64(s))  # noqa: E731
        return cls(
            ct0=params.decode_gt(unb64(data["ct0"])),
            c=g1(data["c"]),
            components=[(g1(a), g1(b)) for a, b in data["components"]],
            shape=PolicyMatrix.from_json(data["shape"], decode_attr=g1),
            policy_id=bytes.fromhex(data["policy_id"]),
        )


def setup(params: GroupParams, rng: random.Random, H: Optional[AttributeHash] = None) -> Tuple[PublicKey, MasterKey]:
    alpha = params.random_scalar(rng)
    beta = params.random_scalar(rng)
    g_alpha = params.g ** alpha
    if H is None:
        H = AttributeHash(params, random.Random(rng.getrandbits(64)))
    return PublicKey(params, g_alpha, params.g ** beta, H), MasterKey(g_alpha, beta)


def _root_secret(matrix: PolicyMatrix) -> int:
    t, _ = matrix.threshold(0)
    shares = [(x, matrix.share(0, x)) for x in range(1, t + 1)]
    if any(y == 0 for _, y in shares):
        raise ValueError("matrix carries no shares")
    return reconstruct_secret(shares, t, matrix.p).value


def encrypt(pk: PublicKey, m: GTElement, matrix: PolicyMatrix, h: FieldElement) -> Ciphertext:
    params = pk.params
    if matrix.p != params.p:
        raise ParameterError("policy matrix was built over a different field")
    g = params.g
    s = _root_secret(matrix)
    blind = params.pair(pk.g_alpha * g ** h, g) ** s
    components = []
    shape = matrix.shape()
    point_links = []
    for links in matrix.links:
        point_links.append([(k, t if k == "gate" else pk.H.resolve(t)) for k, t in links])
    shape.links = point_links
    for row, x, attr in shape.leaf_positions():
        s_i = matrix.share(row, x)
        components.append((g ** s_i, attr ** s_i))
    return Ciphertext(m * blind, pk.g_beta ** s, components, shape, policy_id(matrix, s))


def keygen(
    pk: PublicKey,
    mk: MasterKey,
    attrs: Iterable[Attr],
    h: FieldElement,
    rng: random.Random,
) -> PrivateKey:
    params = pk.params
    points = []
    for a in attrs:
        pt = pk.H.resolve(a)
        if pt not in points:
            points.append(pt)
    if not points:
        raise ValueError("subject attribute set is empty")
    g = params.g
    rv = params.random_scalar(rng)
    inv_beta = mk.beta.inv()
    # g^(rv+h) is the owner-side share; the division by beta happens at the edge
    owner_part = g ** (rv + h)
    components = []
    g_rv = g ** rv
    for pt in points:
        rv_j = params.random_scalar(rng)
        components.append(KeyComponent(pt, g ** rv_j, g_rv * pt ** rv_j))
    return PrivateKey(owner_part ** inv_beta, mk.g_alpha ** inv_beta, components)


def leaf_share_in_exponent(pk: PublicKey, sk: PrivateKey, ct: Ciphertext, index: int) -> Optional[GTElement]:
    """e(C_i, A_j) / e(D_j, M_i) for leaf ``index``, or None if unmatched."""
    attr = ct.shape.leaf_positions()[index][2]
    comp = sk.component(attr)
    if comp is None:
        return None
    c_i, m_i = ct.components[index]
    pair = pk.params.pair
    return pair(c_i, comp.A) / pair(comp.D, m_i)


def interpolate_in_exponent(shares: Sequence[Tuple[int, GTElement]], t: int) -> GTElement:
    """prod_x share_x ^ lambda_x(0) over the first ``t`` shares."""
    if len(shares) < t:
        raise InsufficientSharesError(f"need {t} shares, got {len(shares)}")
    use = list(shares)[:t]
    xs = [x for x, _ in use]
    if len(set(xs)) != len(xs):
        raise ValueError("duplicate x-coordinates among shares")
    params = use[0][1].params
    lams = lagrange_at_zero(xs, params.p)
    acc = params.gt_identity()
    for lam, (_, v) in zip(lams, use):
        acc = acc * v ** lam
    return acc


def blinding_share(pk: PublicKey, sk: PrivateKey, ct: Ciphertext) -> Optional[GTElement]:
    """e(g,g)^(rv*s) recovered gate by gate, or None if the policy is not met.

    Only the first ``t`` resolvable children of each gate are paired, so an
    OR gate costs one leaf no matter how wide it is.
    """
    shape = ct.shape
    index = ct.leaf_index()

    def gate_value(row: int) -> Optional[GTElement]:
        t, _ = shape.threshold(row)
        vals: List[Tuple[int, GTElement]] = []
        for x, (kind, target) in enumerate(shape.links[row], 1):
            if kind == "gate":
                v = gate_value(target)
            else:
                v = leaf_share_in_exponent(pk, sk, ct, index[(row, x)]) if sk.component(target) else None
            if v is not None:
                vals.append((x, v))
                if len(vals) == t:
                    return interpolate_in_exponent(vals, t)
        return None

    return gate_value(0)


def decrypt(pk: PublicKey, sk: PrivateKey, ct: Ciphertext) -> GTElement:
    """Recover ``m``; on an unsatisfied policy the result is a wrong element.

    When the root cannot be reached the missing factor e(g,g)^(rv*s) is
    replaced by the identity, leaving m * e(g,g)^(-rv*s) != m.
    """
    params = pk.params
    share = blinding_share(pk, sk, ct)
    if share is None:
        share = params.gt_identity()
    denom = params.pair(sk.pk, ct.c) * params.pair(sk.D, ct.c)
    return ct.ct0 * share / denom


# ------------------------------------------------------------------ KEM-DEM


def keystream(key: GTElement, length: int) -> bytes:
    """SHA-256(encode(K) || counter) blocks, counter as 8 big-endian bytes."""
    base = hashlib.sha256(key.encode())
    out = bytearray()
    for i in range((length + 31) // 32):
        h = base.copy()
        h.update(i.to_bytes(8, "big"))
        out += h.digest()
    return bytes(out[:length])


def _xor(data: bytes, ks: bytes) -> bytes:
    if not data:
        return b""
    return (int.from_bytes(data, "big") ^ int.from_bytes(ks, "big")).to_bytes(len(data), "big")


def payload_digest(key: GTElement, payload: bytes) -> bytes:
    return sha256(b"abeacs/payload", key.encode(), payload)


@dataclass
class WrappedPayload:
    header: Ciphertext
    body: bytes
    length: int
    digest: bytes

    def to_json(self) -> Dict[str, Any]:
        return {
            "header": self.header.to_json(),
            "body": b64(self.body),
            "length": self.length,
            "digest": self.digest.hex(),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: Mapping[str, Any]) -> "WrappedPayload":
        return cls(
            header=Ciphertext.from_json(params, data["header"]),
            body=unb64(data["body"]),
            length=int(data["length"]),
            digest=bytes.fromhex(data["digest"]),
        )


def wrap(pk: PublicKey, payload: bytes, matrix: PolicyMatrix, h: FieldElement, rng: random.Random) -> WrappedPayload:
    key = pk.params.random_gt(rng)
    header = encrypt(pk, key, matrix, h)
    body = _xor(payload, keystream(key, len(payload)))
    return WrappedPayload(header, body, len(payload), payload_digest(key, payload))


def unwrap_with_key(pk: PublicKey, sk: PrivateKey, wp: WrappedPayload) -> Tuple[bytes, GTElement]:
    """Like :func:`unwrap` but also returns the recovered session element."""
    key = decrypt(pk, sk, wp.header)
    if len(wp.body) != wp.length:
        raise DecryptionError("body length does not match header")
    payload = _xor(wp.body, keystream(key, wp.length))
    if payload_digest(key, payload) != wp.digest:
        raise DecryptionError("integrity check failed: attributes do not satisfy the policy or data is corrupt")
    return payload, key


def unwrap(pk: PublicKey, sk: PrivateKey, wp: WrappedPayload) -> bytes:
    return unwrap_with_key(pk, sk, wp)[0]
