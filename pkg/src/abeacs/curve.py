"""Symmetric (Type-1) pairing on the supersingular curve y^2 = x^3 + x.

For a prime ``q = 3 mod 4`` the curve has ``q + 1`` points over F_q and
embedding degree 2. With the distortion map ``(x, y) -> (-x, i*y)`` (where
``i^2 = -1`` in F_q^2) the reduced Tate pairing becomes a symmetric,
non-degenerate map ``G1 x G1 -> GT`` on the order-``p`` subgroup.

The parameters are desk-scale and nothing here is constant-time.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Dict, Optional, Tuple

from .pairing import CURVE_TAG, GroupParams

Point = Optional[Tuple[int, int]]  # None is the point at infinity
Fq2 = Tuple[int, int]  # a + b*i


def find_curve(p: int, start: int = 4) -> Tuple[int, int]:
    """Smallest cofactor ``c`` (a multiple of 4) with ``q = c*p - 1`` prime."""
    from sympy import isprime

    c = start - start % 4 or 4
    while True:
        q = c * p - 1
        if isprime(q):
            return q, c
        c += 4


class CurveBackend:
    tag = CURVE_TAG

    def __init__(self, p: int, q: int, gen: Tuple[int, int]):
        if q % 4 != 3 or (q + 1) % p:
            raise ValueError("need q = 3 mod 4 and p | q + 1")
        self.p = p
        self.q = q
        self.cofactor = (q + 1) // p
        self.width = (q.bit_length() + 7) // 8
        if not self.on_curve(gen):
            raise ValueError("generator is not on the curve")
        self.gen = gen
        if self.g1_pow(gen, p) is not None:
            raise ValueError("generator does not have order p")
        self._gt_gen = self.pair(gen, gen)
        if self._gt_gen == (1, 0):
            raise ValueError("degenerate pairing on generator")
        self._final = (q + 1) // p

    @classmethod
    def for_prime(cls, p: int) -> "CurveBackend":
        q, c = find_curve(p)
        x = 1
        while True:
            rhs = (x * x * x + x) % q
            if rhs and pow(rhs, (q - 1) // 2, q) == 1:
                y = pow(rhs, (q + 1) // 4, q)
                pt = _mul((x, y), c, q)
                if pt is not None:
                    return cls(p, q, pt)
            x += 1

    @classmethod
    def from_fields(cls, kv: Dict[str, str]) -> "CurveBackend":
        return cls(int(kv["p"]), int(kv["q"]), (int(kv["gx"]), int(kv["gy"])))

    def describe(self) -> str:
        gx, gy = self.gen
        return f"{self.tag} p={self.p} q={self.q} gx={gx} gy={gy}"

    def on_curve(self, pt: Point) -> bool:
        if pt is None:
            return True
        x, y = pt
        q = self.q
        return (y * y - x * x * x - x) % q == 0

    # G1
    def g1_gen(self) -> Point:
        return self.gen

    def g1_identity(self) -> Point:
        return None

    def g1_mul(self, a: Point, b: Point) -> Point:
        return _add(a, b, self.q)

    def g1_inv(self, a: Point) -> Point:
        if a is None:
            return None
        return (a[0], -a[1] % self.q)

    def g1_pow(self, a: Point, k: int) -> Point:
        return _mul(a, k % self.p if a is not None else 0, self.q)

    def g1_encode(self, a: Point) -> bytes:
        if a is None:
            return bytes(2 * self.width)
        return a[0].to_bytes(self.width, "big") + a[1].to_bytes(self.width, "big")

    def g1_decode(self, data: bytes) -> Point:
        if len(data) != 2 * self.width:
            raise ValueError("bad point length")
        if not any(data):
            return None
        pt = (int.from_bytes(data[: self.width], "big"), int.from_bytes(data[self.width :], "big"))
        if pt[0] >= self.q or pt[1] >= self.q or not self.on_curve(pt):
            raise ValueError("point not on curve")
        return pt

    # GT (order-p subgroup of F_q^2*)
    def gt_gen(self) -> Fq2:
        return self._gt_gen

    def gt_identity(self) -> Fq2:
        return (1, 0)

    def gt_mul(self, a: Fq2, b: Fq2) -> Fq2:
        return _f2mul(a, b, self.q)

    def gt_inv(self, a: Fq2) -> Fq2:
        # unitary elements: inverse is the conjugate
        return (a[0], -a[1] % self.q)

    def gt_pow(self, a: Fq2, k: int) -> Fq2:
        return _f2pow(a, k % self.p, self.q)

    def gt_encode(self, a: Fq2) -> bytes:
        return a[0].to_bytes(self.width, "big") + a[1].to_bytes(self.width, "big")

    def gt_decode(self, data: bytes) -> Fq2:
        if len(data) != 2 * self.width:
            raise ValueError("bad GT length")
        a = (int.from_bytes(data[: self.width], "big"), int.from_bytes(data[self.width :], "big"))
        if a[0] >= self.q or a[1] >= self.q:
            raise ValueError("GT element out of range")
        return a

    def pair(self, a: Point, b: Point) -> Fq2:
        if a is None or b is None:
            return (1, 0)
        q = self.q
        f = _miller(a, b, self.p, q)
        # f^(q-1) = conj(f) / f, then raise to (q+1)/p
        fc = (f[0], -f[1] % q)
        norm = (f[0] * f[0] + f[1] * f[1]) % q
        ninv = pow(norm, -1, q)
        finv = (f[0] * ninv % q, -f[1] * ninv % q)
        g = _f2mul(fc, finv, q)
        return _f2pow(g, (q + 1) // self.p, q)


def _add(a: Point, b: Point, q: int) -> Point:
    if a is None:
        return b
    if b is None:
        return a
    x1, y1 = a
    x2, y2 = b
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return None
        lam = (3 * x1 * x1 + 1) * pow(2 * y1, -1, q) % q
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, q) % q
    x3 = (lam * lam - x1 - x2) % q
    return (x3, (lam * (x1 - x3) - y1) % q)


def _mul(a: Point, k: int, q: int) -> Point:
    result: Point = None
    addend = a
    while k:
        if k & 1:
            result = _add(result, addend, q)
        addend = _add(addend, addend, q)
        k >>= 1
    return result


def _f2mul(a: Fq2, b: Fq2, q: int) -> Fq2:
    return ((a[0] * b[0] - a[1] * b[1]) % q, (a[0] * b[1] + a[1] * b[0]) % q)


def _f2pow(a: Fq2, k: int, q: int) -> Fq2:
    result = (1, 0)
    base = a
    while k:
        if k & 1:
            result = _f2mul(result, base, q)
        base = _f2mul(base, base, q)
        k >>= 1
    return result


def _miller(P: Tuple[int, int], Q: Tuple[int, int], p: int, q: int) -> Fq2:
    """Miller loop f_{p,P} evaluated at the distorted point (-xQ, i*yQ).

    Vertical-line factors lie in F_q and vanish under the final exponent,
    so they are dropped.
    """
    xq, yq = Q
    xt, yt = P
    f = (1, 0)
    for bit in bin(p)[3:]:
        lam = (3 * xt * xt + 1) * pow(2 * yt, -1, q) % q
        line = ((lam * (xq + xt) - yt) % q, yq)
        f = _f2mul(_f2mul(f, f, q), line, q)
        x3 = (lam * lam - 2 * xt) % q
        yt = (lam * (xt - x3) - yt) % q
        xt = x3
        if bit == "1":
            xp, yp = P
            if xt == xp:
                # T = -P: vertical line, only reached on the final step
                continue
            lam = (yp - yt) * pow(xp - xt, -1, q) % q
            line = ((lam * (xq + xt) - yt) % q, yq)
            f = _f2mul(f, line, q)
            x3 = (lam * lam - xt - xp) % q
            yt = (lam * (xt - x3) - yt) % q
            xt = x3
    return f


# 127-bit group order (2^127 - 1 is prime) with a 256-bit-class base field.
DEMO_PRIME = 2**127 - 1


@lru_cache(maxsize=None)
def curve_params(p: int = DEMO_PRIME) -> GroupParams:
    """Cached pairing group whose G1/GT have prime order ``p``."""
    return GroupParams(CurveBackend.for_prime(p))
