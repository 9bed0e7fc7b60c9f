"""Arithmetic in the prime field Z_p."""

from __future__ import annotations

import random
from typing import Union

from .errors import ParameterError

IntLike = Union[int, "FieldElement"]


class PrimeField:
    """The integers modulo a prime ``p``.

    Primality is checked once at construction; elements created through
    ``field(value)`` carry a reference back to this object.
    """

    __slots__ = ("p",)

    def __init__(self, p: int):
        from sympy import isprime

        if p < 2 or not isprime(p):
            raise ParameterError(f"modulus {p} is not prime")
        self.p = p

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value, self)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("Zp", self.p))

    def __repr__(self) -> str:
        return f"PrimeField({self.p})"

    def random(self, rng: random.Random, nonzero: bool = True) -> "FieldElement":
        lo = 1 if nonzero else 0
        return FieldElement(rng.randrange(lo, self.p), self)

    @property
    def zero(self) -> "FieldElement":
        return FieldElement(0, self)

    @property
    def one(self) -> "FieldElement":
        return FieldElement(1, self)


class FieldElement:
    __slots__ = ("value", "field")

    def __init__(self, value: int, field: PrimeField):
        self.field = field
        self.value = int(value) % field.p

    def _coerce(self, other: IntLike) -> int:
        if isinstance(other, FieldElement):
            if other.field.p != self.field.p:
                raise ParameterError("field elements have different moduli")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other: IntLike) -> "FieldElement":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement(self.value + v, self.field)

    __radd__ = __add__

    def __sub__(self, other: IntLike) -> "FieldElement":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement(self.value - v, self.field)

    def __rsub__(self, other: IntLike) -> "FieldElement":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement(v - self.value, self.field)

    def __mul__(self, other: IntLike) -> "FieldElement":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return FieldElement(self.value * v, self.field)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value, self.field)

    def inv(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in Z_p")
        return FieldElement(pow(self.value, -1, self.field.p), self.field)

    def __truediv__(self, other: IntLike) -> "FieldElement":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return self * FieldElement(v, self.field).inv()

    def __pow__(self, exponent: int) -> "FieldElement":
        if exponent < 0:
            return self.inv() ** (-exponent)
        return FieldElement(pow(self.value, exponent, self.field.p), self.field)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FieldElement):
            return self.field.p == other.field.p and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.p
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.field.p, self.value))

    def __int__(self) -> int:
        return self.value

    __index__ = __int__

    def __bool__(self) -> bool:
        return self.value != 0

    def __repr__(self) -> str:
        return f"FieldElement({self.value} mod {self.field.p})"
