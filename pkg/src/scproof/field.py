"""Arithmetic in the prime field F_p with arbitrary-precision p.

`FieldElement` is the public value type. The protocol's hot loops work on
plain ``int`` residues and only wrap results at module boundaries.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ModulusMismatchError


@dataclass(frozen=True)
class PrimeModulus:
    """The characteristic ``p`` of the field.

    ``certified`` records whether primality was established by a Pratt
    certificate rather than a probabilistic test.
    """

    value: int
    certified: bool = False

    def __post_init__(self):
        if not isinstance(self.value, int) or self.value < 2:
            raise ValueError(f"modulus must be an integer >= 2, got {self.value!r}")

    @property
    def bit_length(self) -> int:
        return self.value.bit_length()

    @property
    def byte_width(self) -> int:
        """Fixed width used for field elements on the wire."""
        return (self.value.bit_length() + 7) // 8

    def __call__(self, residue: int) -> "FieldElement":
        return FieldElement(residue, self)

    def __int__(self) -> int:
        return self.value

    def zero(self) -> "FieldElement":
        return FieldElement(0, self)

    def one(self) -> "FieldElement":
        return FieldElement(1, self)


class FieldElement:
    __slots__ = ("residue", "modulus")

    def __init__(self, residue: int, modulus: PrimeModulus | int):
        if not isinstance(modulus, PrimeModulus):
            modulus = PrimeModulus(int(modulus))
        object.__setattr__(self, "modulus", modulus)
        object.__setattr__(self, "residue", int(residue) % modulus.value)

    def __setattr__(self, name, value):
        raise AttributeError("FieldElement is immutable")

    @property
    def p(self) -> int:
        return self.modulus.value

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.modulus.value != self.modulus.value:
                raise ModulusMismatchError(
                    f"cannot combine elements of F_{self.p} and F_{other.p}"
                )
            return other.residue
        if isinstance(other, int):
            return other
        return NotImplemented

    def _new(self, residue: int) -> "FieldElement":
        return FieldElement(residue, self.modulus)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.residue + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.residue - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(o - self.residue)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.residue * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.residue)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * fe_inv(self._new(o))

    def __pow__(self, e: int):
        return fe_pow(self, e)

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.modulus.value == other.modulus.value and self.residue == other.residue
        if isinstance(other, int):
            return self.residue == other % self.modulus.value
        return NotImplemented

    def __hash__(self):
        return hash((self.residue, self.modulus.value))

    def __int__(self):
        return self.residue

    def __index__(self):
        return self.residue

    def __repr__(self):
        return f"FieldElement({self.residue}, p={self.p})"

    def to_bytes(self, width: int | None = None) -> bytes:
        """Big-endian residue; minimal length unless ``width`` is given."""
        if width is None:
            width = max(1, (self.residue.bit_length() + 7) // 8)
        return self.residue.to_bytes(width, "big")

    @classmethod
    def from_bytes(cls, data: bytes, modulus: PrimeModulus) -> "FieldElement":
        value = int.from_bytes(data, "big")
        if value >= modulus.value:
            raise ValueError("encoded residue is not reduced")
        return cls(value, modulus)


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
}


def fe_arith(op: str, a: FieldElement, b: FieldElement | None = None) -> FieldElement:
    """Apply ``op`` in {add, sub, mul, neg}; ``neg`` ignores ``b``."""
    if op == "neg":
        return -a
    if b is None or not isinstance(b, FieldElement):
        raise TypeError(f"{op} needs two field elements")
    if a.modulus.value != b.modulus.value:
        raise ModulusMismatchError(f"cannot combine elements of F_{a.p} and F_{b.p}")
    try:
        return _OPS[op](a, b)
    except KeyError:
        raise ValueError(f"unknown field operation {op!r}") from None


def fe_inv(a: FieldElement) -> FieldElement:
    if a.residue == 0:
        raise ZeroDivisionError("0 has no inverse in F_p")
    return FieldElement(pow(a.residue, -1, a.p), a.modulus)


def fe_pow(a: FieldElement, e: int) -> FieldElement:
    # builtin pow is square-and-multiply and already gives 0**0 == 1
    if e < 0:
        raise ValueError("negative exponent; use fe_inv")
    return FieldElement(pow(a.residue, e, a.p), a.modulus)


def draw_residue(rng: random.Random, p: int) -> int:
    """Uniform residue in [0, p) by rejection on ``bits(p)``-bit draws."""
    bits = p.bit_length()
    while True:
        x = rng.getrandbits(bits)
        if x < p:
            return x


def fe_sample(rng: random.Random, p: PrimeModulus) -> FieldElement:
    return FieldElement(draw_residue(rng, p.value), p)
