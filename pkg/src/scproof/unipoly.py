"""Univariate polynomials over F_p in coefficient form."""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

from .errors import DegenerateInputError, ModulusMismatchError
from .field import FieldElement, PrimeModulus


def _trim(coeffs: Iterable[int], p: int) -> tuple[int, ...]:
    out = [c % p for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


class UnivariatePoly:
    """Immutable polynomial; ``coeffs[k]`` is the coefficient of X**k.

    Canonical form has no trailing zeros, so the zero polynomial has no
    coefficients at all and equality is plain tuple equality.
    """

    __slots__ = ("coeffs", "p")

    def __init__(self, coeffs: Iterable[int], p: int | PrimeModulus):
        p = int(p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "coeffs", _trim(coeffs, p))

    def __setattr__(self, name, value):
        raise AttributeError("UnivariatePoly is immutable")

    @property
    def degree(self) -> int:
        """-1 for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def coefficients(self) -> list[FieldElement]:
        mod = PrimeModulus(self.p)
        return [FieldElement(c, mod) for c in self.coeffs]

    def __call__(self, x: int) -> int:
        acc = 0
        p = self.p
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % p
        return acc

    def sum_over_bits(self) -> int:
        """Q(0) + Q(1) without two Horner passes."""
        if not self.coeffs:
            return 0
        return (self.coeffs[0] + sum(self.coeffs)) % self.p

    def __eq__(self, other):
        if not isinstance(other, UnivariatePoly):
            return NotImplemented
        return self.p == other.p and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.coeffs, self.p))

    def __repr__(self):
        return f"UnivariatePoly({list(self.coeffs)}, p={self.p})"

    def to_bytes(self, width: int) -> bytes:
        """Varint coefficient count, then fixed-width big-endian coefficients."""
        return encode_varint(len(self.coeffs)) + b"".join(c.to_bytes(width, "big") for c in self.coeffs)

    @classmethod
    def from_bytes(cls, data: bytes, p: int, width: int) -> "UnivariatePoly":
        count, off = decode_varint(data, 0)
        if len(data) != off + count * width:
            raise ValueError("polynomial encoding has the wrong length")
        coeffs = []
        for k in range(count):
            c = int.from_bytes(data[off + k * width : off + (k + 1) * width], "big")
            if c >= p:
                raise ValueError("coefficient not reduced modulo p")
            coeffs.append(c)
        if coeffs and coeffs[-1] == 0:
            raise ValueError("non-canonical polynomial: trailing zero coefficient")
        return cls(coeffs, p)


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, offset: int) -> tuple[int, int]:
    value = shift = 0
    while True:
        if offset >= len(data):
            raise ValueError("truncated varint")
        byte = data[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")


def poly_eval(q: UnivariatePoly, x: FieldElement) -> FieldElement:
    if x.p != q.p:
        raise ModulusMismatchError(f"polynomial over F_{q.p} evaluated at element of F_{x.p}")
    return FieldElement(q(x.residue), x.modulus)


def _lagrange(xs: Sequence[int], ys: Sequence[int], p: int) -> list[int]:
    k = len(xs)
    # master polynomial M(X) = prod (X - x_j), low to high
    master = [1]
    for xj in xs:
        nxt = [0] * (len(master) + 1)
        for d, c in enumerate(master):
            nxt[d + 1] = (nxt[d + 1] + c) % p
            nxt[d] = (nxt[d] - xj * c) % p
        master = nxt
    result = [0] * k
    for j, xj in enumerate(xs):
        if ys[j] == 0:
            continue
        denom = 1
        for l, xl in enumerate(xs):
            if l != j:
                denom = denom * (xj - xl) % p
        scale = ys[j] * pow(denom, -1, p) % p
        # synthetic division M(X) / (X - x_j), high to low
        carry = 0
        for d in range(k, 0, -1):
            carry = (master[d] + carry * xj) % p
            result[d - 1] = (result[d - 1] + scale * carry) % p
    return result


def interpolate(points: Sequence[tuple[FieldElement, FieldElement]]) -> UnivariatePoly:
    """Unique polynomial of degree < len(points) through ``points``."""
    if not points:
        raise ValueError("need at least one point")
    p = points[0][0].p
    for x, y in points:
        if x.p != p or y.p != p:
            raise ModulusMismatchError("interpolation points from different fields")
    xs = [x.residue for x, _ in points]
    if len(set(xs)) != len(xs):
        raise DegenerateInputError("duplicate interpolation node")
    return UnivariatePoly(_lagrange(xs, [y.residue for _, y in points], p), p)


@lru_cache(maxsize=512)
def _consecutive_basis(k: int, p: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Master polynomial and barycentric weights for nodes 0..k-1."""
    master = [1]
    for xj in range(k):
        nxt = [0] * (len(master) + 1)
        for d, c in enumerate(master):
            nxt[d + 1] = (nxt[d + 1] + c) % p
            nxt[d] = (nxt[d] - xj * c) % p
        master = nxt
    # prod_{l != j} (j - l) = j! * (k-1-j)! * (-1)^(k-1-j)
    fact = [1] * k
    for i in range(1, k):
        fact[i] = fact[i - 1] * i % p
    weights = []
    for j in range(k):
        d = fact[j] * fact[k - 1 - j] % p
        if (k - 1 - j) % 2:
            d = -d % p
        weights.append(pow(d, -1, p))
    return tuple(master), tuple(weights)


def interpolate_consecutive(ys: Sequence[int], p: int) -> UnivariatePoly:
    """Interpolate values at nodes 0, 1, ..., len(ys)-1 (needs p >= len(ys))."""
    k = len(ys)
    if k > p:
        raise DegenerateInputError(f"{k} nodes do not fit in F_{p}")
    master, weights = _consecutive_basis(k, p)
    result = [0] * k
    for j in range(k):
        y = ys[j] % p
        if y == 0:
            continue
        scale = y * weights[j] % p
        carry = 0
        for d in range(k, 0, -1):
            carry = (master[d] + carry * j) % p
            result[d - 1] = (result[d - 1] + scale * carry) % p
    return UnivariatePoly(result, p)
