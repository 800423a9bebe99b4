"""Certified primes: generation with known p-1 factorization and Pratt checks.

A Pratt certificate for an odd prime p lists a generator g of F_p^*, the
complete factorization of p-1, and a certificate for every odd prime factor.
Generation never factors a large number. Candidates are built as
``p = 2*q*R + 1`` where ``q`` is a recursively certified prime and ``R`` is
small enough to factor by trial division, so the factorization of ``p - 1``
is known by construction.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from .errors import CapacityError, GenerationError
from .field import PrimeModulus

DEFAULT_CP = 2
DEFAULT_MAX_BITS = 512
# (2n^3+n)^c_p above this many bits is refused outright
MAX_EXPONENT = 1 << 20

_SMALL_LIMIT = 1 << 32
_COFACTOR_BITS = 24


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i, flag in enumerate(sieve) if flag]


_TRIAL_PRIMES = _small_primes(1 << 16)
_MR_FIXED_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


@dataclass(frozen=True)
class PrattCertificate:
    prime: int
    generator: int
    factorization: tuple[tuple[int, int], ...]
    children: tuple["PrattCertificate", ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "prime": hex(self.prime),
            "generator": hex(self.generator),
            "factors": [[hex(q), e] for q, e in self.factorization],
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrattCertificate":
        return cls(
            prime=_parse_int(d["prime"]),
            generator=_parse_int(d["generator"]),
            factorization=tuple((_parse_int(q), int(e)) for q, e in d["factors"]),
            children=tuple(cls.from_dict(c) for c in d["children"]),
        )

    def to_text(self) -> str:
        """Canonical serialization; see docs/formats.md for the grammar."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_text(cls, text: str | bytes) -> "PrattCertificate":
        return cls.from_dict(json.loads(text))

    @cached_property
    def _digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def digest(self) -> str:
        return self._digest

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


def _parse_int(token) -> int:
    if isinstance(token, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(token, int):
        return token
    if isinstance(token, str) and token.startswith("0x"):
        return int(token, 16)
    raise ValueError(f"expected 0x-prefixed hex integer, got {token!r}")


def protocol_prime_interval(n: int, c_p: int = DEFAULT_CP) -> tuple[int, int]:
    """Bounds ``(lo, hi)`` of the half-open interval ``(lo, hi]`` for n variables.

    ``lo = 2**(2n^3+n)`` and ``hi = 2**((2n^3+n)**c_p)``.
    """
    if n < 1 or c_p < 1:
        raise ValueError("need n >= 1 and c_p >= 1")
    base = 2 * n**3 + n
    top = base**c_p
    if top > MAX_EXPONENT:
        raise CapacityError(f"upper exponent {base}^{c_p} exceeds budget {MAX_EXPONENT}")
    if top <= base:
        raise ValueError(f"interval (2^{base}, 2^{top}] is empty for c_p={c_p}")
    return 1 << base, 1 << top


def probable_prime(candidate: int, rounds: int = 40, rng: random.Random | None = None) -> bool:
    """Miller-Rabin with ``rounds`` random bases (error below 4**-rounds)."""
    if candidate < 2:
        return False
    for q in _TRIAL_PRIMES[:64]:
        if candidate == q:
            return True
        if candidate % q == 0:
            return False
    rng = rng or random.Random()
    d, s = candidate - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, candidate - 1)
        if not _mr_round(candidate, a, d, s):
            return False
    return True


def _mr_round(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def _is_prime_small(n: int) -> bool:
    """Deterministic for n < 3.3e24 (fixed base set)."""
    if n < 2:
        return False
    for q in _MR_FIXED_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    return all(_mr_round(n, a, d, s) for a in _MR_FIXED_BASES)


def _trial_factor(n: int) -> dict[int, int]:
    """Full factorization of ``n < 2**32`` by trial division."""
    out: dict[int, int] = {}
    for q in _TRIAL_PRIMES:
        if q * q > n:
            break
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _smallest_generator(p: int, factors) -> int:
    if p == 2:
        return 1
    exps = [(p - 1) // q for q in factors]
    for g in range(2, p):
        if all(pow(g, e, p) != 1 for e in exps):
            return g
    raise GenerationError(f"{p} has no generator; it is not prime")


def _assemble(p: int, factors: dict[int, int], known: dict[int, PrattCertificate]) -> PrattCertificate:
    children = []
    for q in sorted(factors):
        if q == 2:
            continue
        child = known.get(q)
        if child is None:
            child = certify_small_prime(q)
        children.append(child)
    return PrattCertificate(
        prime=p,
        generator=_smallest_generator(p, factors),
        factorization=tuple(sorted(factors.items())),
        children=tuple(children),
    )


@lru_cache(maxsize=4096)
def certify_small_prime(p: int) -> PrattCertificate:
    """Certificate for a prime below 2**32, factoring p-1 by trial division."""
    if p >= _SMALL_LIMIT:
        raise CapacityError(f"{p} is too large to certify by trial division")
    if not _is_prime_small(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        return PrattCertificate(prime=2, generator=1, factorization=())
    return _assemble(p, _trial_factor(p - 1), {})


def pratt_verify(cert) -> bool:
    """True iff ``cert`` is a valid Pratt certificate. Never raises."""
    try:
        return _verify(cert)
    except (TypeError, ValueError, AttributeError, OverflowError, RecursionError):
        return False


def _verify(cert) -> bool:
    if not isinstance(cert, PrattCertificate):
        return False
    p, g = cert.prime, cert.generator
    if type(p) is not int or type(g) is not int or p < 2:
        return False
    if p == 2:
        return cert.factorization == () and cert.children == () and g == 1
    if not 1 <= g < p:
        return False
    product = 1
    seen = set()
    odd = set()
    for entry in cert.factorization:
        q, e = entry
        if type(q) is not int or type(e) is not int or q < 2 or q in seen:
            return False
        if not 1 <= e < p.bit_length():
            return False
        if q % 2 == 0 and q != 2:
            return False
        seen.add(q)
        if q != 2:
            odd.add(q)
        product *= q**e
        if product > p - 1:
            return False
    if product != p - 1:
        return False
    if pow(g, p - 1, p) != 1:
        return False
    if any(pow(g, (p - 1) // q, p) == 1 for q in seen):
        return False
    children = cert.children
    if len(children) != len(odd) or {getattr(c, "prime", None) for c in children} != odd:
        return False
    return all(_verify(c) for c in children)


def _random_small_prime(lo: int, hi: int, rng: random.Random, max_attempts: int) -> int:
    """Random prime in (lo, hi] with hi < 2**32; exhaustive when the range is short."""
    width = hi - lo
    if width <= 0:
        raise GenerationError(f"empty interval ({lo}, {hi}]", 0)
    if width <= 4 * max_attempts:
        candidates = list(range(lo + 1, hi + 1))
        rng.shuffle(candidates)
        for c in candidates:
            if _is_prime_small(c):
                return c
        raise GenerationError(f"no prime in ({lo}, {hi}]", len(candidates))
    for attempt in range(1, max_attempts + 1):
        c = lo + 1 + rng.randrange(width)
        if _is_prime_small(c):
            return c
    raise GenerationError(f"no prime found in ({lo}, {hi}]", max_attempts)


def _generate(lo: int, hi: int, rng: random.Random, max_attempts: int) -> PrattCertificate:
    if hi < _SMALL_LIMIT:
        return certify_small_prime(_random_small_prime(lo, hi, rng, max_attempts))

    # q leaves about 24 bits for R, which trial division factors instantly
    q_bits = max(2, hi.bit_length() - _COFACTOR_BITS)
    attempts = 0
    while attempts < max_attempts:
        q_cert = _generate((1 << (q_bits - 1)) - 1, (1 << q_bits) - 1, rng, max_attempts)
        q = q_cert.prime
        r_lo = (lo - 1) // (2 * q) + 1
        r_hi = min((hi - 1) // (2 * q), _SMALL_LIMIT - 1)
        if r_lo > r_hi:
            raise GenerationError(f"interval ({lo}, {hi}] too narrow for construction", attempts)
        for _ in range(4 * hi.bit_length()):
            attempts += 1
            r = rng.randint(r_lo, r_hi)
            p = 2 * q * r + 1
            if not probable_prime(p, 32, rng):
                continue
            factors = _trial_factor(r)
            factors[2] = factors.get(2, 0) + 1
            factors[q] = factors.get(q, 0) + 1
            cert = _assemble(p, factors, {q: q_cert})
            if pratt_verify(cert):
                return cert
    raise GenerationError(f"could not build a certified prime in ({lo}, {hi}]", attempts)


def generate_certified_prime(
    rng: random.Random,
    bits: int | None = None,
    interval: tuple[int, int] | None = None,
    *,
    max_bits: int = DEFAULT_MAX_BITS,
    max_attempts: int = 20000,
) -> tuple[PrimeModulus, PrattCertificate]:
    """Random prime with a Pratt certificate, of ``bits`` bits or in ``(lo, hi]``.

    For an interval only the lowest octave ``(lo, min(hi, 2*lo)]`` is searched,
    so paper-strict primes are as small as the interval allows.
    """
    if (bits is None) == (interval is None):
        raise ValueError("give exactly one of bits / interval")
    if bits is not None:
        if bits < 2:
            raise ValueError("need at least 2 bits")
        lo, hi = (1 << (bits - 1)) - 1, (1 << bits) - 1
    else:
        lo, hi = interval
        if hi <= lo:
            raise GenerationError(f"empty interval ({lo}, {hi}]", 0)
        hi = min(hi, 2 * lo) if lo >= 2 else hi
    if hi.bit_length() > max_bits:
        raise CapacityError(f"{hi.bit_length()}-bit primes exceed the {max_bits}-bit budget")
    cert = _generate(lo, hi, rng, max_attempts)
    return PrimeModulus(cert.prime, certified=True), cert


class PrimeSource:
    """Deterministic, cached supply of protocol primes keyed by variable count.

    Exactly one of ``bits`` (relaxed mode), ``fixed`` (a given small prime) or
    neither (paper-strict interval with exponent ``c_p``) determines the prime.
    The same seed always yields the same prime for the same ``n``.
    """

    def __init__(self, *, bits: int | None = None, fixed: int | None = None,
                 c_p: int = DEFAULT_CP, seed: int = 0, max_bits: int = DEFAULT_MAX_BITS):
        if bits is not None and fixed is not None:
            raise ValueError("bits and fixed are mutually exclusive")
        self.bits = bits
        self.fixed = fixed
        self.c_p = c_p
        self.seed = seed
        self.max_bits = max_bits
        self._cache: dict[int, tuple[PrimeModulus, PrattCertificate]] = {}

    @property
    def strict(self) -> bool:
        return self.bits is None and self.fixed is None

    def get(self, n: int) -> tuple[PrimeModulus, PrattCertificate]:
        hit = self._cache.get(n)
        if hit is not None:
            return hit
        if self.fixed is not None:
            cert = certify_small_prime(self.fixed)
            out = (PrimeModulus(cert.prime, certified=True), cert)
        else:
            rng = random.Random(f"prime:{self.seed}:{n}:{self.bits}:{self.c_p}")
            if self.bits is not None:
                out = generate_certified_prime(rng, bits=self.bits, max_bits=self.max_bits)
            else:
                out = generate_certified_prime(
                    rng, interval=protocol_prime_interval(n, self.c_p), max_bits=self.max_bits
                )
        self._cache[n] = out
        return out
