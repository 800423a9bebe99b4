"""3CNF formulas: DIMACS I/O, evaluation and the brute-force #SAT oracle."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, ParseError, UnsupportedWidthError

DEFAULT_COUNT_BUDGET = 24
_CHUNK_BITS = 20


class Literal(NamedTuple):
    variable: int
    negated: bool = False

    @classmethod
    def from_dimacs(cls, token: int) -> "Literal":
        return cls(abs(token), token < 0)

    def to_dimacs(self) -> int:
        return -self.variable if self.negated else self.variable

    def __invert__(self) -> "Literal":
        return Literal(self.variable, not self.negated)

    def value(self, assignment: Sequence[int]) -> int:
        bit = assignment[self.variable - 1]
        return 1 - bit if self.negated else bit


Clause = tuple[Literal, Literal, Literal]


def _check_clauses(n: int, clauses, kind: str) -> None:
    if n < 1:
        raise ValueError("a formula needs at least one variable")
    if not clauses:
        raise ValueError(f"a 3{kind} needs at least one {'clause' if kind == 'CNF' else 'term'}")
    for c in clauses:
        if len(c) != 3:
            raise ValueError(f"{c!r} does not have exactly three literals")
        for lit in c:
            if not 1 <= lit.variable <= n:
                raise ValueError(f"variable {lit.variable} outside 1..{n}")


@dataclass(frozen=True)
class ThreeCnf:
    n: int
    clauses: tuple[Clause, ...]

    def __post_init__(self):
        _check_clauses(self.n, self.clauses, "CNF")

    @classmethod
    def from_ints(cls, n: int, clauses) -> "ThreeCnf":
        """Build from DIMACS-style integer triples, e.g. ``[(1, -2, 3)]``."""
        return cls(n, tuple(tuple(Literal.from_dimacs(t) for t in c) for c in clauses))

    @property
    def m(self) -> int:
        return len(self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n} {self.m}"]
        lines += [" ".join(str(l.to_dimacs()) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"

    @cached_property
    def _digest(self) -> bytes:
        return hashlib.sha256(self.to_dimacs().encode()).digest()

    def digest(self) -> bytes:
        """SHA-256 of the canonical DIMACS text."""
        return self._digest

    def occurrences(self, variable: int) -> int:
        """Number of literal slots mentioning ``variable``; bounds the degree in it."""
        return sum(lit.variable == variable for c in self.clauses for lit in c)


@dataclass(frozen=True)
class ThreeDnf:
    """A disjunction of 3-literal conjunctive terms."""

    n: int
    terms: tuple[Clause, ...]

    def __post_init__(self):
        _check_clauses(self.n, self.terms, "DNF")

    @property
    def m(self) -> int:
        return len(self.terms)

    def negate(self) -> ThreeCnf:
        """De Morgan: the DNF is a tautology iff this CNF is unsatisfiable."""
        return ThreeCnf(self.n, tuple(tuple(~lit for lit in t) for t in self.terms))

    def to_dimacs(self) -> str:
        lines = [f"p dnf {self.n} {self.m}"]
        lines += [" ".join(str(l.to_dimacs()) for l in t) + " 0" for t in self.terms]
        return "\n".join(lines) + "\n"


def _parse(text: str | bytes, expected_kind: str | None):
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    header = None
    groups: list[list[Literal]] = []
    current: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None:
                raise ParseError("duplicate problem line", lineno)
            if len(parts) != 4 or parts[1] not in ("cnf", "dnf"):
                raise ParseError(f"malformed problem line {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"non-integer in problem line {line!r}", lineno) from None
            if n < 1 or m < 1:
                raise ParseError("need n >= 1 and m >= 1", lineno)
            header = (parts[1], n, m)
            continue
        if header is None:
            raise ParseError("clause before problem line", lineno)
        for tok in line.split():
            try:
                v = int(tok)
            except ValueError:
                raise ParseError(f"bad token {tok!r}", lineno) from None
            if v == 0:
                if not current:
                    raise ParseError("empty clause", lineno)
                if len(current) > 3:
                    raise UnsupportedWidthError(f"clause of width {len(current)}", lineno)
                lits = [Literal.from_dimacs(t) for t, _ in current]
                # l or l == l, so padding keeps the semantics
                lits += [lits[-1]] * (3 - len(lits))
                groups.append(lits)
                current = []
            else:
                if abs(v) > header[1]:
                    raise ParseError(f"variable {abs(v)} out of range 1..{header[1]}", lineno)
                current.append((v, lineno))
    if header is None:
        raise ParseError("missing problem line")
    if current:
        raise ParseError("last clause not terminated by 0", current[-1][1])
    kind, n, m = header
    if len(groups) != m:
        raise ParseError(f"header announces {m} clauses, found {len(groups)}")
    if expected_kind is not None and kind != expected_kind:
        raise ParseError(f"expected a {expected_kind} file, got {kind}")
    body = tuple(tuple(g) for g in groups)
    return ThreeCnf(n, body) if kind == "cnf" else ThreeDnf(n, body)


def parse_dimacs(text: str | bytes) -> ThreeCnf:
    return _parse(text, "cnf")


def parse_dimacs_dnf(text: str | bytes) -> ThreeDnf:
    return _parse(text, "dnf")


def parse_formula(text: str | bytes) -> ThreeCnf | ThreeDnf:
    """Accept either header kind (``p cnf`` or ``p dnf``)."""
    return _parse(text, None)


def serialize_dimacs(phi: ThreeCnf) -> str:
    return phi.to_dimacs()


def eval_cnf(phi: ThreeCnf, assignment: Sequence[int]) -> int:
    if len(assignment) != phi.n:
        raise ValueError(f"assignment has {len(assignment)} bits, formula has {phi.n} variables")
    return int(all(any(lit.value(assignment) for lit in c) for c in phi.clauses))


def count_sat(phi: ThreeCnf, budget: int = DEFAULT_COUNT_BUDGET) -> int:
    """Exact model count by enumerating all 2**n assignments.

    Assignment ``k`` sets variable ``v`` to bit ``v-1`` of ``k``. Enumeration
    is chunked and vectorized; the result does not depend on chunking.
    """
    if phi.n > budget:
        raise CapacityError(f"2^{phi.n} assignments exceed the 2^{budget} budget")
    total = 1 << phi.n
    chunk = min(total, 1 << _CHUNK_BITS)
    count = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, start + chunk, dtype=np.uint64)
        bits = [((idx >> np.uint64(v)) & np.uint64(1)).astype(bool) for v in range(phi.n)]
        sat = np.ones(chunk, dtype=bool)
        for c in phi.clauses:
            clause_true = np.zeros(chunk, dtype=bool)
            for lit in c:
                b = bits[lit.variable - 1]
                clause_true |= ~b if lit.negated else b
            sat &= clause_true
        count += int(np.count_nonzero(sat))
    return count


def random_3cnf(n: int, m: int, seed) -> ThreeCnf:
    """Uniform random 3CNF; each slot picks a variable and a sign independently."""
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    rng = random.Random(seed)
    clauses = tuple(
        tuple(Literal(rng.randint(1, n), bool(rng.getrandbits(1))) for _ in range(3))
        for _ in range(m)
    )
    return ThreeCnf(n, clauses)
