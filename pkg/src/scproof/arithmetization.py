"""Arithmetization of a 3CNF over F_p and evaluation of its partial sums.

The polynomial is never expanded. A literal ``x`` contributes the factor
``1 - x`` and ``not x`` contributes ``x``; a clause becomes one minus the
product of its three factors, and the formula is the product over clauses.
On Boolean points this agrees with the formula's truth value.
"""
from __future__ import annotations

import itertools
from collections import Counter
from typing import Sequence

import numpy as np

from .cnf import Clause, ThreeCnf
from .errors import CapacityError, ModulusMismatchError
from .field import FieldElement

DEFAULT_SUFFIX_BUDGET = 24
_CHUNK_BITS = 16


def _residues(point: Sequence[FieldElement]) -> tuple[list[int], FieldElement]:
    if not point:
        raise ValueError("empty evaluation point")
    first = point[0]
    p = first.p
    out = []
    for x in point:
        if x.p != p:
            raise ModulusMismatchError("evaluation point mixes fields")
        out.append(x.residue)
    return out, first


def clause_value(clause: Clause, point: Sequence[int], p: int) -> int:
    prod = 1
    for lit in clause:
        x = point[lit.variable - 1]
        prod = prod * (x if lit.negated else 1 - x) % p
    return (1 - prod) % p


def formula_value(phi: ThreeCnf, point: Sequence[int], p: int) -> int:
    """Integer fast path of :func:`eval_arith`; stops at the first zero clause."""
    acc = 1
    for clause in phi.clauses:
        prod = 1
        for lit in clause:
            x = point[lit.variable - 1]
            prod = prod * (x if lit.negated else 1 - x) % p
        acc = acc * (1 - prod) % p
        if acc == 0:
            return 0
    return acc


def clause_eval(clause: Clause, point: Sequence[FieldElement]) -> FieldElement:
    values, first = _residues(point)
    return FieldElement(clause_value(clause, values, first.p), first.modulus)


def eval_arith(phi: ThreeCnf, point: Sequence[FieldElement]) -> FieldElement:
    if len(point) != phi.n:
        raise ValueError(f"point has {len(point)} coordinates, formula has {phi.n} variables")
    values, first = _residues(point)
    return FieldElement(formula_value(phi, values, first.p), first.modulus)


def partial_sum_eval(
    phi: ThreeCnf,
    prefix: Sequence[FieldElement],
    x_i: FieldElement,
    budget: int = DEFAULT_SUFFIX_BUDGET,
) -> FieldElement:
    """Q_i(x_i): sum of P over every Boolean completion of ``prefix + [x_i]``.

    This is the literal definition, one full evaluation per suffix. The
    prover uses :func:`partial_sum_values`, which must agree with it.
    """
    i = len(prefix) + 1
    if i > phi.n:
        raise ValueError(f"round {i} exceeds n={phi.n}")
    free = phi.n - i
    if free > budget:
        raise CapacityError(f"2^{free} suffixes exceed the 2^{budget} budget")
    head, first = _residues([*prefix, x_i])
    p = first.p
    total = 0
    for suffix in itertools.product((0, 1), repeat=free):
        total += formula_value(phi, head + list(suffix), p)
    return FieldElement(total % p, first.modulus)


def boolean_sum(phi: ThreeCnf, p: int, budget: int = DEFAULT_SUFFIX_BUDGET) -> int:
    """Sum of P over the whole cube; equals the model count mod p."""
    if phi.n > budget:
        raise CapacityError(f"2^{phi.n} points exceed the 2^{budget} budget")
    return sum(formula_value(phi, list(x), p) for x in itertools.product((0, 1), repeat=phi.n)) % p


def partial_sum_values(
    phi: ThreeCnf,
    prefix: Sequence[int],
    xs: Sequence[int],
    p: int,
    budget: int = DEFAULT_SUFFIX_BUDGET,
) -> list[int]:
    """Q_i at every point of ``xs`` at once, exactly, where i = len(prefix)+1.

    Under a Boolean suffix a clause either has a true suffix literal (factor
    1) or is "live" and contributes ``1 - c * T(x_i)``, where ``c`` is the
    product of its prefix factors and ``T`` the product of its x_i factors.
    Suffixes are therefore grouped by their set of live clauses; each group
    is evaluated once with its multiplicity. A live clause with ``c*T == 1``
    identically zeroes the term and drops the suffix.
    """
    n = phi.n
    i = len(prefix) + 1
    if i > n:
        raise ValueError(f"round {i} exceeds n={n}")
    free = n - i
    if free > budget:
        raise CapacityError(f"2^{free} suffixes exceed the 2^{budget} budget")
    xs = [x % p for x in xs]

    killers = []      # (pos_mask, neg_mask) of clauses that vanish when live
    factors = []      # (pos_mask, neg_mask, values-at-xs) of the others
    for clause in phi.clauses:
        const = 1
        x_neg = []
        pos = neg = 0
        for lit in clause:
            v = lit.variable
            if v < i:
                a = prefix[v - 1]
                const = const * (a if lit.negated else 1 - a) % p
            elif v == i:
                x_neg.append(lit.negated)
            else:
                bit = 1 << (v - i - 1)
                if lit.negated:
                    neg |= bit
                else:
                    pos |= bit
        if const == 0 or pos & neg:
            continue  # some literal is always true
        if not x_neg:
            if const == 1:
                killers.append((pos, neg))
                continue
            vals = [(1 - const) % p] * len(xs)
        else:
            vals = []
            for x in xs:
                t = const
                for negated in x_neg:
                    t = t * (x if negated else 1 - x) % p
                vals.append((1 - t) % p)
        factors.append((pos, neg, vals))

    groups: Counter[bytes] = Counter()
    total = 1 << free
    chunk = min(total, 1 << _CHUNK_BITS)
    for start in range(0, total, chunk):
        s = np.arange(start, start + chunk, dtype=np.int64)
        alive = np.ones(chunk, dtype=bool)
        for pos, neg in killers:
            alive &= ~(((s & pos) == 0) & ((s & neg) == neg))
        if not alive.any():
            continue
        s = s[alive]
        if not factors:
            groups[b""] += int(s.size)
            continue
        live = np.empty((len(factors), s.size), dtype=bool)
        for j, (pos, neg, _) in enumerate(factors):
            live[j] = ((s & pos) == 0) & ((s & neg) == neg)
        packed = np.packbits(live, axis=0).T
        keys, counts = np.unique(packed, axis=0, return_counts=True)
        for key, cnt in zip(keys, counts):
            groups[key.tobytes()] += int(cnt)

    out = [0] * len(xs)
    for key, cnt in groups.items():
        if factors:
            mask = np.unpackbits(np.frombuffer(key, dtype=np.uint8), count=len(factors))
            term = [cnt % p] * len(xs)
            for j in np.flatnonzero(mask):
                vals = factors[j][2]
                term = [a * b % p for a, b in zip(term, vals)]
        else:
            term = [cnt % p] * len(xs)
        out = [(a + b) % p for a, b in zip(out, term)]
    return out
