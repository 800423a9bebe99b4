"""Independent brute-force oracles used to check the library.

None of these import the code paths they check; they work from definitions.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def sieve(limit: int) -> list[bool]:
    is_p = [True] * limit
    is_p[0] = is_p[1] = False
    for i in range(2, int(limit**0.5) + 1):
        if is_p[i]:
            for j in range(i * i, limit, i):
                is_p[j] = False
    return is_p


def cnf_truth(clauses, assignment) -> int:
    """clauses as DIMACS int triples; assignment a tuple of 0/1."""
    return int(all(any((assignment[abs(t) - 1] == 1) != (t < 0) for t in c) for c in clauses))


def arith_value(clauses, point, p: int) -> int:
    """P_phi(point) straight from the definition: prod over clauses of 1 - prod t(l)."""
    out = 1
    for c in clauses:
        prod = 1
        for t in c:
            x = point[abs(t) - 1]
            prod = prod * (x if t < 0 else 1 - x) % p
        out = out * (1 - prod) % p
    return out


def poly_mul(a, b, p):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = (out[i + j] + x * y) % p
    return out


def trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def univariate_arith(clauses, p):
    """Coefficients of P_phi for n = 1, by multiplying out clause polynomials."""
    out = [1]
    for c in clauses:
        prod = [1]
        for t in c:
            prod = poly_mul(prod, [0, 1] if t < 0 else [1, p - 1], p)
        clause = [(-x) % p for x in prod]
        clause[0] = (clause[0] + 1) % p
        out = poly_mul(out, clause, p)
    return trim(out)


def _all_polys(degree: int, p: int):
    """(coeff matrix, value matrix) for every coefficient vector of length degree+1."""
    coeffs = np.array(list(itertools.product(range(p), repeat=degree + 1)), dtype=np.int64)
    powers = np.array([[pow(a, k, p) for k in range(degree + 1)] for a in range(p)], dtype=np.int64)
    values = (coeffs @ powers.T) % p
    return coeffs, values


def brute_force_optimal(clauses, n: int, p: int) -> Fraction:
    """Max acceptance over every prover strategy, enumerating all polynomials.

    Strategies are arbitrary functions from (round, prefix) to a polynomial of
    at most 3m+1 coefficients; acceptance depends only on polynomial values.
    Supports n in {1, 2}.
    """
    m = len(clauses)
    degree = 3 * m
    _, values = _all_polys(degree, p)
    sums = (values[:, 0] + values[:, 1]) % p

    def best_final(target_row, claim) -> int:
        # last round: count challenges a where Q(a) equals the true value
        ok = sums == claim
        if not ok.any():
            return 0
        return int((values[ok] == target_row).sum(axis=1).max())

    if n == 1:
        target = np.array([arith_value(clauses, (a,), p) for a in range(p)])
        return Fraction(best_final(target, 0), p)
    if n != 2:
        raise ValueError("oracle supports n <= 2")
    best = np.zeros((p, p), dtype=np.int64)  # best[a1][claim] accepted a2 count
    for a1 in range(p):
        target = np.array([arith_value(clauses, (a1, a2), p) for a2 in range(p)])
        for v in range(p):
            best[a1, v] = best_final(target, v)
    first = values[sums == 0]
    totals = best[np.arange(p)[None, :], first].sum(axis=1)
    return Fraction(int(totals.max()), p * p)


def tamper(cert, rng):
    """One seeded single-field mutation of a Pratt certificate.

    Returns (description, mutated certificate). Every mutation breaks an
    invariant: the generator becomes g^q for a prime q | p-1, which has order
    dividing (p-1)/q; factor and multiplicity edits break the product; child
    edits either recurse or swap in a certificate for the wrong prime.
    """
    from dataclasses import replace

    from scproof import certify_small_prime

    kinds = ["generator", "factor", "multiplicity", "prime"]
    if cert.children:
        kinds += ["child", "child-swap", "child-drop"]
    kind = rng.choice(kinds)
    p = cert.prime
    if kind == "generator":
        if p == 2:
            return kind, replace(cert, generator=0)
        q = rng.choice([q for q, _ in cert.factorization])
        return kind, replace(cert, generator=pow(cert.generator, q, p))
    if kind in ("factor", "multiplicity"):
        idx = rng.randrange(len(cert.factorization)) if cert.factorization else None
        if idx is None:
            return kind, replace(cert, factorization=((3, 1),))
        facts = list(cert.factorization)
        q, e = facts[idx]
        if kind == "factor":
            new_q = q + rng.choice([-1, 1, 2, 4]) if q > 2 else 3
            facts[idx] = (new_q, e)
        else:
            facts[idx] = (q, e + rng.choice([-1, 1]) if e > 1 else e + 1)
        return kind, replace(cert, factorization=tuple(facts))
    if kind == "prime":
        return kind, replace(cert, prime=p + rng.choice([2, 4, -2]))
    idx = rng.randrange(len(cert.children))
    children = list(cert.children)
    if kind == "child":
        _, children[idx] = tamper(children[idx], rng)
    elif kind == "child-swap":
        other = children[idx].prime
        swap = next(x for x in (3, 5, 7, 11, 13, 17) if x != other and x not in {c.prime for c in children})
        children[idx] = certify_small_prime(swap)
    else:
        children.pop(idx)
    return kind, replace(cert, children=tuple(children))
