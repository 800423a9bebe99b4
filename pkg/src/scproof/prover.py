"""Prover strategies for the sum-check interaction.

A strategy is a deterministic function of ``(round, challenge prefix)`` for a
fixed formula and prime, which is what lets it stand in for a static
multi-output circuit: querying it twice with the same inputs returns the same
polynomial.

Besides the honest #P prover this module provides two cheaters used by the
soundness experiments and :func:`optimal_cheat_acceptance`, the exact value of
the best possible cheating strategy on tiny fields.
"""
from __future__ import annotations

import hashlib
import itertools
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .arithmetization import partial_sum_values
from .cnf import ThreeCnf, count_sat
from .errors import CapacityError
from .field import PrimeModulus
from .primality import PrattCertificate
from .unipoly import UnivariatePoly, interpolate_consecutive

STRATEGIES = ("honest", "cheat:random", "cheat:sum-consistent")

OPTIMAL_MAX_P = 1 << 13
OPTIMAL_MAX_N = 2


class ProverStrategy:
    name = "abstract"

    def __init__(self, phi: ThreeCnf, modulus: PrimeModulus, certificate: PrattCertificate):
        self.phi = phi
        self.modulus = modulus
        self.certificate = certificate

    @property
    def p(self) -> int:
        return self.modulus.value

    @property
    def max_degree(self) -> int:
        return 3 * self.phi.m

    def setup(self) -> tuple[PrimeModulus, PrattCertificate]:
        return self.modulus, self.certificate

    def respond(self, i: int, challenges: Sequence[int]) -> UnivariatePoly:
        raise NotImplementedError

    def _check_round(self, i: int, challenges: Sequence[int]) -> tuple[int, ...]:
        if not 1 <= i <= self.phi.n:
            raise ValueError(f"round {i} outside 1..{self.phi.n}")
        if len(challenges) != i - 1:
            raise ValueError(f"round {i} needs {i - 1} challenges, got {len(challenges)}")
        return tuple(int(a) % self.p for a in challenges)


class HonestProver(ProverStrategy):
    """Sends the true Q_i, learned by evaluating at 0, 1, ... and interpolating.

    ``nodes="tight"`` uses as many nodes as the degree of Q_i in x_i can
    require (occurrences of x_i, plus one); ``"full"`` uses 3m+1. Both are
    capped at p, where values on all of F_p pin the polynomial down as a
    function, and both return the same canonical polynomial.
    """

    name = "honest"

    def __init__(self, phi, modulus, certificate, nodes: str = "tight"):
        super().__init__(phi, modulus, certificate)
        if nodes not in ("tight", "full"):
            raise ValueError(f"nodes must be 'tight' or 'full', not {nodes!r}")
        self.nodes = nodes
        self._first: UnivariatePoly | None = None

    def node_count(self, i: int) -> int:
        degree = self.phi.occurrences(i) if self.nodes == "tight" else self.max_degree
        return min(degree, self.p - 1) + 1

    def respond(self, i, challenges):
        prefix = self._check_round(i, challenges)
        if i == 1 and self._first is not None:
            return self._first
        k = self.node_count(i)
        values = partial_sum_values(self.phi, prefix, range(k), self.p)
        poly = interpolate_consecutive(values, self.p)
        if i == 1:
            self._first = poly
        return poly


class _ShakeStream:
    """Deterministic residue stream derived from a SHAKE-256 key."""

    def __init__(self, key: bytes, p: int):
        self.key = key
        self.p = p
        self.bits = p.bit_length()
        self.width = (self.bits + 7) // 8
        self.mask = (1 << self.bits) - 1
        self.buf = b""
        self.pos = 0

    def draw(self, count: int) -> list[int]:
        out: list[int] = []
        while len(out) < count:
            need = count - len(out)
            # rejection rate is below 1/2, so twice the need almost always suffices
            chunk = 2 * need + 8
            end = self.pos + chunk * self.width
            if end > len(self.buf):
                self.buf = hashlib.shake_256(self.key).digest(max(64, 2 * end))
            raw = self.buf[self.pos:end]
            self.pos = end
            if self.width <= 8:
                grid = np.zeros((chunk, 8), dtype=np.uint8)
                grid[:, 8 - self.width:] = np.frombuffer(raw, dtype=np.uint8).reshape(chunk, self.width)
                vals = grid.view(">u8").ravel() & np.uint64(self.mask)
                out.extend(vals[vals < np.uint64(self.p)][:need].tolist())
            else:
                for k in range(chunk):
                    x = int.from_bytes(raw[k * self.width:(k + 1) * self.width], "big") & self.mask
                    if x < self.p:
                        out.append(x)
                        if len(out) == count:
                            break
        return out


class _Cheater(ProverStrategy):
    def __init__(self, phi, modulus, certificate, seed: int = 0):
        super().__init__(phi, modulus, certificate)
        self.seed = seed
        self._memo: dict[tuple, UnivariatePoly] = {}

    def _stream(self, i: int, prefix: tuple[int, ...]) -> _ShakeStream:
        key = f"{self.name}|{self.seed}|{self.p}|{i}|{','.join(map(str, prefix))}".encode()
        return _ShakeStream(hashlib.sha256(self.phi.digest() + key).digest(), self.p)

    def respond(self, i, challenges):
        prefix = self._check_round(i, challenges)
        hit = self._memo.get((i, prefix))
        if hit is None:
            if len(self._memo) > 4096:
                self._memo.clear()
            hit = self._memo[(i, prefix)] = self._build(i, prefix)
        return hit

    def _build(self, i: int, prefix: tuple[int, ...]) -> UnivariatePoly:
        raise NotImplementedError


class RandomPolyCheater(_Cheater):
    """Uniformly random polynomial of degree at most 3m every round."""

    name = "cheat:random"

    def _build(self, i, prefix):
        return UnivariatePoly(self._stream(i, prefix).draw(self.max_degree + 1), self.p)


class SumConsistentCheater(_Cheater):
    """Random polynomial whose constant term is fixed so Q(0)+Q(1) hits the
    verifier's running value; it passes every round check by construction."""

    name = "cheat:sum-consistent"

    def expected_sum(self, i: int, prefix: tuple[int, ...]) -> int:
        if i == 1:
            return 0
        previous = self.respond(i - 1, prefix[:-1])
        return previous(prefix[-1])

    def _build(self, i, prefix):
        p = self.p
        coeffs = self._stream(i, prefix).draw(self.max_degree + 1)
        target = self.expected_sum(i, prefix)
        # Q(0) + Q(1) = 2*c0 + sum(c_k for k >= 1)
        rest = sum(coeffs[1:]) % p
        coeffs[0] = (target - rest) * pow(2, -1, p) % p
        return UnivariatePoly(coeffs, p)


class TableProver(ProverStrategy):
    """Strategy given explicitly as a lookup table ``(i, prefix) -> polynomial``."""

    name = "table"

    def __init__(self, phi, modulus, certificate, table: Mapping[tuple, UnivariatePoly]):
        super().__init__(phi, modulus, certificate)
        self.table = dict(table)

    def respond(self, i, challenges):
        prefix = self._check_round(i, challenges)
        try:
            return self.table[(i, prefix)]
        except KeyError:
            raise KeyError(f"no table entry for round {i}, prefix {prefix}") from None


def tabulate(strategy: ProverStrategy, budget: int = 1 << 16) -> TableProver:
    """Materialize every response of ``strategy``; exponential, so tiny fields only."""
    n, p = strategy.phi.n, strategy.p
    entries = sum(p ** (i - 1) for i in range(1, n + 1))
    if entries > budget:
        raise CapacityError(f"{entries} table entries exceed the budget of {budget}")
    table = {}
    for i in range(1, n + 1):
        for prefix in itertools.product(range(p), repeat=i - 1):
            table[(i, prefix)] = strategy.respond(i, prefix)
    return TableProver(strategy.phi, strategy.modulus, strategy.certificate, table)


def make_prover(kind: str, phi: ThreeCnf, modulus: PrimeModulus,
                certificate: PrattCertificate, seed: int = 0) -> ProverStrategy:
    if kind == "honest":
        return HonestProver(phi, modulus, certificate)
    if kind == "cheat:random":
        return RandomPolyCheater(phi, modulus, certificate, seed)
    if kind == "cheat:sum-consistent":
        return SumConsistentCheater(phi, modulus, certificate, seed)
    raise ValueError(f"unknown strategy {kind!r}; choose from {', '.join(STRATEGIES)}")


def honest_respond(phi: ThreeCnf, p: int, i: int, prefix: Sequence[int]) -> UnivariatePoly:
    """One-shot honest response, without constructing a strategy object."""
    return HonestProver(phi, PrimeModulus(p), None).respond(i, prefix)


def cheater_respond(kind: str, phi: ThreeCnf, p: int, i: int,
                    prefix: Sequence[int], seed: int = 0) -> UnivariatePoly:
    return make_prover(f"cheat:{kind}", phi, PrimeModulus(p), None, seed).respond(i, prefix)


# --- exact optimum over all cheating strategies -------------------------------

def _root_pair_sum_nonzero(subset: Sequence[int], p: int) -> bool:
    """For g = prod (X - s): is g(0) + g(1) != 0 mod p?"""
    g0 = g1 = 1
    for s in subset:
        g0 = g0 * (-s) % p
        g1 = g1 * (1 - s) % p
    return (g0 + g1) % p != 0


def best_agreement_weight(weights: Sequence[Fraction], degree: int, p: int) -> Fraction:
    """Max total weight of the root set of a nonzero R, deg R <= ``degree``,
    with R(0) + R(1) != 0.

    ``weights[a]`` is the gain from R vanishing at ``a``. A set S is the root
    set of such an R iff |S| <= degree, S does not contain both 0 and 1, and,
    when S avoids {0, 1} with |S| == degree, the monic polynomial with roots S
    satisfies g(0) + g(1) != 0. Weights are non-negative, so only maximal
    sets matter.
    """
    if degree <= 0:
        return Fraction(0)
    others = sorted(range(2, p), key=lambda a: weights[a], reverse=True)
    top = [weights[a] for a in others]
    best_one = sum(top[: min(degree - 1, p - 2)], Fraction(0))
    best = max(weights[0], weights[1]) + best_one
    if degree > p - 2:
        return max(best, sum(top, Fraction(0)))
    ceiling = sum(top[:degree], Fraction(0))
    if ceiling <= best:
        return best
    if _root_pair_sum_nonzero(others[:degree], p):
        return ceiling
    return max(best, _best_constrained_subset(others, weights, degree, p))


def _best_constrained_subset(elements, weights, size, p) -> Fraction:
    # DP over (count, prod s, prod (1-s)); only reached when the greedy choice fails
    states: dict[tuple[int, int, int], Fraction] = {(0, 1, 1): Fraction(0)}
    for s in elements:
        w = weights[s]
        nxt = dict(states)
        for (cnt, g0, g1), val in states.items():
            if cnt == size:
                continue
            key = (cnt + 1, g0 * (-s) % p, g1 * (1 - s) % p)
            if key not in nxt or nxt[key] < val + w:
                nxt[key] = val + w
        states = nxt
    feasible = [v for (cnt, g0, g1), v in states.items() if cnt == size and (g0 + g1) % p]
    return max(feasible, default=Fraction(0))


def optimal_cheat_acceptance(phi: ThreeCnf, p: int, *, max_p: int = OPTIMAL_MAX_P,
                             max_n: int = OPTIMAL_MAX_N) -> Fraction:
    """Exact maximum acceptance probability over all prover strategies.

    Backward induction on the verifier's running claim. From any state the
    prover either holds a true claim (value 1: continue honestly) or a false
    one. For a false claim the best polynomial Q differs from the true Q_i by
    a nonzero R of degree <= 3m with R(0)+R(1) equal to the error; scaling R
    preserves its roots, so the value of a false claim does not depend on
    which false value was claimed. At each challenge a the continuation is 1
    if R(a) = 0 (the claim becomes true) and the next level's false-claim
    value otherwise, which turns the maximization into
    :func:`best_agreement_weight`. The recursion therefore runs over claims
    (true / false) and challenges, never over raw polynomials.
    """
    if p > max_p or phi.n > max_n:
        raise CapacityError(f"oracle budget is p <= {max_p}, n <= {max_n}")
    if count_sat(phi) % p == 0:
        return Fraction(1)
    degree = 3 * phi.m
    lie_value = Fraction(0)  # after the last round a false claim always fails
    for _ in range(phi.n):
        weights = [1 - lie_value] * p
        lie_value = (p * lie_value + best_agreement_weight(weights, degree, p)) / p
    return lie_value
