"""Experiment drivers: acceptance estimates, seeded corpora and reports.

Every record an experiment emits embeds the mode, c_p, p, seeds and the
soundness bounds, so any number can be reproduced from the record alone.
"""
from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Callable, Iterator, Sequence

from .cnf import ThreeCnf, count_sat, random_3cnf
from .errors import CapacityError
from .primality import DEFAULT_CP, PrimeSource
from .prover import ProverStrategy, make_prover
from .verifier import Mode, run_sumcheck, soundness_bound, verify_setup

DEFAULT_EXHAUSTIVE_BUDGET = 1 << 24


@dataclass(frozen=True)
class MonteCarloResult:
    accepted: int
    samples: int
    rate: float
    low: float
    high: float
    confidence: float

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    spread = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # at 0 or n successes the matching endpoint is exactly 0 or 1
    low = 0.0 if successes == 0 else max(0.0, centre - spread)
    high = 1.0 if successes == trials else min(1.0, centre + spread)
    return low, high


def monte_carlo_acceptance(phi: ThreeCnf, strategy: ProverStrategy, samples: int, seed,
                           *, mode: Mode = Mode.RELAXED, c_p: int = DEFAULT_CP,
                           confidence: float = 0.99) -> MonteCarloResult:
    """Acceptance rate over ``samples`` independent challenge vectors.

    The setup is checked once; a bad setup means every run rejects.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    p_mod, cert = strategy.setup()
    accepted = 0
    if verify_setup(int(p_mod), cert, phi.n, c_p, mode) is None:
        rng = random.Random(seed)
        for _ in range(samples):
            t = run_sumcheck(phi, strategy, rng=rng, mode=mode, check_setup=False)
            accepted += t.accepted
    low, high = wilson_interval(accepted, samples, confidence)
    return MonteCarloResult(accepted, samples, accepted / samples, low, high, confidence)


def exhaustive_acceptance(phi: ThreeCnf, strategy: ProverStrategy, *,
                          mode: Mode = Mode.RELAXED, c_p: int = DEFAULT_CP,
                          budget: int = DEFAULT_EXHAUSTIVE_BUDGET) -> Fraction:
    """Exact acceptance probability: every r in F_p^n, one run each."""
    p_mod, cert = strategy.setup()
    p = int(p_mod)
    total = p**phi.n
    if total > budget:
        raise CapacityError(f"{p}^{phi.n} challenge vectors exceed the budget of {budget}")
    if verify_setup(p, cert, phi.n, c_p, mode) is not None:
        return Fraction(0)
    accepted = 0
    for r in itertools.product(range(p), repeat=phi.n):
        accepted += run_sumcheck(phi, strategy, challenges=r, mode=mode, check_setup=False).accepted
    return Fraction(accepted, total)


def harvest(count: int, *, satisfiable: bool, n_values: Sequence[int],
            clauses: Callable[[int], int], seed: int = 0) -> list[tuple[str, ThreeCnf]]:
    """First ``count`` seeded random 3CNFs with the requested satisfiability.

    Instance k cycles through ``n_values``; the formula seed string returned
    alongside each instance regenerates it with :func:`random_3cnf`.
    """
    found: list[tuple[str, ThreeCnf]] = []
    for j in itertools.count():
        if len(found) == count:
            return found
        n = n_values[len(found) % len(n_values)]
        tag = f"{seed}/{j}"
        phi = random_3cnf(n, clauses(n), tag)
        if (count_sat(phi) > 0) == satisfiable:
            found.append((tag, phi))
        if j > 1000 * count + 1000:
            raise RuntimeError("harvest is not converging; adjust the clause ratio")
    return found


def unsat_corpus(count: int = 100, seed: int = 0) -> list[tuple[str, ThreeCnf]]:
    """UNSAT instances with n in 4..10 and m = 6n (at most 60 clauses)."""
    return harvest(count, satisfiable=False, n_values=range(4, 11),
                   clauses=lambda n: min(60, 6 * n), seed=seed)


def sat_corpus(count: int = 50, seed: int = 0, n_values: Sequence[int] = range(3, 9)) -> list[tuple[str, ThreeCnf]]:
    """Satisfiable instances at clause ratio 4."""
    return harvest(count, satisfiable=True, n_values=n_values, clauses=lambda n: 4 * n, seed=seed)


def _record(kind: str, tag: str, phi: ThreeCnf, strategy: ProverStrategy, mode: Mode,
            c_p: int, seed, **extra) -> dict:
    p = strategy.p
    return {
        "experiment": kind,
        "instance": tag,
        "n": phi.n,
        "m": phi.m,
        "count": count_sat(phi),
        "strategy": strategy.name,
        "mode": Mode(mode).value,
        "c_p": c_p,
        "p": hex(p),
        "seed": seed,
        "bounds": soundness_bound(phi.n, phi.m, p).to_dict(),
        **extra,
    }


def completeness_experiment(corpus: Sequence[tuple[str, ThreeCnf]], primes: PrimeSource,
                            trials: int, seed: int = 0, mode: Mode = Mode.RELAXED) -> Iterator[dict]:
    """Honest prover on UNSAT instances; every run should accept."""
    for k, (tag, phi) in enumerate(corpus):
        modulus, cert = primes.get(phi.n)
        strategy = make_prover("honest", phi, modulus, cert)
        run_seed = f"{seed}/completeness/{k}"
        res = monte_carlo_acceptance(phi, strategy, trials, run_seed, mode=mode, c_p=primes.c_p)
        yield _record("completeness", tag, phi, strategy, mode, primes.c_p, run_seed,
                      samples=res.samples, accepted=res.accepted)


def soundness_experiment(corpus: Sequence[tuple[str, ThreeCnf]], primes: PrimeSource,
                         samples: int, kind: str = "cheat:sum-consistent", seed: int = 0,
                         mode: Mode = Mode.RELAXED) -> Iterator[dict]:
    """A cheater on SAT instances, compared with the degree bound."""
    for k, (tag, phi) in enumerate(corpus):
        modulus, cert = primes.get(phi.n)
        strategy = make_prover(kind, phi, modulus, cert, seed=k)
        run_seed = f"{seed}/soundness/{k}"
        res = monte_carlo_acceptance(phi, strategy, samples, run_seed, mode=mode, c_p=primes.c_p)
        bound = soundness_bound(phi.n, phi.m, strategy.p).degree_bound
        ceiling = float(bound) + 3 * res.half_width
        yield _record("soundness", tag, phi, strategy, mode, primes.c_p, run_seed,
                      samples=res.samples, accepted=res.accepted, rate=res.rate,
                      wilson=[res.low, res.high], ceiling=ceiling, within=res.rate <= ceiling)


def bench(n_values: Sequence[int], ratio: int = 6, runs: int = 5, bits: int = 64,
          seed: int = 0) -> Iterator[dict]:
    """Wall time of honest proving plus verification per formula size."""
    primes = PrimeSource(bits=bits, seed=seed)
    for n in n_values:
        phi = random_3cnf(n, ratio * n, f"bench/{seed}/{n}")
        modulus, cert = primes.get(n)
        rng = random.Random(seed)
        start = time.perf_counter()
        for _ in range(runs):
            prover = make_prover("honest", phi, modulus, cert)
            run_sumcheck(phi, prover, rng=rng, check_setup=False)
        elapsed = (time.perf_counter() - start) / runs
        yield {"experiment": "bench", "n": n, "m": phi.m, "bits": bits, "runs": runs,
               "seconds_per_run": elapsed}


def monte_carlo_record(result: MonteCarloResult) -> dict:
    return asdict(result)
