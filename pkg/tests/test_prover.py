import random
from fractions import Fraction

import pytest

from oracles import brute_force_optimal, univariate_arith
from scproof import (
    STRATEGIES,
    CapacityError,
    HonestProver,
    PrimeModulus,
    ThreeCnf,
    cheater_respond,
    count_sat,
    honest_respond,
    make_prover,
    optimal_cheat_acceptance,
    partial_sum_eval,
    random_3cnf,
)
from scproof.prover import best_agreement_weight, tabulate


def test_honest_running_example(running_example):
    q = honest_respond(running_example, 11, 1, [])
    assert (q(0), q(1), q(2)) == (0, 0, 8)
    assert list(q.coeffs) == univariate_arith([(1, 1, 1), (-1, -1, -1)], 11)
    assert q.degree <= 6


def test_honest_q1_sums_to_zero_on_unsat():
    for seed in range(20):
        phi = random_3cnf(5, 40, f"u/{seed}")
        if count_sat(phi):
            continue
        q = honest_respond(phi, 65537, 1, [])
        assert q.sum_over_bits() == 0


def test_honest_last_round_is_the_arithmetization():
    phi = random_3cnf(3, 5, 2)
    p = 101
    mod = PrimeModulus(p)
    q = honest_respond(phi, p, 3, [17, 40])
    from scproof import eval_P
    assert all(q(x) == eval_P(phi, [mod(17), mod(40), mod(x)]).residue for x in range(p))


@pytest.mark.parametrize("nodes", ["tight", "full"])
def test_honest_exactness_at_random_probes(small_field, nodes):
    rng = random.Random(3)
    for k in range(30):
        n = rng.randint(1, 6)
        phi = random_3cnf(n, rng.randint(1, 12), f"h/{k}")
        p = rng.choice([101, 65537, (1 << 61) - 1])
        mod = PrimeModulus(p)
        prover = HonestProver(phi, mod, None, nodes=nodes)
        i = rng.randint(1, n)
        prefix = [rng.randrange(p) for _ in range(i - 1)]
        q = prover.respond(i, prefix)
        assert len(q.coeffs) <= 3 * phi.m + 1
        for _ in range(20):
            x = rng.randrange(p)
            assert q(x) == partial_sum_eval(phi, [mod(a) for a in prefix], mod(x)).residue


def test_tight_and_full_nodes_agree():
    rng = random.Random(9)
    for k in range(20):
        phi = random_3cnf(4, 9, f"nodes/{k}")
        p = rng.choice([13, 101, 65537])
        mod = PrimeModulus(p)
        prefix = [rng.randrange(p) for _ in range(2)]
        tight = HonestProver(phi, mod, None).respond(3, prefix)
        full = HonestProver(phi, mod, None, nodes="full").respond(3, prefix)
        assert tight == full


def test_round_validation(running_example):
    prover = HonestProver(running_example, PrimeModulus(11), None)
    with pytest.raises(ValueError):
        prover.respond(2, [1])
    with pytest.raises(ValueError):
        prover.respond(1, [3])
    with pytest.raises(ValueError):
        HonestProver(running_example, PrimeModulus(11), None, nodes="all")


def test_honest_capacity_error():
    phi = random_3cnf(30, 40, 1)
    with pytest.raises(CapacityError):
        honest_respond(phi, (1 << 61) - 1, 1, [])


def test_sum_consistent_first_round_sums_to_zero():
    for seed in range(30):
        phi = random_3cnf(4, 10, seed)
        q = cheater_respond("sum-consistent", phi, 65537, 1, [], seed)
        assert q.sum_over_bits() == 0
        assert len(q.coeffs) <= 3 * phi.m + 1


def test_sum_consistent_tracks_running_value():
    phi = random_3cnf(5, 10, 4)
    p = 65537
    prover = make_prover("cheat:sum-consistent", phi, PrimeModulus(p), None, seed=3)
    rng = random.Random(0)
    challenges, expected = [], 0
    for i in range(1, 6):
        q = prover.respond(i, challenges)
        assert q.sum_over_bits() == expected
        a = rng.randrange(p)
        expected = q(a)
        challenges.append(a)


def test_random_poly_rarely_passes_round_one():
    phi = random_3cnf(4, 10, 4)
    p = (1 << 64) - 59
    passed = sum(cheater_respond("random", phi, p, 1, [], seed).sum_over_bits() == 0 for seed in range(10_000))
    assert passed <= 10_000 * 10 / p + 1  # at most one stray hit would already be astronomically unlikely
    assert passed == 0


def test_random_poly_has_full_degree_range():
    phi = random_3cnf(3, 4, 0)
    degrees = {cheater_respond("random", phi, 101, 1, [], s).degree for s in range(200)}
    assert max(degrees) == 12 and min(degrees) >= 0


@pytest.mark.parametrize("kind", STRATEGIES)
def test_strategies_are_deterministic(kind):
    phi = random_3cnf(4, 8, 6)
    mod = PrimeModulus(65537)
    a = make_prover(kind, phi, mod, None, seed=5)
    b = make_prover(kind, phi, mod, None, seed=5)
    for i, prefix in [(1, []), (2, [9]), (3, [9, 100]), (2, [10])]:
        assert a.respond(i, prefix).to_bytes(3) == b.respond(i, prefix).to_bytes(3)
        assert a.respond(i, prefix) == a.respond(i, prefix)


def test_cheater_seeds_differ():
    phi = random_3cnf(4, 8, 6)
    assert cheater_respond("random", phi, 65537, 1, [], 1) != cheater_respond("random", phi, 65537, 1, [], 2)


def test_make_prover_rejects_unknown_kind(running_example):
    with pytest.raises(ValueError):
        make_prover("cheat:clever", running_example, PrimeModulus(11), None)


def test_tabulate_replays_strategy():
    phi = ThreeCnf.from_ints(2, [(1, 2, 2), (-1, 2, -2)])
    prover = make_prover("cheat:sum-consistent", phi, PrimeModulus(7), None, seed=1)
    table = tabulate(prover)
    for a in range(7):
        assert table.respond(2, [a]) == prover.respond(2, [a])
    with pytest.raises(CapacityError):
        tabulate(make_prover("honest", random_3cnf(3, 4, 1), PrimeModulus(65537), None))


def test_optimal_running_examples():
    sat = ThreeCnf.from_ints(1, [(1, 1, 1)])
    value = optimal_cheat_acceptance(sat, 11)
    assert value == Fraction(3, 11)
    assert optimal_cheat_acceptance(ThreeCnf.from_ints(1, [(1, 1, 1), (-1, -1, -1)]), 11) == 1
    with pytest.raises(CapacityError):
        optimal_cheat_acceptance(sat, 8209)
    with pytest.raises(CapacityError):
        optimal_cheat_acceptance(random_3cnf(3, 2, 0), 11)


@pytest.mark.parametrize("p,n,clauses", [
    (5, 1, [(1, 1, 1)]),
    (7, 1, [(1, 1, 1)]),
    (3, 1, [(1, 1, 1)]),
    (5, 2, [(1, -2, 2)]),
    (7, 2, [(1, 2, -1)]),
    (7, 2, [(-1, -1, 2)]),
    (5, 1, [(1, 1, 1), (1, -1, 1)]),
    (5, 2, [(1, 2, 2), (-1, -2, -2)]),
    (3, 2, [(1, 2, 2)]),
])
def test_optimal_matches_brute_force(p, n, clauses):
    phi = ThreeCnf.from_ints(n, clauses)
    assert optimal_cheat_acceptance(phi, p) == brute_force_optimal(clauses, n, p)


def test_optimal_is_below_degree_bound():
    for seed in range(40):
        n = 1 + seed % 2
        phi = random_3cnf(n, 1 + seed % 3, seed)
        if count_sat(phi) == 0:
            continue
        for p in (11, 13, 17, 19, 23, 29, 31):
            assert optimal_cheat_acceptance(phi, p) <= Fraction(n * 3 * phi.m, p)


def test_best_agreement_weight_small_cases():
    one = [Fraction(1)] * 5
    # degree 1: a single root, anywhere
    assert best_agreement_weight(one, 1, 5) == 1
    # degree 3 over F_5: three roots avoiding {0,1} together must satisfy g(0)+g(1) != 0
    assert best_agreement_weight(one, 3, 5) == 3
    assert best_agreement_weight(one, 0, 5) == 0
    weights = [Fraction(5), Fraction(5), Fraction(1), Fraction(1), Fraction(1)]
    assert best_agreement_weight(weights, 2, 5) == 6
