"""Sum-check Merlin-Arthur proofs that a 3DNF is a tautology.

A proof of the tautology phi is a certified prime p together with a prover
strategy that convinces a randomized polynomial-time verifier, through the
sum-check protocol, that the negated 3CNF has zero models.
"""
from .arithmetization import boolean_sum, clause_eval, eval_arith, partial_sum_eval
from .cnf import (
    Literal,
    ThreeCnf,
    ThreeDnf,
    count_sat,
    eval_cnf,
    parse_dimacs,
    parse_dimacs_dnf,
    parse_formula,
    random_3cnf,
    serialize_dimacs,
)
from .errors import (
    CapacityError,
    DegenerateInputError,
    GenerationError,
    ModulusMismatchError,
    ParseError,
    ProtocolAbort,
    SCProofError,
    UnsupportedWidthError,
)
from .field import FieldElement, PrimeModulus, fe_arith, fe_inv, fe_pow, fe_sample
from .harness import exhaustive_acceptance, monte_carlo_acceptance, wilson_interval
from .primality import (
    PrattCertificate,
    PrimeSource,
    certify_small_prime,
    generate_certified_prime,
    pratt_verify,
    probable_prime,
    protocol_prime_interval,
)
from .prover import (
    STRATEGIES,
    HonestProver,
    ProverStrategy,
    RandomPolyCheater,
    SumConsistentCheater,
    cheater_respond,
    honest_respond,
    make_prover,
    optimal_cheat_acceptance,
)
from .unipoly import UnivariatePoly, interpolate, poly_eval
from .verifier import (
    Mode,
    RejectReason,
    Transcript,
    Verdict,
    run_sumcheck,
    sc_verify,
    soundness_bound,
    verify_setup,
)
from .wire import run_remote_verification, serve_prover

eval_P = eval_arith

__version__ = "0.1.0"
