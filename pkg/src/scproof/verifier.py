"""The polynomial-time sum-check verifier and the SC proof system on top of it.

This module must never count models or enumerate assignments: its work per
run is O(n*m) field operations plus one evaluation of the arithmetized
formula. A test enforces that it does not import the #SAT oracle.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence

from .arithmetization import formula_value
from .cnf import ThreeCnf, ThreeDnf
from .errors import CapacityError, ProtocolAbort
from .field import PrimeModulus, draw_residue
from .primality import DEFAULT_CP, PrattCertificate, pratt_verify, protocol_prime_interval
from .unipoly import UnivariatePoly


class Mode(str, Enum):
    PAPER_STRICT = "paper-strict"
    RELAXED = "relaxed"


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ABORT = "abort"


class RejectReason(str, Enum):
    BAD_CERTIFICATE = "bad-certificate"
    PRIME_OUT_OF_RANGE = "prime-out-of-range"
    COEFFICIENT_OVERFLOW = "coefficient-overflow"
    ROUND_SUM_MISMATCH = "round-sum-mismatch"
    FINAL_CHECK_MISMATCH = "final-check-mismatch"


@dataclass
class RoundRecord:
    index: int
    poly: UnivariatePoly
    challenge: int | None = None


@dataclass
class Transcript:
    mode: Mode
    p: int
    certificate_digest: str
    formula_digest: str
    rounds: list[RoundRecord] = field(default_factory=list)
    final_claimed: int | None = None
    final_recomputed: int | None = None
    verdict: Verdict | None = None
    reason: RejectReason | None = None
    reject_round: int | None = None
    abort_code: str | None = None
    abort_detail: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT

    @property
    def reason_label(self) -> str | None:
        if self.reason is RejectReason.ROUND_SUM_MISMATCH:
            return f"{self.reason.value}@{self.reject_round}"
        return self.reason.value if self.reason else None

    def to_dict(self) -> dict:
        width = (self.p.bit_length() + 7) // 8
        enc = lambda v: None if v is None else v.to_bytes(width, "big").hex()
        return {
            "mode": self.mode.value,
            "p": hex(self.p),
            "certificate": self.certificate_digest,
            "formula": self.formula_digest,
            "rounds": [
                {"i": r.index, "poly": r.poly.to_bytes(width).hex(), "challenge": enc(r.challenge)}
                for r in self.rounds
            ],
            "final": None if self.final_claimed is None else {
                "claimed": enc(self.final_claimed),
                "recomputed": enc(self.final_recomputed),
            },
            "verdict": self.verdict.value if self.verdict else None,
            "reason": self.reason_label,
            "abort": None if self.abort_code is None else {
                "code": self.abort_code, "detail": self.abort_detail or ""
            },
        }

    def to_json(self) -> str:
        """Canonical one-line record; identical runs give identical bytes."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def body(self) -> dict:
        """Everything except abort metadata, for local/remote comparisons."""
        d = self.to_dict()
        d.pop("abort")
        return d


def verify_setup(p: int, certificate, n: int, c_p: int = DEFAULT_CP,
                 mode: Mode = Mode.PAPER_STRICT) -> RejectReason | None:
    """None if ``(p, certificate)`` is acceptable for an n-variable formula."""
    if not pratt_verify(certificate) or certificate.prime != p:
        return RejectReason.BAD_CERTIFICATE
    if Mode(mode) is Mode.PAPER_STRICT:
        try:
            lo, hi = protocol_prime_interval(n, c_p)
        except (ValueError, CapacityError):
            return RejectReason.PRIME_OUT_OF_RANGE
        if not lo < p <= hi:
            return RejectReason.PRIME_OUT_OF_RANGE
    elif p <= 1 << n:
        # p <= 2^n lets a satisfiable formula have a model count divisible by p
        return RejectReason.PRIME_OUT_OF_RANGE
    return None


class VerifierSession:
    """One run of the interactive check, fed one prover message at a time.

    ``challenges`` is either an iterator of residues (explicit r) or None, in
    which case ``rng`` draws them. The challenge of the last round is drawn
    but never handed back to the caller.
    """

    def __init__(self, phi: ThreeCnf, p: int, certificate: PrattCertificate | None,
                 mode: Mode = Mode.RELAXED, *, rng: random.Random | None = None,
                 challenges: Iterator[int] | None = None, certificate_digest: str | None = None):
        if rng is None and challenges is None:
            raise ValueError("need an rng or explicit challenges")
        self.phi = phi
        self.p = p
        self.rng = rng
        self.challenges = challenges
        if certificate_digest is None:
            certificate_digest = certificate.digest() if certificate is not None else ""
        self.transcript = Transcript(
            mode=Mode(mode), p=p, certificate_digest=certificate_digest,
            formula_digest=phi.digest().hex(),
        )
        self.expected = 0  # Q_0(a_0) := 0
        self.point: list[int] = []
        self.max_coeffs = 3 * phi.m + 1

    @property
    def round(self) -> int:
        return len(self.transcript.rounds) + 1

    @property
    def done(self) -> bool:
        return self.transcript.verdict is not None

    def _draw(self) -> int:
        if self.challenges is not None:
            return int(next(self.challenges)) % self.p
        return draw_residue(self.rng, self.p)

    def _reject(self, reason: RejectReason, at: int | None = None) -> None:
        self.transcript.verdict = Verdict.REJECT
        self.transcript.reason = reason
        self.transcript.reject_round = at

    def abort(self, code: str, detail: str = "") -> None:
        self.transcript.verdict = Verdict.ABORT
        self.transcript.abort_code = code
        self.transcript.abort_detail = detail

    def receive(self, poly: UnivariatePoly) -> int | None:
        """Check Q_i; return the challenge to send, or None once a verdict exists."""
        if self.done:
            raise ProtocolAbort("protocol-order", "session already decided")
        i = self.round
        record = RoundRecord(i, poly)
        self.transcript.rounds.append(record)
        if poly.p != self.p:
            self.abort("malformed", f"round {i} polynomial over the wrong field")
            return None
        if len(poly.coeffs) > self.max_coeffs:
            self._reject(RejectReason.COEFFICIENT_OVERFLOW, i)
            return None
        if poly.sum_over_bits() != self.expected:
            self._reject(RejectReason.ROUND_SUM_MISMATCH, i)
            return None
        a = self._draw()
        record.challenge = a
        self.point.append(a)
        self.expected = poly(a)
        if i < self.phi.n:
            return a
        actual = formula_value(self.phi, self.point, self.p)
        self.transcript.final_claimed = self.expected
        self.transcript.final_recomputed = actual
        if actual == self.expected:
            self.transcript.verdict = Verdict.ACCEPT
        else:
            self._reject(RejectReason.FINAL_CHECK_MISMATCH, i)
        return None


def run_sumcheck(phi: ThreeCnf, prover, *, rng: random.Random | None = None,
                 challenges: Sequence[int] | None = None, mode: Mode = Mode.RELAXED,
                 c_p: int = DEFAULT_CP, check_setup: bool = True) -> Transcript:
    """Run the n-round interaction against an in-process strategy.

    Any exception raised by the prover (including capacity errors) ends the
    run as an abort, never as a rejection.
    """
    p_mod, cert = prover.setup()
    p = int(p_mod)
    session = VerifierSession(
        phi, p, cert, mode, rng=rng,
        challenges=iter(challenges) if challenges is not None else None,
    )
    if check_setup:
        reason = verify_setup(p, cert, phi.n, c_p, mode)
        if reason is not None:
            session._reject(reason)
            return session.transcript
    sent: list[int] = []
    while not session.done:
        try:
            poly = prover.respond(session.round, sent)
        except Exception as exc:  # noqa: BLE001 - any prover failure is an abort
            session.abort("prover-failure", f"{type(exc).__name__}: {exc}")
            break
        a = session.receive(poly)
        if a is not None:
            sent.append(a)
    return session.transcript


def negated_cnf(formula: ThreeCnf | ThreeDnf) -> ThreeCnf:
    """The CNF whose unsatisfiability is being proven.

    A 3DNF is negated by De Morgan; a 3CNF is taken to be the negation already.
    """
    return formula.negate() if isinstance(formula, ThreeDnf) else formula


def aggregate_verdict(transcripts: Sequence[Transcript]) -> Verdict:
    if any(t.verdict is Verdict.ABORT for t in transcripts):
        return Verdict.ABORT
    if transcripts and all(t.accepted for t in transcripts):
        return Verdict.ACCEPT
    return Verdict.REJECT


def sc_verify(formula: ThreeCnf | ThreeDnf, prover, *, trials: int = 1,
              rng: random.Random | None = None, mode: Mode = Mode.RELAXED,
              c_p: int = DEFAULT_CP) -> tuple[Verdict, list[Transcript]]:
    """Check an SC proof: setup once, then ``trials`` independent runs.

    Acceptance needs every run to accept. A failed setup yields a single
    rejected transcript; an abort stops the remaining trials.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    phi = negated_cnf(formula)
    if prover.phi != phi:
        raise ValueError("prover strategy is bound to a different formula")
    rng = rng or random.SystemRandom()
    p_mod, cert = prover.setup()
    reason = verify_setup(int(p_mod), cert, phi.n, c_p, mode)
    if reason is not None:
        session = VerifierSession(phi, int(p_mod), cert if isinstance(cert, PrattCertificate) else None,
                                  mode, rng=rng)
        session._reject(reason)
        return Verdict.REJECT, [session.transcript]
    transcripts = []
    for _ in range(trials):
        t = run_sumcheck(phi, prover, rng=rng, mode=mode, c_p=c_p, check_setup=False)
        transcripts.append(t)
        if t.verdict is Verdict.ABORT:
            break
    return aggregate_verdict(transcripts), transcripts


@dataclass(frozen=True)
class SoundnessBound:
    paper_bound: Fraction
    degree_bound: Fraction
    paper_within_eighth: bool
    paper_vacuous: bool
    degree_vacuous: bool

    def to_dict(self) -> dict:
        return {
            "paper_bound": str(self.paper_bound),
            "degree_bound": str(self.degree_bound),
            "paper_within_eighth": self.paper_within_eighth,
            "paper_vacuous": self.paper_vacuous,
            "degree_vacuous": self.degree_vacuous,
        }


def soundness_bound(n: int, m: int, p: int) -> SoundnessBound:
    """n*C(2n,3)/p and the degree union bound n*3m/p, both exact."""
    if n < 1:
        raise ValueError("need n >= 1")
    paper = Fraction(n * comb(2 * n, 3), p)
    degree = Fraction(n * 3 * m, p)
    return SoundnessBound(
        paper_bound=paper,
        degree_bound=degree,
        paper_within_eighth=paper <= Fraction(1, 8),
        paper_vacuous=paper > 1,
        degree_vacuous=degree > 1,
    )
