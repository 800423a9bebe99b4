"""Command-line entry point.

Exit codes: 0 accept or success, 1 reject or invalid, 2 protocol abort,
3 usage error. Reports go to standard output, one JSON record per line.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
import threading
from pathlib import Path

from . import harness
from .cnf import ThreeDnf, count_sat, parse_formula, random_3cnf
from .errors import CapacityError, GenerationError, ParseError
from .primality import (
    DEFAULT_CP,
    PrattCertificate,
    PrimeSource,
    certify_small_prime,
    generate_certified_prime,
    pratt_verify,
    protocol_prime_interval,
)
from .prover import STRATEGIES, make_prover
from .verifier import Mode, Verdict, negated_cnf, sc_verify, soundness_bound

EXIT_OK, EXIT_REJECT, EXIT_ABORT, EXIT_USAGE = 0, 1, 2, 3
_VERDICT_EXIT = {Verdict.ACCEPT: EXIT_OK, Verdict.REJECT: EXIT_REJECT, Verdict.ABORT: EXIT_ABORT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(record) -> None:
    print(json.dumps(record, sort_keys=True, separators=(",", ":")), flush=True)


def _read_formula(path: str):
    try:
        return parse_formula(Path(path).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _prime_source(args, mode: Mode) -> PrimeSource:
    if mode is Mode.PAPER_STRICT:
        if args.bits is not None:
            raise UsageError("--bits only applies to --mode relaxed")
        return PrimeSource(c_p=args.cp, seed=args.prime_seed, max_bits=args.max_bits)
    return PrimeSource(bits=args.bits or 64, c_p=args.cp, seed=args.prime_seed,
                       max_bits=args.max_bits)


def _rng(seed):
    return random.SystemRandom() if seed is None else random.Random(seed)


def cmd_gen(args) -> int:
    phi = None
    for attempt in range(10_000):
        tag = f"{args.seed}/{attempt}" if args.kind != "any" else args.seed
        phi = random_3cnf(args.n, args.m, tag)
        if args.kind == "any" or (count_sat(phi, args.budget) == 0) == (args.kind == "unsat"):
            break
    else:
        raise UsageError(f"no {args.kind} instance found with n={args.n}, m={args.m}")
    text = phi.to_dimacs()
    if args.dnf:
        text = ThreeDnf(phi.n, tuple(tuple(~l for l in c) for c in phi.clauses)).to_dimacs()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_count(args) -> int:
    formula = _read_formula(args.file)
    phi = negated_cnf(formula)
    try:
        count = count_sat(phi, args.budget)
    except CapacityError as exc:
        raise UsageError(str(exc)) from None
    record = {"n": phi.n, "m": phi.m, "count": count}
    if isinstance(formula, ThreeDnf):
        record["tautology"] = count == 0
    _emit(record)
    return EXIT_OK


def cmd_prime(args) -> int:
    rng = random.Random(args.seed)
    if args.bits is not None:
        modulus, cert = generate_certified_prime(rng, bits=args.bits, max_bits=args.max_bits)
        lo = hi = None
    else:
        if args.n is None:
            raise UsageError("--n is required unless --bits is given")
        lo, hi = protocol_prime_interval(args.n, args.cp)
        modulus, cert = generate_certified_prime(rng, interval=(lo, hi), max_bits=args.max_bits)
    p = modulus.value
    record = {"p": str(p), "bits": p.bit_length(), "certificate": cert.digest(), "seed": args.seed}
    if lo is not None:
        record.update(n=args.n, c_p=args.cp, interval_lo_log2=lo.bit_length() - 1,
                      interval_hi_log2=hi.bit_length() - 1, in_interval=lo < p <= hi)
    if args.n is not None:
        record["bounds"] = soundness_bound(args.n, args.m or 1, p).to_dict()
    if args.cert_out:
        Path(args.cert_out).write_text(cert.to_text() + "\n")
    _emit(record)
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.prime is not None:
        try:
            cert = certify_small_prime(int(args.prime, 0))
        except CapacityError as exc:
            raise UsageError(f"--prime: {exc}; use --bits to generate a large certified prime") from None
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_REJECT
    elif args.bits is not None:
        _, cert = generate_certified_prime(random.Random(args.seed), bits=args.bits,
                                           max_bits=args.max_bits)
    else:
        raise UsageError("give --prime or --bits")
    text = cert.to_text() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check_cert(args) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None
    try:
        cert = PrattCertificate.from_text(text)
        ok = pratt_verify(cert)
    except (ValueError, TypeError, KeyError):
        cert, ok = None, False
    record = {"valid": ok}
    if ok:
        record.update(p=str(cert.prime), bits=cert.prime.bit_length())
    _emit(record)
    return EXIT_OK if ok else EXIT_REJECT


def cmd_serve(args) -> int:
    from .wire import ProverService, serve_prover

    formulas = [negated_cnf(_read_formula(f)) for f in args.files]
    service = ProverService(formulas, kind=args.strategy, seed=args.prover_seed,
                            primes=_prime_source(args, Mode(args.mode)))
    server = serve_prover(args.endpoint, service, background=True)
    _emit({"listening": server.endpoint, "strategy": args.strategy, "formulas": len(formulas)})
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return EXIT_OK


def cmd_verify(args) -> int:
    formula = _read_formula(args.file)
    mode = Mode(args.mode)
    rng = _rng(args.seed)
    if args.remote:
        from .wire import run_remote_verification

        verdict, transcripts = run_remote_verification(
            args.remote, formula, mode=mode, trials=args.trials, rng=rng, c_p=args.cp,
            timeout=args.timeout,
        )
    else:
        phi = negated_cnf(formula)
        modulus, cert = _prime_source(args, mode).get(phi.n)
        prover = make_prover(args.strategy, phi, modulus, cert, seed=args.prover_seed)
        verdict, transcripts = sc_verify(formula, prover, trials=args.trials, rng=rng,
                                         mode=mode, c_p=args.cp)
    if args.transcripts:
        for t in transcripts:
            print(t.to_json())
    last = transcripts[-1]
    record = {"verdict": verdict.value, "mode": mode.value, "c_p": args.cp, "p": hex(last.p),
              "trials": len(transcripts), "seed": args.seed, "reason": last.reason_label}
    if last.abort_code:
        record["abort"] = {"code": last.abort_code, "detail": last.abort_detail}
    phi = negated_cnf(formula)
    if last.p > 1:
        record["bounds"] = soundness_bound(phi.n, phi.m, last.p).to_dict()
    _emit(record)
    return _VERDICT_EXIT[verdict]


def cmd_experiment(args) -> int:
    mode = Mode(args.mode)
    primes = _prime_source(args, mode)
    if args.which == "completeness":
        corpus = harness.unsat_corpus(args.instances, seed=args.seed)
        records = harness.completeness_experiment(corpus, primes, args.trials, seed=args.seed, mode=mode)
        ok = lambda r: r["accepted"] == r["samples"]
    else:
        if args.strategy == "honest":
            raise UsageError("--strategy must be a cheater for the soundness experiment")
        corpus = harness.sat_corpus(args.instances, seed=args.seed)
        records = harness.soundness_experiment(corpus, primes, args.trials, kind=args.strategy,
                                               seed=args.seed, mode=mode)
        ok = lambda r: r["within"]
    good = True
    for r in records:
        _emit(r)
        good &= ok(r)
    return EXIT_OK if good else EXIT_REJECT


def cmd_bench(args) -> int:
    for r in harness.bench(args.n, ratio=args.ratio, runs=args.trials, bits=args.bits or 64,
                           seed=args.seed):
        _emit(r)
    return EXIT_OK


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scproof", description="Sum-check proofs of 3DNF tautologies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def protocol_flags(p, trials_default=1):
        p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.RELAXED.value)
        p.add_argument("--cp", type=_positive, default=DEFAULT_CP, help="interval exponent c_p")
        p.add_argument("--bits", type=_positive, help="relaxed-mode prime size (default 64)")
        p.add_argument("--trials", type=_positive, default=trials_default)
        p.add_argument("--seed", type=int, default=None, help="verifier randomness seed")
        p.add_argument("--prime-seed", type=int, default=0)
        p.add_argument("--max-bits", type=_positive, default=4096, help="largest prime to generate")
        p.add_argument("--prover-seed", type=int, default=0)
        p.add_argument("--strategy", choices=STRATEGIES, default="honest")

    p = sub.add_parser("gen", help="random 3CNF instance")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--m", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=["any", "sat", "unsat"], default="any")
    p.add_argument("--dnf", action="store_true", help="write the negation as a 3DNF")
    p.add_argument("--budget", type=_positive, default=24)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("count", help="exact model count")
    p.add_argument("file")
    p.add_argument("--budget", type=_positive, default=24, help="max variables to enumerate")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("prime", help="certified protocol prime")
    p.add_argument("--n", type=_positive)
    p.add_argument("--m", type=_positive)
    p.add_argument("--cp", type=_positive, default=DEFAULT_CP)
    p.add_argument("--bits", type=_positive)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-bits", type=_positive, default=4096)
    p.add_argument("--cert-out")
    p.set_defaults(func=cmd_prime)

    p = sub.add_parser("certify", help="Pratt certificate for a prime")
    p.add_argument("--prime", help="prime below 2^32 (decimal or 0x hex)")
    p.add_argument("--bits", type=_positive, help="generate a fresh certified prime instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-bits", type=_positive, default=4096)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("check-cert", help="verify a Pratt certificate file")
    p.add_argument("file")
    p.set_defaults(func=cmd_check_cert)

    p = sub.add_parser("serve", help="run a prover server")
    p.add_argument("--endpoint", default="127.0.0.1:0")
    protocol_flags(p)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("verify", help="check an SC proof locally or against a server")
    protocol_flags(p)
    p.add_argument("--remote", metavar="HOST:PORT")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--transcripts", action="store_true", help="print every transcript")
    p.add_argument("file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="completeness or soundness experiment")
    p.add_argument("which", choices=["soundness", "completeness"])
    protocol_flags(p, trials_default=100)
    p.set_defaults(seed=0, strategy="cheat:sum-consistent")
    p.add_argument("--instances", type=_positive, default=10)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="honest prover timing")
    p.add_argument("--n", type=_positive, nargs="+", default=[4, 6, 8, 10])
    p.add_argument("--ratio", type=_positive, default=6)
    p.add_argument("--trials", type=_positive, default=5)
    p.add_argument("--bits", type=_positive, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"scproof {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GenerationError, CapacityError) as exc:
        # on the proving side these mean no proof could be produced at all
        print(f"scproof {args.command}: {exc}", file=sys.stderr)
        return EXIT_ABORT if args.command in ("verify", "serve", "experiment", "bench") else EXIT_REJECT


if __name__ == "__main__":
    sys.exit(main())
