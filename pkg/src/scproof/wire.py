"""Networked prover and verifier over TCP.

Frame layout::

    u32 big-endian length L | u8 tag | payload (L - 1 bytes)

Every payload starts with the u64 session id. Field elements travel as
fixed-width big-endian integers whose width, ceil(bits(p)/8), is fixed by the
Setup message. Message order per session:

    V->P Hello, P->V Setup, P->V RoundPoly(1),
    then V->P Challenge(i), P->V RoundPoly(i+1) for i = 1..n-1,
    then V->P Verdict.

The last challenge is never sent. See docs/formats.md for byte layouts.
"""
from __future__ import annotations

import logging
import random
import secrets
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Mapping

from .cnf import ThreeCnf, ThreeDnf
from .errors import CapacityError, ProtocolAbort
from .primality import DEFAULT_CP, PrattCertificate, PrimeSource
from .prover import STRATEGIES, ProverStrategy, make_prover
from .unipoly import UnivariatePoly, decode_varint, encode_varint
from .verifier import (
    Mode, RejectReason, Transcript, Verdict, VerifierSession, aggregate_verdict,
    negated_cnf, verify_setup,
)

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_MAX_FRAME = 1 << 20
DEFAULT_TIMEOUT = 30.0

TAG_HELLO, TAG_SETUP, TAG_ROUND_POLY, TAG_CHALLENGE, TAG_VERDICT, TAG_ABORT = range(1, 7)

ABORT_CODES = {
    "protocol-order": 1,
    "frame-too-large": 2,
    "version-mismatch": 3,
    "unknown-formula": 4,
    "prover-capacity": 5,
    "malformed": 6,
    "timeout": 7,
    "disconnect": 8,
    "internal": 9,
}
_ABORT_NAMES = {v: k for k, v in ABORT_CODES.items()}

_MODE_CODES = {Mode.PAPER_STRICT: 0, Mode.RELAXED: 1}
_MODES = {v: k for k, v in _MODE_CODES.items()}

REASON_CODES = {None: 0, **{r: k for k, r in enumerate(RejectReason, 1)}}
_REASONS = {v: k for k, v in REASON_CODES.items()}


@dataclass(frozen=True)
class Hello:
    session: int
    version: int
    mode: Mode
    n: int
    m: int
    digest: bytes


@dataclass(frozen=True)
class Setup:
    session: int
    p: int
    certificate: str  # canonical certificate text


@dataclass(frozen=True)
class RoundPoly:
    session: int
    index: int
    coeffs: tuple[int, ...]


@dataclass(frozen=True)
class Challenge:
    session: int
    index: int
    value: int


@dataclass(frozen=True)
class VerdictMsg:
    session: int
    accept: bool
    reason: RejectReason | None = None
    round: int = 0


@dataclass(frozen=True)
class Abort:
    session: int
    code: str
    detail: str = ""


WireMessage = Hello | Setup | RoundPoly | Challenge | VerdictMsg | Abort


def _blob(data: bytes) -> bytes:
    return encode_varint(len(data)) + data


def _read_blob(data: bytes, off: int) -> tuple[bytes, int]:
    size, off = decode_varint(data, off)
    if off + size > len(data):
        raise ValueError("truncated field")
    return data[off : off + size], off + size


def _int_bytes(value: int) -> bytes:
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def encode_message(msg: WireMessage, width: int | None = None) -> bytes:
    """Full frame (length prefix included) for ``msg``."""
    head = struct.pack(">Q", msg.session)
    if isinstance(msg, Hello):
        if len(msg.digest) != 32:
            raise ValueError("formula digest must be 32 bytes")
        tag = TAG_HELLO
        body = head + struct.pack(">BBII", msg.version, _MODE_CODES[Mode(msg.mode)], msg.n, msg.m) + msg.digest
    elif isinstance(msg, Setup):
        tag = TAG_SETUP
        body = head + _blob(_int_bytes(msg.p)) + _blob(msg.certificate.encode())
    elif isinstance(msg, RoundPoly):
        if width is None:
            raise ValueError("RoundPoly needs the session's element width")
        tag = TAG_ROUND_POLY
        body = head + struct.pack(">I", msg.index) + encode_varint(len(msg.coeffs))
        body += b"".join(c.to_bytes(width, "big") for c in msg.coeffs)
    elif isinstance(msg, Challenge):
        if width is None:
            raise ValueError("Challenge needs the session's element width")
        tag = TAG_CHALLENGE
        body = head + struct.pack(">I", msg.index) + msg.value.to_bytes(width, "big")
    elif isinstance(msg, VerdictMsg):
        tag = TAG_VERDICT
        body = head + struct.pack(">BBI", int(msg.accept), REASON_CODES[msg.reason], msg.round)
    elif isinstance(msg, Abort):
        tag = TAG_ABORT
        body = head + struct.pack(">B", ABORT_CODES[msg.code]) + _blob(msg.detail.encode())
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    return struct.pack(">IB", len(body) + 1, tag) + body


def decode_message(frame: bytes, width: int | None = None) -> WireMessage:
    """Inverse of :func:`encode_message` for the part after the length prefix."""
    try:
        return _decode(frame, width)
    except (ValueError, KeyError, struct.error, UnicodeDecodeError) as exc:
        raise ProtocolAbort("malformed", str(exc)) from None


def _decode(frame: bytes, width: int | None) -> WireMessage:
    if len(frame) < 9:
        raise ValueError("frame too short")
    tag = frame[0]
    (session,) = struct.unpack_from(">Q", frame, 1)
    off = 9
    if tag == TAG_HELLO:
        version, mode, n, m = struct.unpack_from(">BBII", frame, off)
        digest = frame[off + 10 :]
        if len(digest) != 32:
            raise ValueError("bad digest length")
        return Hello(session, version, _MODES[mode], n, m, digest)
    if tag == TAG_SETUP:
        p_raw, off = _read_blob(frame, off)
        cert, off = _read_blob(frame, off)
        if off != len(frame):
            raise ValueError("trailing bytes in Setup")
        return Setup(session, int.from_bytes(p_raw, "big"), cert.decode())
    if tag in (TAG_ROUND_POLY, TAG_CHALLENGE) and width is None:
        raise ValueError("element width unknown before Setup")
    if tag == TAG_ROUND_POLY:
        (index,) = struct.unpack_from(">I", frame, off)
        count, off = decode_varint(frame, off + 4)
        if len(frame) != off + count * width:
            raise ValueError("RoundPoly length does not match coefficient count")
        coeffs = tuple(
            int.from_bytes(frame[off + k * width : off + (k + 1) * width], "big") for k in range(count)
        )
        return RoundPoly(session, index, coeffs)
    if tag == TAG_CHALLENGE:
        (index,) = struct.unpack_from(">I", frame, off)
        raw = frame[off + 4 :]
        if len(raw) != width:
            raise ValueError("Challenge has the wrong element width")
        return Challenge(session, index, int.from_bytes(raw, "big"))
    if tag == TAG_VERDICT:
        accept, reason, rnd = struct.unpack_from(">BBI", frame, off)
        if off + 6 != len(frame) or accept > 1:
            raise ValueError("bad Verdict")
        return VerdictMsg(session, bool(accept), _REASONS[reason], rnd)
    if tag == TAG_ABORT:
        (code,) = struct.unpack_from(">B", frame, off)
        detail, end = _read_blob(frame, off + 1)
        if end != len(frame):
            raise ValueError("trailing bytes in Abort")
        return Abort(session, _ABORT_NAMES[code], detail.decode())
    raise ValueError(f"unknown tag {tag}")


class FramedSocket:
    """Blocking frame reader/writer over a connected socket."""

    def __init__(self, sock: socket.socket, max_frame: int = DEFAULT_MAX_FRAME):
        self.sock = sock
        self.max_frame = max_frame
        self.width: int | None = None

    def send(self, msg: WireMessage) -> None:
        self.sock.sendall(encode_message(msg, self.width))

    def _read_exact(self, size: int) -> bytes:
        chunks = []
        while size:
            chunk = self.sock.recv(min(size, 1 << 16))
            if not chunk:
                raise ProtocolAbort("disconnect", "peer closed the connection")
            chunks.append(chunk)
            size -= len(chunk)
        return b"".join(chunks)

    def recv(self) -> WireMessage:
        try:
            (length,) = struct.unpack(">I", self._read_exact(4))
            if length > self.max_frame:
                raise ProtocolAbort("frame-too-large", f"{length} > {self.max_frame} bytes")
            if length == 0:
                raise ProtocolAbort("malformed", "empty frame")
            return decode_message(self._read_exact(length), self.width)
        except socket.timeout:
            raise ProtocolAbort("timeout", "peer did not answer in time") from None
        except OSError as exc:
            raise ProtocolAbort("disconnect", str(exc)) from None


# --- prover side ---------------------------------------------------------------

class ProverService:
    """What a prover server knows: formulas by digest, a strategy kind and a prime source."""

    def __init__(self, formulas: Mapping[bytes, ThreeCnf] | Iterable[ThreeCnf], kind: str = "honest",
                 seed: int = 0, primes: PrimeSource | None = None):
        if not isinstance(formulas, Mapping):
            formulas = {phi.digest(): phi for phi in formulas}
        self.formulas = dict(formulas)
        self.kind = kind
        self.seed = seed
        self.primes = primes or PrimeSource(bits=64, seed=seed)
        self._strategies: dict[bytes, ProverStrategy] = {}
        self._lock = threading.Lock()
        if kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {kind!r}; choose from {', '.join(STRATEGIES)}")

    def strategy(self, digest: bytes) -> ProverStrategy:
        with self._lock:
            hit = self._strategies.get(digest)
            if hit is None:
                phi = self.formulas[digest]
                modulus, cert = self.primes.get(phi.n)
                hit = self._strategies[digest] = make_prover(self.kind, phi, modulus, cert, self.seed)
            return hit


class _ProverHandler(socketserver.BaseRequestHandler):
    def handle(self):
        service: ProverService = self.server.service
        chan = FramedSocket(self.request, self.server.max_frame)
        self.session = 0
        try:
            self._run(service, chan)
        except ProtocolAbort as exc:
            if exc.code not in ("disconnect", "timeout"):
                self._try_abort(chan, self.session, exc.code, exc.detail)
        except Exception as exc:  # noqa: BLE001 - report and drop the session
            log.exception("prover session failed")
            self._try_abort(chan, self.session, "internal", str(exc))

    @staticmethod
    def _try_abort(chan, session, code, detail):
        try:
            chan.send(Abort(session, code, detail))
        except OSError:
            pass

    def _run(self, service: ProverService, chan: FramedSocket) -> None:
        hello = chan.recv()
        if not isinstance(hello, Hello):
            raise ProtocolAbort("protocol-order", "expected Hello")
        session = self.session = hello.session
        if hello.version != PROTOCOL_VERSION:
            chan.send(Abort(session, "version-mismatch", f"server speaks version {PROTOCOL_VERSION}"))
            return
        if hello.digest not in service.formulas:
            chan.send(Abort(session, "unknown-formula", hello.digest.hex()))
            return
        phi = service.formulas[hello.digest]
        if (phi.n, phi.m) != (hello.n, hello.m):
            chan.send(Abort(session, "malformed", "n/m do not match the formula digest"))
            return
        try:
            strategy = service.strategy(hello.digest)
        except CapacityError as exc:
            chan.send(Abort(session, "prover-capacity", str(exc)))
            return
        modulus, cert = strategy.setup()
        chan.send(Setup(session, int(modulus), cert.to_text()))
        chan.width = (int(modulus).bit_length() + 7) // 8
        challenges: list[int] = []
        i = 1
        while True:
            if i <= phi.n:
                try:
                    poly = strategy.respond(i, challenges)
                except CapacityError as exc:
                    chan.send(Abort(session, "prover-capacity", str(exc)))
                    return
                chan.send(RoundPoly(session, i, poly.coeffs))
            msg = chan.recv()
            if isinstance(msg, (VerdictMsg, Abort)):
                return
            if not isinstance(msg, Challenge) or msg.index != i or i >= phi.n or msg.session != session:
                chan.send(Abort(session, "protocol-order", f"unexpected {type(msg).__name__} in round {i}"))
                return
            challenges.append(msg.value)
            i += 1


class ProverServer(socketserver.ThreadingTCPServer):
    """One thread per session; the service and its strategies are shared read-only."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], service: ProverService,
                 max_frame: int = DEFAULT_MAX_FRAME):
        self.service = service
        self.max_frame = max_frame
        super().__init__(address, _ProverHandler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve_prover(endpoint: str, service: ProverService, *, background: bool = False,
                 max_frame: int = DEFAULT_MAX_FRAME) -> ProverServer:
    """Listen on ``host:port`` (port 0 picks a free one).

    With ``background=True`` the server runs in a daemon thread and is
    returned immediately; call ``shutdown()`` to stop it. Otherwise this
    blocks until interrupted.
    """
    host, port = parse_endpoint(endpoint)
    server = ProverServer((host, port), service, max_frame)
    if background:
        threading.Thread(target=server.serve_forever, daemon=True).start()
        return server
    try:
        server.serve_forever()
    finally:
        server.server_close()
    return server


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


# --- verifier side -------------------------------------------------------------

def _abort_transcript(phi: ThreeCnf, mode: Mode, code: str, detail: str,
                      session: VerifierSession | None = None) -> Transcript:
    if session is None:
        session = VerifierSession(phi, 0, None, mode, challenges=iter(()), certificate_digest="")
    session.abort(code, detail)
    return session.transcript


def _remote_session(endpoint, phi, mode, c_p, rng, timeout, max_frame) -> Transcript:
    host, port = parse_endpoint(endpoint)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        return _abort_transcript(phi, mode, "disconnect", f"cannot reach {endpoint}: {exc}")
    sid = secrets.randbits(64)
    session = None
    with sock:
        sock.settimeout(timeout)
        chan = FramedSocket(sock, max_frame)
        try:
            chan.send(Hello(sid, PROTOCOL_VERSION, mode, phi.n, phi.m, phi.digest()))
            setup = chan.recv()
            if isinstance(setup, Abort):
                return _abort_transcript(phi, mode, setup.code, setup.detail)
            if not isinstance(setup, Setup) or setup.session != sid:
                raise ProtocolAbort("protocol-order", "expected Setup")
            try:
                cert = PrattCertificate.from_text(setup.certificate)
                digest = cert.digest()
            except (ValueError, KeyError, TypeError):
                cert, digest = None, ""
            session = VerifierSession(phi, setup.p, cert, mode, rng=rng, certificate_digest=digest)
            reason = RejectReason.BAD_CERTIFICATE if cert is None else verify_setup(
                setup.p, cert, phi.n, c_p, mode)
            if reason is not None:
                session._reject(reason)
                chan.send(VerdictMsg(sid, False, reason, 0))
                return session.transcript
            chan.width = (setup.p.bit_length() + 7) // 8
            while not session.done:
                msg = chan.recv()
                if isinstance(msg, Abort):
                    session.abort(msg.code, msg.detail)
                    break
                if not isinstance(msg, RoundPoly) or msg.index != session.round or msg.session != sid:
                    raise ProtocolAbort("protocol-order", f"expected RoundPoly({session.round})")
                if any(c >= setup.p for c in msg.coeffs) or (msg.coeffs and msg.coeffs[-1] == 0):
                    raise ProtocolAbort("malformed", "non-canonical polynomial")
                a = session.receive(UnivariatePoly(msg.coeffs, setup.p))
                if a is not None:
                    chan.send(Challenge(sid, msg.index, a))
            if session.transcript.verdict is not Verdict.ABORT:
                t = session.transcript
                chan.send(VerdictMsg(sid, t.accepted, t.reason, t.reject_round or 0))
        except ProtocolAbort as exc:
            if exc.code not in ("disconnect", "timeout"):
                try:
                    chan.send(Abort(sid, exc.code, exc.detail))
                except OSError:
                    pass
            return _abort_transcript(phi, mode, exc.code, exc.detail, session)
        except OSError as exc:
            return _abort_transcript(phi, mode, "disconnect", str(exc), session)
    return session.transcript


def run_remote_verification(endpoint: str, formula: ThreeCnf | ThreeDnf, *,
                            mode: Mode = Mode.RELAXED, trials: int = 1,
                            rng: random.Random | None = None, c_p: int = DEFAULT_CP,
                            timeout: float = DEFAULT_TIMEOUT,
                            max_frame: int = DEFAULT_MAX_FRAME) -> tuple[Verdict, list[Transcript]]:
    """Remote counterpart of :func:`scproof.verifier.sc_verify`, one connection per trial.

    Transport trouble produces ABORT transcripts, never rejections.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    phi = negated_cnf(formula)
    mode = Mode(mode)
    rng = rng or random.SystemRandom()
    transcripts = []
    for _ in range(trials):
        t = _remote_session(endpoint, phi, mode, c_p, rng, timeout, max_frame)
        transcripts.append(t)
        if t.verdict is Verdict.ABORT:
            break
        if t.verdict is Verdict.REJECT and not t.rounds:
            break  # setup rejected; further trials would see the same setup
    return aggregate_verdict(transcripts), transcripts
