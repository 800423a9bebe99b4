import random
import socket
import struct
import threading

import pytest

from scproof import (
    Mode,
    PrimeSource,
    ProtocolAbort,
    RejectReason,
    ThreeCnf,
    Verdict,
    certify_small_prime,
    make_prover,
    random_3cnf,
    run_remote_verification,
    sc_verify,
    serve_prover,
)
from scproof.wire import (
    ABORT_CODES,
    PROTOCOL_VERSION,
    Abort,
    Challenge,
    FramedSocket,
    Hello,
    ProverService,
    RoundPoly,
    Setup,
    VerdictMsg,
    decode_message,
    encode_message,
    parse_endpoint,
)


@pytest.fixture
def server_factory():
    servers = []

    def start(formulas, kind="honest", seed=0, primes=None, max_frame=1 << 20):
        service = ProverService(formulas, kind=kind, seed=seed, primes=primes or PrimeSource(bits=64))
        srv = serve_prover("127.0.0.1:0", service, background=True, max_frame=max_frame)
        servers.append(srv)
        return srv.endpoint

    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def _random_message(rng, kind, width):
    sid = rng.getrandbits(64)
    if kind is Hello:
        return Hello(sid, rng.randrange(256), rng.choice(list(Mode)), rng.getrandbits(32), rng.getrandbits(32),
                     rng.randbytes(32))
    if kind is Setup:
        cert = certify_small_prime(rng.choice([3, 11, 65537, 4294967291]))
        return Setup(sid, rng.getrandbits(rng.randint(1, 600)), cert.to_text())
    if kind is RoundPoly:
        return RoundPoly(sid, rng.getrandbits(32), tuple(rng.getrandbits(8 * width) for _ in range(rng.randint(0, 40))))
    if kind is Challenge:
        return Challenge(sid, rng.getrandbits(32), rng.getrandbits(8 * width))
    if kind is VerdictMsg:
        return VerdictMsg(sid, rng.random() < 0.5, rng.choice([None, *RejectReason]), rng.getrandbits(32))
    return Abort(sid, rng.choice(list(ABORT_CODES)), "".join(chr(rng.randint(32, 0x2FF)) for _ in range(rng.randint(0, 30))))


@pytest.mark.parametrize("kind", [Hello, Setup, RoundPoly, Challenge, VerdictMsg, Abort])
def test_frame_round_trip(kind):
    rng = random.Random(kind.__name__)
    for _ in range(10_000):
        width = rng.randint(1, 40)
        msg = _random_message(rng, kind, width)
        frame = encode_message(msg, width)
        (length,) = struct.unpack(">I", frame[:4])
        assert length == len(frame) - 4
        assert decode_message(frame[4:], width) == msg


def test_fixed_width_encoding():
    frame = encode_message(Challenge(1, 2, 5), 4)
    assert frame == struct.pack(">IBQI", 17, 4, 1, 2) + (5).to_bytes(4, "big")


@pytest.mark.parametrize("frame", [b"", b"\x01" * 5, b"\x09" + b"\x00" * 8, b"\x05" + b"\x00" * 8 + b"\x02"])
def test_malformed_frames(frame):
    with pytest.raises(ProtocolAbort) as info:
        decode_message(frame, 4)
    assert info.value.code == "malformed"


def test_round_poly_needs_width():
    with pytest.raises(ProtocolAbort):
        decode_message(encode_message(RoundPoly(1, 1, (3,)), 2)[4:], None)
    with pytest.raises(ValueError):
        encode_message(RoundPoly(1, 1, (3,)), None)


def test_parse_endpoint():
    assert parse_endpoint("localhost:80") == ("localhost", 80)
    assert parse_endpoint(":9") == ("127.0.0.1", 9)
    with pytest.raises(ValueError):
        parse_endpoint("nohost")


def test_running_example_over_loopback(server_factory, running_example):
    endpoint = server_factory([running_example], primes=PrimeSource(bits=16))
    verdict, ts = run_remote_verification(endpoint, running_example, trials=3, rng=random.Random(0))
    assert verdict is Verdict.ACCEPT and len(ts) == 3


def test_remote_matches_local(server_factory):
    phi = random_3cnf(5, 30, 1)
    primes = PrimeSource(bits=64, seed=2)
    for kind in ("honest", "cheat:random", "cheat:sum-consistent"):
        endpoint = server_factory([phi], kind=kind, seed=4, primes=primes)
        rv, rts = run_remote_verification(endpoint, phi, trials=4, rng=random.Random(8))
        prover = make_prover(kind, phi, *primes.get(phi.n), seed=4)
        lv, lts = sc_verify(phi, prover, trials=4, rng=random.Random(8))
        assert rv is lv
        assert [t.to_json() for t in rts] == [t.to_json() for t in lts]


def test_endpoint_down_is_abort():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    verdict, (t,) = run_remote_verification(f"127.0.0.1:{port}", random_3cnf(3, 3, 0), rng=random.Random(0))
    assert verdict is Verdict.ABORT and t.abort_code == "disconnect" and t.reason is None


def test_unknown_formula(server_factory):
    endpoint = server_factory([random_3cnf(3, 3, 0)])
    verdict, (t,) = run_remote_verification(endpoint, random_3cnf(3, 3, 1), rng=random.Random(0))
    assert verdict is Verdict.ABORT and t.abort_code == "unknown-formula"


def test_prover_capacity(server_factory):
    phi = random_3cnf(30, 40, 1)
    endpoint = server_factory([phi])
    verdict, (t,) = run_remote_verification(endpoint, phi, rng=random.Random(0))
    assert verdict is Verdict.ABORT and t.abort_code == "prover-capacity"
    strict = random_3cnf(4, 8, 1)
    endpoint = server_factory([strict], primes=PrimeSource(c_p=2, max_bits=64))
    verdict, (t,) = run_remote_verification(endpoint, strict, rng=random.Random(0), mode=Mode.PAPER_STRICT)
    assert verdict is Verdict.ABORT and t.abort_code == "prover-capacity"


def test_bad_prime_is_reject_not_abort(server_factory):
    phi = random_3cnf(3, 3, 0)
    endpoint = server_factory([phi], primes=PrimeSource(fixed=7))
    verdict, ts = run_remote_verification(endpoint, phi, trials=5, rng=random.Random(0))
    assert verdict is Verdict.REJECT and len(ts) == 1
    assert ts[0].reason is RejectReason.PRIME_OUT_OF_RANGE


def _raw_client(endpoint):
    host, port = parse_endpoint(endpoint)
    sock = socket.create_connection((host, port), timeout=5)
    return sock, FramedSocket(sock)


def test_out_of_order_challenge(server_factory):
    phi = random_3cnf(4, 8, 0)
    endpoint = server_factory([phi])
    sock, chan = _raw_client(endpoint)
    with sock:
        chan.send(Hello(77, PROTOCOL_VERSION, Mode.RELAXED, phi.n, phi.m, phi.digest()))
        setup = chan.recv()
        assert isinstance(setup, Setup)
        chan.width = (setup.p.bit_length() + 7) // 8
        assert isinstance(chan.recv(), RoundPoly)
        chan.send(Challenge(77, 3, 1))
        reply = chan.recv()
        assert isinstance(reply, Abort) and reply.code == "protocol-order" and reply.session == 77


def test_challenge_before_hello(server_factory):
    endpoint = server_factory([random_3cnf(4, 8, 0)])
    sock, chan = _raw_client(endpoint)
    with sock:
        chan.width = 8
        chan.send(Challenge(5, 1, 1))
        reply = chan.recv()
        assert isinstance(reply, Abort) and reply.code in ("protocol-order", "malformed")


def test_last_challenge_is_never_accepted(server_factory):
    phi = random_3cnf(2, 4, 0)
    endpoint = server_factory([phi])
    sock, chan = _raw_client(endpoint)
    with sock:
        chan.send(Hello(9, PROTOCOL_VERSION, Mode.RELAXED, phi.n, phi.m, phi.digest()))
        setup = chan.recv()
        chan.width = (setup.p.bit_length() + 7) // 8
        chan.recv()
        chan.send(Challenge(9, 1, 5))
        assert isinstance(chan.recv(), RoundPoly)
        chan.send(Challenge(9, 2, 5))  # round n: must not be sent
        reply = chan.recv()
        assert isinstance(reply, Abort) and reply.code == "protocol-order"


def test_version_mismatch(server_factory):
    phi = random_3cnf(3, 3, 0)
    endpoint = server_factory([phi])
    sock, chan = _raw_client(endpoint)
    with sock:
        chan.send(Hello(1, PROTOCOL_VERSION + 1, Mode.RELAXED, phi.n, phi.m, phi.digest()))
        reply = chan.recv()
        assert isinstance(reply, Abort) and reply.code == "version-mismatch"


def test_oversized_frame_to_server(server_factory):
    endpoint = server_factory([random_3cnf(3, 3, 0)], max_frame=64)
    sock, chan = _raw_client(endpoint)
    with sock:
        sock.sendall(struct.pack(">I", 1 << 20))
        reply = chan.recv()
        assert isinstance(reply, Abort) and reply.code == "frame-too-large"


def _fake_prover(handler):
    """One-shot TCP server whose session behaviour is ``handler(FramedSocket)``."""
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)

    def run():
        conn, _ = listener.accept()
        with conn:
            try:
                handler(FramedSocket(conn))
            except OSError:
                pass
        listener.close()

    threading.Thread(target=run, daemon=True).start()
    return "127.0.0.1:%d" % listener.getsockname()[1]


def _setup_then(phi, p, after):
    def handler(chan):
        hello = chan.recv()
        chan.send(Setup(hello.session, p, certify_small_prime(p).to_text()))
        chan.width = (p.bit_length() + 7) // 8
        after(chan, hello.session)
    return handler


def test_oversized_round_poly_frame():
    phi = random_3cnf(3, 3, 0)

    def after(chan, sid):
        chan.sock.sendall(struct.pack(">IB", 50_000_000, 3))
        chan.sock.recv(100)

    endpoint = _fake_prover(_setup_then(phi, 65537, after))
    verdict, (t,) = run_remote_verification(endpoint, phi, rng=random.Random(0), max_frame=1 << 16)
    assert verdict is Verdict.ABORT and t.abort_code == "frame-too-large" and t.reason is None


def test_non_canonical_poly_is_abort():
    phi = random_3cnf(3, 3, 0)

    def after(chan, sid):
        chan.send(RoundPoly(sid, 1, (1, 0)))
        chan.sock.recv(100)

    endpoint = _fake_prover(_setup_then(phi, 65537, after))
    verdict, (t,) = run_remote_verification(endpoint, phi, rng=random.Random(0))
    assert verdict is Verdict.ABORT and t.abort_code == "malformed"


def test_mid_session_disconnect_is_abort():
    phi = random_3cnf(3, 3, 0)
    endpoint = _fake_prover(_setup_then(phi, 65537, lambda chan, sid: None))
    verdict, (t,) = run_remote_verification(endpoint, phi, rng=random.Random(0))
    assert verdict is Verdict.ABORT and t.abort_code == "disconnect"


def test_timeout_is_abort():
    phi = random_3cnf(3, 3, 0)
    gate = threading.Event()
    endpoint = _fake_prover(_setup_then(phi, 65537, lambda chan, sid: gate.wait(5)))
    verdict, (t,) = run_remote_verification(endpoint, phi, rng=random.Random(0), timeout=0.3)
    gate.set()
    assert verdict is Verdict.ABORT and t.abort_code == "timeout"


def test_concurrent_sessions_are_isolated(server_factory):
    phis = [random_3cnf(6, 40, f"c/{k}") for k in range(4)]
    endpoint = server_factory(phis, primes=PrimeSource(bits=64, seed=1))
    results = {}

    def work(k):
        results[k] = run_remote_verification(endpoint, phis[k], trials=3, rng=random.Random(k))

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    primes = PrimeSource(bits=64, seed=1)
    for k, phi in enumerate(phis):
        prover = make_prover("honest", phi, *primes.get(phi.n))
        _, local = sc_verify(phi, prover, trials=3, rng=random.Random(k))
        assert [t.to_json() for t in results[k][1]] == [t.to_json() for t in local]


def test_service_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        ProverService([ThreeCnf.from_ints(1, [(1, 1, 1)])], kind="cheat:other")
