"""Mutation-based robustness tester and CVE probe bank.

Sixteen cases: ten protocol mutations on a baseline ClientHello or record
stream, six downgrade/vulnerability probes. Each case sends its crafted
bytes, observes the server (alert, close, HelloRetryRequest, ServerHello,
silence), and passes iff the observation is in the case's accepted set.
Accepting malformed input, crashing, or hanging is always a failure.

Batches are deterministic for a fixed seed and target state; cases against
one target run serially because replay cases depend on ordering.
"""

from __future__ import annotations

import random
import socket
import struct
import time
from dataclasses import dataclass, field

from .crypto import kem
from .tls import wire
from .tls.client import build_client_hello, client_handshake, generate_key_shares
from .tls.context import HandshakeConfig

DEFAULT_TIMEOUT = 5.0
DEFAULT_HELLO_BUDGET_S = 10.0


@dataclass
class FuzzCase:
    name: str
    category: str  # protocol | vulnerability
    expected: tuple[str, ...]
    runner: object
    cve: str | None = None
    description: str = ""


@dataclass
class Observation:
    kind: str  # alert | closed | hrr | server_hello | accepted | timeout | error
    alert_level: int | None = None
    alert_code: int | None = None
    elapsed_ms: float = 0.0
    note: str = ""

    def summary(self) -> str:
        if self.kind == "alert":
            name = wire.ALERT_NAMES.get(self.alert_code, "unknown")
            return f"fatal alert {self.alert_code} ({name})" if self.alert_level == 2 \
                else f"warning alert {self.alert_code} ({name})"
        return self.kind + (f": {self.note}" if self.note else "")


@dataclass
class FuzzResult:
    test_name: str
    success: bool
    category: str
    cve: str | None = None
    error: str | None = None
    observed: dict = field(default_factory=dict)
    expected_summary: str = ""
    observed_summary: str = ""
    verdict_id: str | None = None

    def to_json(self) -> dict:
        out = {"test_name": self.test_name, "success": self.success,
               "category": self.category}
        if self.cve:
            out["cve"] = self.cve
        if self.error:
            out["error"] = self.error
        if self.observed:
            out["observed"] = self.observed
        return out


class _Conn:
    def __init__(self, host: str, port: int, timeout: float):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)

    def send_record(self, content_type: int, payload: bytes, version: int = 0x0303):
        self.sock.sendall(bytes([content_type]) + wire.u16(version)
                          + wire.u16(len(payload)) + payload)

    def send_raw(self, data: bytes):
        self.sock.sendall(data)

    def observe(self, timeout: float | None = None) -> Observation:
        """Read one server record and classify the reaction."""
        start = time.perf_counter()
        if timeout is not None:
            self.sock.settimeout(timeout)
        buffer = b""
        try:
            while True:
                chunk = self.sock.recv(4096)
                if not chunk:
                    return Observation("closed", elapsed_ms=_ms(start))
                buffer += chunk
                while len(buffer) >= 5:
                    length = struct.unpack(">H", buffer[3:5])[0]
                    if len(buffer) < 5 + length:
                        break
                    content_type = buffer[0]
                    payload = buffer[5: 5 + length]
                    buffer = buffer[5 + length:]
                    if content_type == wire.ContentType.ALERT and len(payload) >= 2:
                        return Observation("alert", payload[0], payload[1], _ms(start))
                    if content_type == wire.ContentType.CHANGE_CIPHER_SPEC:
                        continue
                    if content_type == wire.ContentType.HANDSHAKE and payload \
                            and payload[0] == wire.HandshakeType.SERVER_HELLO:
                        try:
                            sh = wire.parse_server_hello(payload[4:])
                            kind = "hrr" if sh.is_hrr else "server_hello"
                        except wire.DecodeError:
                            kind = "server_hello"
                        return Observation(kind, elapsed_ms=_ms(start))
                    return Observation("accepted", elapsed_ms=_ms(start),
                                       note=f"content type {content_type}")
        except TimeoutError:
            return Observation("timeout", elapsed_ms=_ms(start))
        except OSError as exc:
            return Observation("closed", elapsed_ms=_ms(start), note=str(exc))

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def _ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000, 3)


@dataclass
class FuzzConfig:
    handshake: HandshakeConfig
    timeout: float = DEFAULT_TIMEOUT
    hello_budget_s: float = DEFAULT_HELLO_BUDGET_S
    seed: int = 0


def _baseline_hello(config: FuzzConfig, rng: random.Random,
                    groups=None) -> bytes:
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=groups or list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites),
        sni=hs.sni, alpn=list(hs.alpn), store_ticket=False)
    shares, _pairs, _us = generate_key_shares(cfg)
    return build_client_hello(cfg, shares, bytes(rng.randrange(256) for _ in range(32)),
                              bytes(rng.randrange(256) for _ in range(32)))


# ------------------------------------------------------------- mutations

def _case_empty_message(conn: _Conn, config, rng):
    conn.send_record(wire.ContentType.HANDSHAKE, b"")
    return conn.observe()


def _case_truncated_ch(conn_factory, config, rng):
    """Three cut positions; the worst (least-refusing) result is reported."""
    raw = _baseline_hello(config, rng)
    body = raw[4:]
    cuts = [20, max(40, len(body) // 2), len(body) - 8]
    worst = None
    order = {"alert": 0, "closed": 1, "hrr": 2, "timeout": 3, "server_hello": 4, "accepted": 5}
    for cut in cuts:
        truncated = body[:cut]
        msg = wire.handshake_message(wire.HandshakeType.CLIENT_HELLO, truncated)
        conn = conn_factory()
        conn.send_record(wire.ContentType.HANDSHAKE, msg)
        obs = conn.observe()
        conn.close()
        if worst is None or order.get(obs.kind, 9) > order.get(worst.kind, 9):
            worst = obs
    return worst


def _case_invalid_record_type(conn: _Conn, config, rng):
    conn.send_record(99, _baseline_hello(config, rng))
    return conn.observe()


def _case_bad_record_length(conn: _Conn, config, rng):
    # header claims far more than the record limit allows
    conn.send_raw(bytes([wire.ContentType.HANDSHAKE]) + wire.u16(0x0303)
                  + wire.u16(0x4800) + b"\x00" * 32)
    return conn.observe()


def _case_duplicate_ch(conn: _Conn, config, rng):
    ctx = client_handshake(conn.sock, _replay_config(config), "fuzz")
    if not ctx.successful:
        return Observation("error", note=f"baseline handshake failed: {ctx.failure}")
    start = time.perf_counter()
    conn.send_record(wire.ContentType.HANDSHAKE, ctx.raw_client_hello)
    move, code = ctx.session.observe(timeout=2.0)
    if move == "alert":
        return Observation("alert", 2, code, _ms(start))
    if move == "closed":
        return Observation("closed", elapsed_ms=_ms(start))
    return Observation("accepted", elapsed_ms=_ms(start),
                       note="replayed ClientHello silently accepted")


def _case_malformed_extensions(conn: _Conn, config, rng):
    raw = _baseline_hello(config, rng)
    body = bytearray(raw[4:])
    # the extensions block length lives right before the first extension;
    # walk past the fixed fields to find and corrupt it
    pos = 2 + 32
    pos += 1 + body[pos]              # session id
    suites_len = (body[pos] << 8) | body[pos + 1]
    pos += 2 + suites_len
    pos += 1 + body[pos]              # compression
    body[pos] = 0x7F                  # extensions length now exceeds the body
    body[pos + 1] = 0xFF
    msg = wire.handshake_message(wire.HandshakeType.CLIENT_HELLO, bytes(body))
    conn.send_record(wire.ContentType.HANDSHAKE, msg)
    return conn.observe()


def _case_invalid_keyshare_group(conn: _Conn, config, rng):
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites), sni=hs.sni, store_ticket=False)
    bogus = bytes(rng.randrange(256) for _ in range(32))
    raw = build_client_hello(cfg, [(0xABCD, bogus)],
                             bytes(rng.randrange(256) for _ in range(32)),
                             bytes(rng.randrange(256) for _ in range(32)))
    conn.send_record(wire.ContentType.HANDSHAKE, raw)
    return conn.observe()


def _case_oversized_payload(conn: _Conn, config, rng):
    payload = _baseline_hello(config, rng)
    padded = payload + bytes(max(0, 17000 - len(payload)))  # past the 2^14+256 limit
    conn.send_raw(bytes([wire.ContentType.HANDSHAKE]) + wire.u16(0x0303)
                  + wire.u16(len(padded)) + padded)
    return conn.observe()


def _case_zero_length_keyshare(conn: _Conn, config, rng):
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=[0x001D], offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites), sni=hs.sni, store_ticket=False)
    raw = build_client_hello(cfg, [(0x001D, b"")],
                             bytes(rng.randrange(256) for _ in range(32)),
                             bytes(rng.randrange(256) for _ in range(32)))
    conn.send_record(wire.ContentType.HANDSHAKE, raw)
    return conn.observe()


def _case_large_record_split(conn: _Conn, config, rng):
    raw = _baseline_hello(config, rng)
    split = 100
    version = wire.u16(0x0303)
    conn.send_raw(bytes([wire.ContentType.HANDSHAKE]) + version
                  + wire.u16(split) + raw[:split])
    time.sleep(0.02)
    rest = raw[split:]
    conn.send_raw(bytes([wire.ContentType.HANDSHAKE]) + version
                  + wire.u16(len(rest)) + rest)
    return conn.observe()


# ------------------------------------------------------------ CVE probes

def _legacy_hello(config, rng, version: int) -> bytes:
    suites = b"".join(wire.u16(s) for s in (0x002F, 0x0035, 0x000A))
    body = (wire.u16(version) + bytes(rng.randrange(256) for _ in range(32))
            + wire.vec8(b"") + wire.vec16(suites) + wire.vec8(b"\x00"))
    return wire.handshake_message(wire.HandshakeType.CLIENT_HELLO, body)


def _case_sslv3_downgrade(conn: _Conn, config, rng):
    conn.send_record(wire.ContentType.HANDSHAKE, _legacy_hello(config, rng, 0x0300),
                     version=0x0300)
    obs = conn.observe()
    if obs.kind == "server_hello":
        return Observation("accepted", elapsed_ms=obs.elapsed_ms, note="SSLv3 accepted")
    return obs


def _case_tls10_downgrade(conn: _Conn, config, rng):
    conn.send_record(wire.ContentType.HANDSHAKE, _legacy_hello(config, rng, 0x0301),
                     version=0x0301)
    obs = conn.observe()
    if obs.kind == "server_hello":
        return Observation("accepted", elapsed_ms=obs.elapsed_ms, note="TLS 1.0 accepted")
    return obs


def _case_null_cipher(conn: _Conn, config, rng):
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=[0x0000, 0x0001, 0x0002], sni=hs.sni, store_ticket=False)
    shares, _p, _u = generate_key_shares(cfg)
    raw = build_client_hello(cfg, shares, bytes(rng.randrange(256) for _ in range(32)),
                             bytes(rng.randrange(256) for _ in range(32)))
    conn.send_record(wire.ContentType.HANDSHAKE, raw)
    obs = conn.observe()
    if obs.kind == "server_hello":
        return Observation("accepted", elapsed_ms=obs.elapsed_ms, note="NULL cipher accepted")
    return obs


def _case_compression_offer(conn: _Conn, config, rng):
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites), sni=hs.sni, store_ticket=False,
        compression_methods=b"\x00\x01")  # null + DEFLATE
    shares, _p, _u = generate_key_shares(cfg)
    raw = build_client_hello(cfg, shares, bytes(rng.randrange(256) for _ in range(32)),
                             bytes(rng.randrange(256) for _ in range(32)))
    conn.send_record(wire.ContentType.HANDSHAKE, raw)
    obs = conn.observe()
    if obs.kind == "server_hello":
        return Observation("accepted", elapsed_ms=obs.elapsed_ms,
                           note="ClientHello with DEFLATE compression accepted")
    return obs


def _case_renegotiation_probe(conn: _Conn, config, rng):
    ctx = client_handshake(conn.sock, _replay_config(config), "fuzz")
    if not ctx.successful:
        return Observation("error", note=f"baseline handshake failed: {ctx.failure}")
    hs = config.handshake
    cfg = HandshakeConfig(
        offered_groups=list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites), sni=hs.sni, store_ticket=False)
    shares, _p, _u = generate_key_shares(cfg)
    raw = bytearray(build_client_hello(
        cfg, shares, bytes(rng.randrange(256) for _ in range(32)),
        bytes(rng.randrange(256) for _ in range(32))))
    # splice in a renegotiation_info extension and fix up the length fields
    reneg = wire.extension(wire.ExtensionType.RENEGOTIATION_INFO, b"\x00")
    body = bytearray(raw[4:])
    ext_len_pos = _extensions_length_offset(body)
    old_len = (body[ext_len_pos] << 8) | body[ext_len_pos + 1]
    new_len = old_len + len(reneg)
    body[ext_len_pos] = new_len >> 8
    body[ext_len_pos + 1] = new_len & 0xFF
    body += reneg
    msg = wire.handshake_message(wire.HandshakeType.CLIENT_HELLO, bytes(body))
    ctx.session.layer.write_record(wire.ContentType.HANDSHAKE, msg)
    move, code = ctx.session.observe(timeout=2.0)
    if move == "alert":
        return Observation("alert", 2, code)
    if move == "closed":
        return Observation("closed")
    return Observation("accepted", note="renegotiation attempt silently accepted")


def _extensions_length_offset(body: bytearray) -> int:
    pos = 2 + 32
    pos += 1 + body[pos]
    suites_len = (body[pos] << 8) | body[pos + 1]
    pos += 2 + suites_len
    pos += 1 + body[pos]
    return pos


def _case_serverhello_timeout(conn: _Conn, config, rng):
    raw = _baseline_hello(config, rng)
    conn.send_record(wire.ContentType.HANDSHAKE, raw)
    obs = conn.observe(timeout=config.hello_budget_s)
    if obs.kind in ("server_hello", "hrr") and obs.elapsed_ms <= config.hello_budget_s * 1000:
        return Observation("within_budget", elapsed_ms=obs.elapsed_ms)
    if obs.kind == "timeout":
        return Observation("timeout", elapsed_ms=obs.elapsed_ms,
                           note="no ServerHello within budget")
    return obs


def _replay_config(config: FuzzConfig) -> HandshakeConfig:
    # store_ticket drains the server's NewSessionTicket before the replay,
    # so the next record observed is the reaction to the replay itself
    hs = config.handshake
    return HandshakeConfig(
        offered_groups=list(hs.offered_groups),
        offered_sig_schemes=list(hs.offered_sig_schemes),
        cipher_suites=list(hs.cipher_suites), sni=hs.sni,
        client_credential=hs.client_credential, store_ticket=True)


CASES: list[FuzzCase] = [
    FuzzCase("EmptyMessage", "protocol", ("alert", "closed"), _case_empty_message,
             description="zero-length handshake body"),
    FuzzCase("TruncatedClientHello", "protocol", ("alert", "closed"), _case_truncated_ch,
             description="ClientHello cut at three positions"),
    FuzzCase("InvalidRecordType", "protocol", ("alert", "closed"),
             _case_invalid_record_type, description="record content type 99"),
    FuzzCase("BadRecordLength", "protocol", ("alert", "closed"), _case_bad_record_length,
             description="record header length beyond the record limit"),
    FuzzCase("DuplicateClientHello", "protocol", ("alert", "closed"), _case_duplicate_ch,
             description="ClientHello replayed on an established session"),
    FuzzCase("MalformedExtensions", "protocol", ("alert", "closed"),
             _case_malformed_extensions, description="extensions length-field corruption"),
    FuzzCase("InvalidKeyShareGroup", "protocol", ("hrr", "alert", "closed"),
             _case_invalid_keyshare_group, description="unregistered key_share group id"),
    FuzzCase("OversizedPayload", "protocol", ("alert", "closed"), _case_oversized_payload,
             description="record breaching the 16 KiB limit"),
    FuzzCase("ZeroLengthKeyShare", "protocol", ("alert", "closed"),
             _case_zero_length_keyshare, description="key_share opaque of length zero"),
    FuzzCase("LargeRecordSplit", "protocol", ("server_hello", "hrr"),
             _case_large_record_split, description="ClientHello split across records"),
    FuzzCase("SSLv3Downgrade", "vulnerability", ("alert", "closed"),
             _case_sslv3_downgrade, cve="CVE-2014-3566", description="POODLE downgrade"),
    FuzzCase("TLS10Downgrade", "vulnerability", ("alert", "closed"),
             _case_tls10_downgrade, cve="CVE-2011-3389", description="BEAST-era TLS 1.0"),
    FuzzCase("NullCipherOffer", "vulnerability", ("alert", "closed"), _case_null_cipher,
             description="NULL-cipher-only offer"),
    FuzzCase("CompressionOffer", "vulnerability", ("alert", "closed", "server_hello"),
             _case_compression_offer, cve="CVE-2012-4929",
             description="CRIME-class compression offer"),
    FuzzCase("RenegotiationProbe", "vulnerability", ("alert", "closed"),
             _case_renegotiation_probe, cve="RFC 5746",
             description="renegotiation-info-bearing second ClientHello"),
    FuzzCase("ServerHelloTimeout", "vulnerability", ("within_budget",),
             _case_serverhello_timeout, description="response-time budget"),
]

CASE_BY_NAME = {c.name: c for c in CASES}


def evaluate(case: FuzzCase, observed: Observation) -> FuzzResult:
    """Success iff the observation is in the case's accepted set."""
    if observed.kind == "error":
        return FuzzResult(case.name, False, case.category, case.cve,
                          error=observed.note or "probe error",
                          observed={"kind": observed.kind},
                          expected_summary=" or ".join(case.expected),
                          observed_summary=observed.summary())
    success = observed.kind in case.expected
    error = None
    if not success:
        if observed.kind in ("accepted", "server_hello", "timeout"):
            error = "unexpected behavior (rejected=true)"
            if observed.note:
                error = f"unexpected behavior (rejected=true): {observed.note}"
        else:
            error = f"unexpected behavior: {observed.summary()}"
    return FuzzResult(
        case.name, success, case.category, case.cve, error=error,
        observed={"kind": observed.kind, "alert_level": observed.alert_level,
                  "alert_code": observed.alert_code, "elapsed_ms": observed.elapsed_ms},
        expected_summary=" or ".join(case.expected),
        observed_summary=observed.summary())


def run_case(host: str, port: int, case: FuzzCase, config: FuzzConfig,
             rng: random.Random) -> FuzzResult:
    try:
        if case.runner is _case_truncated_ch:
            obs = case.runner(lambda: _Conn(host, port, config.timeout), config, rng)
        else:
            conn = _Conn(host, port, config.timeout)
            try:
                obs = case.runner(conn, config, rng)
            finally:
                conn.close()
    except OSError as exc:
        return FuzzResult(case.name, False, case.category, case.cve,
                          error=f"connection failure: {exc}",
                          expected_summary=" or ".join(case.expected),
                          observed_summary="connection failure")
    return evaluate(case, obs)


def run_fuzz_batch(targets, config: FuzzConfig,
                   cases: list[FuzzCase] | None = None,
                   batch_id: str | None = None) -> dict:
    """targets: iterable of (host, port, nf_type, address_label)."""
    cases = cases if cases is not None else CASES
    report_targets = []
    all_results: dict[str, list[FuzzResult]] = {}
    total = passed = 0
    for host, port, nf_type, label in targets:
        rng = random.Random(config.seed)
        results = [run_case(host, port, case, config, rng) for case in cases]
        all_results[label] = results
        t_passed = sum(1 for r in results if r.success)
        total += len(results)
        passed += t_passed
        report_targets.append({
            "target": label,
            "nf_type": nf_type,
            "passed": t_passed,
            "failed": len(results) - t_passed,
            "results": [r.to_json() for r in results],
        })
    report = {
        "id": batch_id or f"fuzz-batch-{int(time.time())}",
        "type": "fuzz-batch",
        "total_tests": total,
        "passed_tests": passed,
        "failed_tests": total - passed,
        "targets": report_targets,
    }
    return {"report": report, "results": all_results}
