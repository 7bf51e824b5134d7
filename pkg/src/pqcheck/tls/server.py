"""TLS 1.3 server state machine.

Policy hooks (preference orders, mTLS requirement, deliberate misbehavior
toggles) are injected through ServerPolicy so the reference endpoint and
any strict server share one protocol implementation and differ only in
policy. Each connection appends a SessionRecord to the policy's log; that
log is the independent ground truth the soundness checks compare against.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
import os
import struct
import time
from dataclasses import dataclass, field

from ..crypto import aead, kdf, kem, sig as sigmod
from . import wire
from .common import AlertReceived, MessageReader, TlsFailure, Transcript, send_fatal
from .record import ConnectionClosed, RecordError, RecordLayer

# legacy suite codepoints treated as weak if a client offers only them
WEAK_SUITES = {0x0000, 0x0001, 0x0002, 0x002F, 0x0035, 0x000A, 0xC013, 0xC014, 0x009C}


@dataclass
class ServerCredential:
    scheme: sigmod.SigAlgorithm
    chain_der: list[bytes]
    private_key: bytes


@dataclass
class SessionRecord:
    """What the server itself observed for one connection."""

    client_random: bytes = b""
    server_random: bytes = b""
    group: int | None = None
    sig_scheme: int | None = None
    cipher_suite: int | None = None
    alpn: str | None = None
    success: bool = False
    resumed: bool = False
    client_cert_seen: bool = False
    hello_retry: bool = False
    error: str = ""
    alert_sent: int | None = None
    encap_us: int = 0
    sign_us: int = 0


@dataclass
class ServerPolicy:
    credentials: dict[int, ServerCredential]
    group_preference: list[int]
    suite_preference: list[int] = field(default_factory=lambda: [0x1302, 0x1303, 0x1301])
    sig_preference: list[int] | None = None
    alpn_protocols: list[str] = field(default_factory=lambda: ["h2"])
    require_client_cert: bool = True
    client_ca: list | None = None
    send_session_ticket: bool = True
    # misbehavior toggles, all strict by default
    no_cert_request: bool = False
    classical_fallback: bool = False
    classical_sig_on_pq_kex: bool = False
    leaf_only_chain: bool = False
    allow_tls12_offer_acceptance: bool = False
    accept_duplicate_ch: bool = False
    ambiguous_renegotiation: bool = False
    weak_cipher_acceptance: bool = False

    session_log: list[SessionRecord] = field(default_factory=list)
    ticket_cache: dict[bytes, dict] = field(default_factory=dict)

    def effective_group_preference(self) -> list[int]:
        if not self.classical_fallback:
            return self.group_preference
        classical = [g for g in self.group_preference if kem.lookup(g).kind == "classical"]
        rest = [g for g in self.group_preference if g not in classical]
        return classical + rest

    def pick_signature(self, offered: list[int]) -> ServerCredential | None:
        order = self.sig_preference or list(self.credentials)
        if self.classical_sig_on_pq_kex:
            order = sorted(order, key=lambda s: sigmod.lookup(s).kind != "classical")
        for scheme_id in order:
            if scheme_id in offered and scheme_id in self.credentials:
                return self.credentials[scheme_id]
        return None


class _Shutdown(Exception):
    pass


def server_handshake(sock, policy: ServerPolicy,
                     app_handler=None) -> SessionRecord:
    """Run one connection to completion; returns the server-side record."""
    record = SessionRecord()
    policy.session_log.append(record)
    layer = RecordLayer(sock)
    reader = MessageReader(layer)
    transcript = Transcript()
    try:
        _run_server(record, layer, reader, transcript, policy, app_handler)
    except AlertReceived as exc:
        record.error = str(exc)
    except TlsFailure as exc:
        send_fatal(layer, exc.alert_code)
        record.error = str(exc)
        record.alert_sent = exc.alert_code
    except RecordError as exc:
        send_fatal(layer, exc.alert_code)
        record.error = str(exc)
        record.alert_sent = exc.alert_code
    except (ConnectionClosed, OSError, _Shutdown) as exc:
        if not record.error:
            record.error = record.error or f"transport: {exc}"
    return record


def _select_group(policy: ServerPolicy, ch: wire.ClientHello):
    offered = ch.supported_groups
    shares = dict(ch.key_shares)
    for group in policy.effective_group_preference():
        if group in offered:
            try:
                alg = kem.lookup(group)
            except kem.KemError:
                continue
            if not alg.implemented:
                continue
            return group, shares.get(group)
    raise TlsFailure("no mutually supported group", wire.AlertDescription.HANDSHAKE_FAILURE)


def _run_server(record: SessionRecord, layer: RecordLayer, reader: MessageReader,
                transcript: Transcript, policy: ServerPolicy, app_handler) -> None:
    msg_type, body, raw = reader.next_message()
    if msg_type != wire.HandshakeType.CLIENT_HELLO:
        raise TlsFailure("expected ClientHello", wire.AlertDescription.UNEXPECTED_MESSAGE)
    try:
        ch = wire.parse_client_hello(body)
    except wire.DecodeError as exc:
        raise TlsFailure(f"undecodable ClientHello: {exc}",
                         wire.AlertDescription.DECODE_ERROR) from exc
    record.client_random = ch.random

    versions = ch.supported_versions
    if versions is None or wire.TLS13 not in versions:
        if policy.allow_tls12_offer_acceptance and ch.legacy_version >= wire.TLS12:
            _legacy_accept(record, layer, ch)
            return
        raise TlsFailure("client did not offer TLS 1.3",
                         wire.AlertDescription.PROTOCOL_VERSION)

    if ch.compression_methods != b"\x00":
        raise TlsFailure("TLS 1.3 requires a single null compression method",
                         wire.AlertDescription.ILLEGAL_PARAMETER)

    suite_id = None
    for candidate in policy.suite_preference:
        if candidate in ch.cipher_suites:
            suite_id = candidate
            break
    if suite_id is None:
        if policy.weak_cipher_acceptance:
            weak = next((s for s in ch.cipher_suites if s in WEAK_SUITES), None)
            if weak is not None:
                _weak_accept(record, layer, ch, weak)
                return
        raise TlsFailure("no mutually supported cipher suite",
                         wire.AlertDescription.HANDSHAKE_FAILURE)
    suite = aead.SUITES[suite_id]
    record.cipher_suite = suite_id

    group, client_share = _select_group(policy, ch)
    transcript.append(raw)

    if client_share is None:
        _send_hrr(record, layer, transcript, suite, group, ch.session_id)
        record.hello_retry = True
        msg_type, body, raw = reader.next_message()
        if msg_type != wire.HandshakeType.CLIENT_HELLO:
            raise TlsFailure("expected retried ClientHello",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)
        ch = wire.parse_client_hello(body)
        client_share = dict(ch.key_shares).get(group)
        if client_share is None:
            raise TlsFailure("retry ClientHello still lacks the requested share",
                             wire.AlertDescription.ILLEGAL_PARAMETER)
        transcript.append(raw)

    alg = kem.lookup(group)
    if len(client_share) == 0:
        raise TlsFailure("zero-length key share", wire.AlertDescription.DECODE_ERROR)
    if len(client_share) != alg.ek_len:
        raise TlsFailure(
            f"client key share is {len(client_share)} bytes, expected {alg.ek_len}",
            wire.AlertDescription.DECODE_ERROR)
    record.group = group

    # resumption (psk_dhe_ke only)
    psk = b""
    selected_psk_ext = None
    psk_body = ch.ext(wire.ExtensionType.PRE_SHARED_KEY)
    if psk_body is not None:
        entry = _try_resume(policy, ch, body, raw, suite)
        if entry is not None:
            psk = entry
            record.resumed = True
            selected_psk_ext = wire.extension(wire.ExtensionType.PRE_SHARED_KEY, wire.u16(0))

    t0 = time.perf_counter()
    try:
        ct, shared_secret = kem.encapsulate(alg, client_share)
    except kem.KemError as exc:
        raise TlsFailure(f"invalid client key share: {exc}",
                         wire.AlertDescription.ILLEGAL_PARAMETER) from exc
    record.encap_us = max(1, int((time.perf_counter() - t0) * 1e6))

    server_random = os.urandom(32)
    record.server_random = server_random
    # the ServerHello variant of supported_versions carries a single u16
    extensions = [
        wire.extension(wire.ExtensionType.SUPPORTED_VERSIONS, wire.u16(wire.TLS13)),
        wire.extension(wire.ExtensionType.KEY_SHARE, wire.key_share_entry(group, ct)),
    ]
    if selected_psk_ext is not None:
        extensions.append(selected_psk_ext)
    sh_body = wire.build_server_hello_body(server_random, ch.session_id, suite_id, extensions)
    sh_raw = wire.handshake_message(wire.HandshakeType.SERVER_HELLO, sh_body)
    transcript.append(sh_raw)
    layer.write_record(wire.ContentType.HANDSHAKE, sh_raw)
    layer.write_record(wire.ContentType.CHANGE_CIPHER_SPEC, b"\x01")

    hash_name = suite.hash_name
    hello_hash = transcript.hash(hash_name)
    schedule = kdf.derive_key_schedule(
        shared_secret, kdf.ScheduleTranscripts(hello_hash, b""), hash_name, psk=psk)
    layer.install_suite(suite)
    layer.set_write_secret(schedule.server_handshake_traffic_secret)

    alpn = next((p for p in policy.alpn_protocols if p in ch.alpn), None)
    if ch.alpn and alpn is None:
        raise TlsFailure("no overlapping ALPN protocol",
                         wire.AlertDescription.NO_APPLICATION_PROTOCOL)
    record.alpn = alpn
    ee_raw = wire.handshake_message(wire.HandshakeType.ENCRYPTED_EXTENSIONS,
                                    wire.build_encrypted_extensions(alpn))
    transcript.append(ee_raw)
    layer.write_record(wire.ContentType.HANDSHAKE, ee_raw)

    cred = None
    if not record.resumed:
        cred = policy.pick_signature(ch.signature_algorithms)
        if cred is None:
            raise TlsFailure("no usable signature scheme/credential",
                             wire.AlertDescription.HANDSHAKE_FAILURE)
        record.sig_scheme = cred.scheme.id

        sent_cert_request = False
        if policy.require_client_cert and not policy.no_cert_request:
            accepted = list(dict.fromkeys(
                list(policy.credentials)
                + [sigmod.ECDSA_P256.id, sigmod.ED25519.id, sigmod.MLDSA65.id]))
            cr_raw = wire.handshake_message(
                wire.HandshakeType.CERTIFICATE_REQUEST,
                wire.build_certificate_request(accepted))
            transcript.append(cr_raw)
            layer.write_record(wire.ContentType.HANDSHAKE, cr_raw)
            sent_cert_request = True

        chain = cred.chain_der[:1] if policy.leaf_only_chain else cred.chain_der
        cert_raw = wire.handshake_message(wire.HandshakeType.CERTIFICATE,
                                          wire.build_certificate_msg(chain))
        transcript.append(cert_raw)
        layer.write_record(wire.ContentType.HANDSHAKE, cert_raw)

        signed = wire.SERVER_CV_CONTEXT + transcript.hash(hash_name)
        t0 = time.perf_counter()
        signature = sigmod.sign(cred.scheme, cred.private_key, signed)
        record.sign_us = max(1, int((time.perf_counter() - t0) * 1e6))
        cv_raw = wire.handshake_message(
            wire.HandshakeType.CERTIFICATE_VERIFY,
            wire.build_certificate_verify(cred.scheme.id, signature))
        transcript.append(cv_raw)
        layer.write_record(wire.ContentType.HANDSHAKE, cv_raw)
    else:
        sent_cert_request = False

    fin = kdf.finished_mac(schedule.server_handshake_traffic_secret,
                           transcript.hash(hash_name), hash_name)
    fin_raw = wire.handshake_message(wire.HandshakeType.FINISHED, fin)
    transcript.append(fin_raw)
    layer.write_record(wire.ContentType.HANDSHAKE, fin_raw)

    server_fin_hash = transcript.hash(hash_name)
    schedule2 = kdf.derive_key_schedule(
        shared_secret, kdf.ScheduleTranscripts(hello_hash, server_fin_hash),
        hash_name, psk=psk)
    layer.set_read_secret(schedule2.client_handshake_traffic_secret)

    client_cert_chain: list[bytes] = []
    while True:
        msg_type, body, raw = reader.next_message()
        if msg_type == wire.HandshakeType.CERTIFICATE:
            _c, client_cert_chain = wire.parse_certificate_msg(body)
            record.client_cert_seen = bool(client_cert_chain)
            if sent_cert_request and not client_cert_chain:
                raise TlsFailure("client certificate required for mutual TLS",
                                 wire.AlertDescription.CERTIFICATE_REQUIRED)
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.CERTIFICATE_VERIFY:
            scheme_id, csig = wire.parse_certificate_verify(body)
            if client_cert_chain:
                from ..pki import x509 as x509mod
                leaf = x509mod.parse_certificate(client_cert_chain[0])
                pre_cv = Transcript()
                pre_cv.messages = transcript.messages[:]
                signed = wire.CLIENT_CV_CONTEXT + pre_cv.hash(hash_name)
                if not sigmod.verify(sigmod.lookup(scheme_id), leaf.spki_key_bytes,
                                     signed, csig):
                    raise TlsFailure("client CertificateVerify invalid",
                                     wire.AlertDescription.DECRYPT_ERROR)
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.FINISHED:
            expected = kdf.finished_mac(schedule2.client_handshake_traffic_secret,
                                        transcript.hash(hash_name), hash_name)
            if not hmac_mod.compare_digest(expected, body):
                raise TlsFailure("client Finished MAC mismatch",
                                 wire.AlertDescription.DECRYPT_ERROR)
            transcript.append(raw)
            break
        else:
            raise TlsFailure(f"unexpected client message {msg_type}",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)

    layer.set_read_secret(schedule2.client_application_traffic_secret)
    layer.set_write_secret(schedule2.server_application_traffic_secret)
    record.success = True

    full = kdf.derive_key_schedule(
        shared_secret,
        kdf.ScheduleTranscripts(hello_hash, server_fin_hash, transcript.hash(hash_name)),
        hash_name, psk=psk)

    if policy.send_session_ticket and not record.resumed:
        nonce = struct.pack(">Q", len(policy.ticket_cache))
        ticket = os.urandom(16)
        hash_len = 48 if hash_name == "sha384" else 32
        psk_out = kdf.hkdf_expand_label(full.resumption_master_secret, "resumption",
                                        nonce, hash_len, hash_name)
        age_add = int.from_bytes(os.urandom(4), "big")
        policy.ticket_cache[ticket] = {"psk": psk_out, "hash": hash_name,
                                       "suite": record.cipher_suite, "age_add": age_add}
        nst_raw = wire.handshake_message(
            wire.HandshakeType.NEW_SESSION_TICKET,
            wire.build_new_session_ticket(3600, age_add, nonce, ticket))
        layer.write_record(wire.ContentType.HANDSHAKE, nst_raw)

    _post_handshake_loop(record, layer, reader, policy, app_handler)


def _try_resume(policy: ServerPolicy, ch: wire.ClientHello, body: bytes,
                raw: bytes, suite) -> bytes | None:
    psk_body = ch.ext(wire.ExtensionType.PRE_SHARED_KEY)
    modes = ch.ext(wire.ExtensionType.PSK_KEY_EXCHANGE_MODES)
    if psk_body is None or modes is None or 1 not in modes[1:1 + modes[0]]:
        return None
    r = wire.Reader(psk_body)
    ids = wire.Reader(r.vec16())
    ticket = ids.vec16()
    _age = ids.u32()
    binders_blob = r.vec16()
    entry = policy.ticket_cache.get(ticket)
    if entry is None or entry["hash"] != suite.hash_name:
        return None
    hash_name = entry["hash"]
    hash_len = 48 if hash_name == "sha384" else 32
    binders_len = 2 + 1 + hash_len
    if len(binders_blob) != 1 + hash_len:
        return None  # unexpected binder shape: fall back to a full handshake
    truncated = raw[:-binders_len]
    early = kdf.hkdf_extract(bytes(hash_len), entry["psk"], hash_name)
    binder_key = kdf.derive_secret(early, "res binder", kdf.empty_hash(hash_name), hash_name)
    expected = kdf.finished_mac(binder_key, hashlib.new(hash_name, truncated).digest(),
                                hash_name)
    rr = wire.Reader(binders_blob)
    binder = rr.vec8()
    if not hmac_mod.compare_digest(expected, binder):
        raise TlsFailure("PSK binder verification failed",
                         wire.AlertDescription.DECRYPT_ERROR)
    return entry["psk"]


def _send_hrr(record, layer: RecordLayer, transcript: Transcript, suite, group: int,
              session_id: bytes) -> None:
    transcript.replace_first_with_hash(suite.hash_name)
    extensions = [
        wire.extension(wire.ExtensionType.SUPPORTED_VERSIONS, wire.u16(wire.TLS13)),
        wire.extension(wire.ExtensionType.KEY_SHARE, wire.u16(group)),
    ]
    body = wire.build_server_hello_body(wire.HRR_RANDOM, session_id, suite.suite_id,
                                        extensions)
    raw = wire.handshake_message(wire.HandshakeType.SERVER_HELLO, body)
    transcript.append(raw)
    layer.write_record(wire.ContentType.HANDSHAKE, raw)
    layer.write_record(wire.ContentType.CHANGE_CIPHER_SPEC, b"\x01")


def _legacy_accept(record: SessionRecord, layer: RecordLayer, ch: wire.ClientHello) -> None:
    """Minimal TLS 1.2 ServerHello so downgrade probes can observe acceptance."""
    suite = next((s for s in ch.cipher_suites if s in (0x009C, 0xC02F, 0x002F)), 0x002F)
    random = os.urandom(24) + wire.DOWNGRADE_TLS12
    body = wire.build_server_hello_body(random, ch.session_id, suite, [],
                                        legacy_version=wire.TLS12)
    layer.write_record(wire.ContentType.HANDSHAKE,
                       wire.handshake_message(wire.HandshakeType.SERVER_HELLO, body))
    record.error = "accepted legacy version offer"
    record.cipher_suite = suite


def _weak_accept(record: SessionRecord, layer: RecordLayer, ch: wire.ClientHello,
                 suite: int) -> None:
    body = wire.build_server_hello_body(os.urandom(32), ch.session_id, suite,
                                        [wire.extension(wire.ExtensionType.SUPPORTED_VERSIONS,
                                                        wire.u16(wire.TLS13))])
    layer.write_record(wire.ContentType.HANDSHAKE,
                       wire.handshake_message(wire.HandshakeType.SERVER_HELLO, body))
    record.error = "accepted weak cipher suite"
    record.cipher_suite = suite


def _post_handshake_loop(record: SessionRecord, layer: RecordLayer, reader: MessageReader,
                         policy: ServerPolicy, app_handler) -> None:
    """Serve application data; police post-handshake handshake records."""
    app_buffer = b""
    while True:
        try:
            content_type, payload = layer.read_record()
        except (ConnectionClosed, OSError):
            return
        except RecordError as exc:
            send_fatal(layer, exc.alert_code)
            record.alert_sent = exc.alert_code
            return
        if content_type == wire.ContentType.ALERT:
            return
        if content_type == wire.ContentType.CHANGE_CIPHER_SPEC:
            continue
        if content_type == wire.ContentType.HANDSHAKE:
            msgs, _rest = wire.iter_handshake_messages(payload)
            msg_type = msgs[0][0] if msgs else payload[0] if payload else None
            if msg_type == wire.HandshakeType.CLIENT_HELLO:
                renegotiation = False
                if msgs:
                    try:
                        ch2 = wire.parse_client_hello(msgs[0][1])
                        renegotiation = ch2.ext(wire.ExtensionType.RENEGOTIATION_INFO) is not None
                    except wire.DecodeError:
                        renegotiation = False
                if renegotiation and policy.ambiguous_renegotiation:
                    continue  # silently swallowed: the ambiguity under test
                if not renegotiation and policy.accept_duplicate_ch:
                    continue  # duplicate ClientHello silently accepted
                send_fatal(layer, wire.AlertDescription.UNEXPECTED_MESSAGE)
                record.alert_sent = wire.AlertDescription.UNEXPECTED_MESSAGE
                return
            if msg_type == wire.HandshakeType.KEY_UPDATE:
                continue
            send_fatal(layer, wire.AlertDescription.UNEXPECTED_MESSAGE)
            record.alert_sent = wire.AlertDescription.UNEXPECTED_MESSAGE
            return
        if content_type == wire.ContentType.APPLICATION_DATA:
            if app_handler is None:
                continue
            app_buffer = app_handler(layer, app_buffer + payload, record)
            if app_buffer is None:
                return
