"""TLS 1.3 client handshake driver; fills a TestContext per session.

A context is marked successful only after the server Finished MAC verified
and the client Finished was sent; everything else leaves the failure and
any alert observed on the context instead of raising.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
import os
import time

from ..crypto import aead, kdf, kem, sig as sigmod
from . import wire
from .common import AlertReceived, MessageReader, TlsFailure, Transcript, send_fatal, \
    verify_certificate_message
from .context import AlertRecord, HandshakeConfig, ResumptionTicket, TestContext, Timings
from .record import ConnectionClosed, RecordError, RecordLayer

_US = 1_000_000


def _now() -> float:
    return time.perf_counter()


def _us(t0: float) -> int:
    return max(1, int((_now() - t0) * _US))


def generate_key_shares(config: HandshakeConfig, only_group: int | None = None):
    """Keypairs for the share-bearing groups; returns (entries, pairs, keygen_us)."""
    entries: list[tuple[int, bytes]] = []
    pairs: dict[int, kem.KemKeyPair] = {}
    keygen_us = 0
    groups = [only_group] if only_group is not None else config.offered_groups
    for group in groups:
        if only_group is None and len(entries) >= config.share_count:
            break
        try:
            alg = kem.lookup(group)
        except kem.KemError:
            continue
        if not alg.implemented:
            continue
        t0 = _now()
        pair = kem.keygen(alg)
        keygen_us += _us(t0)
        pairs[group] = pair
        entries.append((group, pair.encapsulation_key))
    return entries, pairs, keygen_us


def build_client_hello(config: HandshakeConfig,
                       shares: list[tuple[int, bytes]],
                       session_id: bytes,
                       client_random: bytes,
                       psk_binder_stub: ResumptionTicket | None = None) -> bytes:
    """Raw ClientHello handshake message (header included).

    Offered lists go on the wire in configured order. With a resumption
    ticket the pre_shared_key extension is appended last carrying a
    zero-filled binder; the caller patches the real binder in.
    """
    extensions = []
    if config.sni:
        extensions.append(wire.sni_extension(config.sni))
    if config.offer_tls13:
        extensions.append(wire.supported_versions_extension([wire.TLS13]))
    extensions.append(wire.supported_groups_extension(config.offered_groups))
    extensions.append(wire.signature_algorithms_extension(config.offered_sig_schemes))
    extensions.append(wire.key_share_extension(shares))
    if config.alpn:
        extensions.append(wire.alpn_extension(config.alpn))
    if psk_binder_stub is not None:
        extensions.append(wire.psk_modes_extension([1]))  # psk_dhe_ke
        hash_len = 48 if psk_binder_stub.hash_name == "sha384" else 32
        extensions.append(wire.pre_shared_key_extension(
            [(psk_binder_stub.ticket, psk_binder_stub.age_add)], [bytes(hash_len)]))
    body = wire.build_client_hello_body(
        client_random, session_id, config.cipher_suites, extensions,
        compression=config.compression_methods, legacy_version=config.legacy_version)
    return wire.handshake_message(wire.HandshakeType.CLIENT_HELLO, body)


def _patch_binder(raw_ch: bytes, ticket: ResumptionTicket, transcript_prefix: list[bytes]) -> bytes:
    hash_name = ticket.hash_name
    hash_len = 48 if hash_name == "sha384" else 32
    binders_len = 2 + 1 + hash_len  # vec16 of one vec8 binder
    truncated = raw_ch[:-binders_len]
    h = hashlib.new(hash_name)
    for m in transcript_prefix:
        h.update(m)
    h.update(truncated)
    early = kdf.hkdf_extract(bytes(hash_len), ticket.psk, hash_name)
    binder_key = kdf.derive_secret(early, "res binder", kdf.empty_hash(hash_name), hash_name)
    binder = kdf.finished_mac(binder_key, h.digest(), hash_name)
    return truncated + wire.u16(1 + hash_len) + wire.u8(hash_len) + binder


class ClientSession:
    """Post-handshake application I/O over the negotiated record layer."""

    def __init__(self, layer: RecordLayer, reader: MessageReader, sock):
        self.layer = layer
        self.reader = reader
        self.sock = sock

    def send(self, data: bytes) -> None:
        self.layer.write_record(wire.ContentType.APPLICATION_DATA, data)

    def recv(self, timeout: float = 5.0) -> bytes:
        """One application-data payload; b"" on close/alert."""
        saved = self.sock.gettimeout()
        self.sock.settimeout(timeout)
        try:
            while True:
                content_type, payload = self.layer.read_record()
                if content_type == wire.ContentType.APPLICATION_DATA:
                    return payload
                if content_type == wire.ContentType.ALERT:
                    return b""
                # NewSessionTicket and similar post-handshake messages skipped
        except (ConnectionClosed, OSError, RecordError):
            return b""
        finally:
            try:
                self.sock.settimeout(saved)
            except OSError:
                pass

    def observe(self, timeout: float = 2.0) -> tuple[str, int | None]:
        """Peek at the server's next move: ('alert', code) | ('data'|'handshake', None)
        | ('closed'|'timeout', None)."""
        saved = self.sock.gettimeout()
        self.sock.settimeout(timeout)
        try:
            content_type, payload = self.layer.read_record()
            if content_type == wire.ContentType.ALERT and len(payload) == 2:
                return "alert", payload[1]
            if content_type == wire.ContentType.APPLICATION_DATA:
                return "data", None
            return "handshake", None
        except ConnectionClosed:
            return "closed", None
        except TimeoutError:
            return "timeout", None
        except OSError:
            return "closed", None
        except RecordError:
            return "closed", None
        finally:
            try:
                self.sock.settimeout(saved)
            except OSError:
                pass

    def close(self) -> None:
        try:
            self.layer.send_alert(wire.AlertDescription.CLOSE_NOTIFY, level=1)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def client_handshake(sock, config: HandshakeConfig, target: str = "") -> TestContext:
    ctx = TestContext(target=target, server_name=config.sni)
    layer = RecordLayer(sock, record_version=config.record_version)
    reader = MessageReader(layer)
    transcript = Transcript()
    start = _now()
    try:
        _run_client(ctx, layer, reader, transcript, config, start)
        if ctx.successful:
            ctx.session = ClientSession(layer, reader, sock)
    except AlertReceived as exc:
        ctx.failure = f"handshake failed: {exc}"
        ctx.alert = AlertRecord(exc.level, exc.description, "received")
    except TlsFailure as exc:
        send_fatal(layer, exc.alert_code)
        ctx.failure = f"handshake failed: {exc}"
        ctx.alert = AlertRecord(2, exc.alert_code, "sent")
    except RecordError as exc:
        send_fatal(layer, exc.alert_code)
        ctx.failure = f"handshake failed: {exc}"
        ctx.alert = AlertRecord(2, exc.alert_code, "sent")
    except (ConnectionClosed, OSError) as exc:
        ctx.failure = f"transport error: {exc}"
    finally:
        ctx.counters = layer.counters
    return ctx


def _run_client(ctx: TestContext, layer: RecordLayer, reader: MessageReader,
                transcript: Transcript, config: HandshakeConfig, start: float) -> None:
    client_random = os.urandom(32)
    session_id = os.urandom(32)
    ctx.client_random = client_random

    shares, pairs, keygen_us = generate_key_shares(config)
    ctx.timings.keygen_us = keygen_us
    if config.offer_tls13 and not shares:
        raise TlsFailure("no share-bearing group available", wire.AlertDescription.INTERNAL_ERROR)

    raw_ch = build_client_hello(config, shares, session_id, client_random,
                                psk_binder_stub=config.resumption)
    if config.resumption is not None:
        raw_ch = _patch_binder(raw_ch, config.resumption, [])
    ctx.raw_client_hello = raw_ch
    if shares:
        ctx.client_public_key = shares[0][1]
    transcript.append(raw_ch)
    layer.write_record(wire.ContentType.HANDSHAKE, raw_ch)

    msg_type, body, raw = reader.next_message()
    if msg_type != wire.HandshakeType.SERVER_HELLO:
        raise TlsFailure(f"expected ServerHello, got message type {msg_type}",
                         wire.AlertDescription.UNEXPECTED_MESSAGE)
    sh = wire.parse_server_hello(body)

    if not config.offer_tls13:
        # legacy-version probe: reaching a ServerHello at all means the
        # server accepted the downgrade offer
        ctx.raw_server_hello = raw
        ctx.tls_version = sh.selected_version or sh.legacy_version
        ctx.cipher_suite = sh.cipher_suite
        ctx.failure = "server accepted legacy version offer"
        return

    if sh.is_hrr:
        ctx.hello_retry = True
        ks = sh.key_share()
        if ks is None:
            raise TlsFailure("HelloRetryRequest without key_share",
                             wire.AlertDescription.MISSING_EXTENSION)
        requested = ks[0]
        if requested not in config.offered_groups:
            raise TlsFailure("HRR requested a group we never offered",
                             wire.AlertDescription.ILLEGAL_PARAMETER)
        if requested in pairs:
            raise TlsFailure("HRR requested a group whose share was already sent",
                             wire.AlertDescription.ILLEGAL_PARAMETER)
        hash_name = aead.SUITES[sh.cipher_suite].hash_name if sh.cipher_suite in aead.SUITES else "sha256"
        transcript.replace_first_with_hash(hash_name)
        transcript.append(raw)
        shares, pairs, extra_us = generate_key_shares(config, only_group=requested)
        ctx.timings.keygen_us += extra_us
        raw_ch = build_client_hello(config, shares, session_id, client_random)
        ctx.raw_client_hello = raw_ch
        ctx.client_public_key = shares[0][1]
        transcript.append(raw_ch)
        layer.write_record(wire.ContentType.HANDSHAKE, raw_ch)
        msg_type, body, raw = reader.next_message()
        if msg_type != wire.HandshakeType.SERVER_HELLO:
            raise TlsFailure("expected ServerHello after retry",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)
        sh = wire.parse_server_hello(body)
        if sh.is_hrr:
            raise TlsFailure("second HelloRetryRequest",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)

    ctx.raw_server_hello = raw
    ctx.server_random = sh.random
    ctx.cipher_suite = sh.cipher_suite  # raw observation, validated below
    transcript.append(raw)

    if sh.selected_version != wire.TLS13:
        raise TlsFailure("server did not select TLS 1.3",
                         wire.AlertDescription.PROTOCOL_VERSION)
    ctx.tls_version = wire.TLS13
    if sh.cipher_suite not in config.cipher_suites:
        raise TlsFailure("server selected a cipher suite we never offered",
                         wire.AlertDescription.ILLEGAL_PARAMETER)
    suite = aead.SUITES.get(sh.cipher_suite)
    if suite is None or not suite.implemented:
        raise TlsFailure("server selected an unimplemented suite",
                         wire.AlertDescription.ILLEGAL_PARAMETER)
    ctx.cipher_suite = sh.cipher_suite

    ks = sh.key_share()
    if ks is None:
        raise TlsFailure("ServerHello lacks key_share", wire.AlertDescription.MISSING_EXTENSION)
    group, server_opaque = ks
    if group not in config.offered_groups:
        raise TlsFailure("server selected a group we never offered",
                         wire.AlertDescription.ILLEGAL_PARAMETER)
    if group not in pairs:
        raise TlsFailure("server selected a group without a client share",
                         wire.AlertDescription.ILLEGAL_PARAMETER)
    ctx.key_exchange_group = group
    ctx.server_key_share = server_opaque

    alg = kem.lookup(group)
    if len(server_opaque) != alg.ct_len:
        raise TlsFailure(
            f"server key share is {len(server_opaque)} bytes, expected {alg.ct_len}",
            wire.AlertDescription.ILLEGAL_PARAMETER)
    ctx.kem_ciphertext = server_opaque if alg.kind != "classical" else b""
    t0 = _now()
    shared_secret = kem.decapsulate(alg, pairs[group].decapsulation_key, server_opaque)
    ctx.timings.decap_us = _us(t0)
    ctx.shared_secret_size = len(shared_secret)

    psk = b""
    if config.resumption is not None and sh.selected_psk == 0:
        psk = config.resumption.psk
        ctx.resumed = True

    hash_name = suite.hash_name
    hello_hash = transcript.hash(hash_name)
    schedule = kdf.derive_key_schedule(
        shared_secret,
        kdf.ScheduleTranscripts(hello_hash, b""),
        hash_name, psk=psk)
    layer.install_suite(suite)
    layer.set_read_secret(schedule.server_handshake_traffic_secret)

    cert_request = None
    chain_der: list[bytes] = []
    cv_scheme = None
    cv_sig = b""
    transcript_to_cert = b""
    while True:
        msg_type, body, raw = reader.next_message()
        if msg_type == wire.HandshakeType.ENCRYPTED_EXTENSIONS:
            ee = wire.parse_encrypted_extensions(body)
            ctx.alpn_result = ee["alpn"]
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.CERTIFICATE_REQUEST:
            cert_request = wire.parse_certificate_request(body)
            ctx.certificate_request_seen = True
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.CERTIFICATE:
            _ctx_field, chain_der = wire.parse_certificate_msg(body)
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.CERTIFICATE_VERIFY:
            transcript_to_cert = transcript.hash(hash_name)
            cv_scheme, cv_sig = wire.parse_certificate_verify(body)
            transcript.append(raw)
        elif msg_type == wire.HandshakeType.FINISHED:
            break
        else:
            raise TlsFailure(f"unexpected handshake message {msg_type}",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)

    if not ctx.resumed:
        if not chain_der or cv_scheme is None:
            raise TlsFailure("server omitted Certificate/CertificateVerify",
                             wire.AlertDescription.UNEXPECTED_MESSAGE)
        if cv_scheme not in config.offered_sig_schemes:
            raise TlsFailure("CertificateVerify scheme was never offered",
                             wire.AlertDescription.ILLEGAL_PARAMETER)
        t0 = _now()
        views, findings = verify_certificate_message(
            chain_der, cv_scheme, cv_sig, transcript_to_cert,
            wire.SERVER_CV_CONTEXT,
            trust_anchors=config.trust_anchors,
            expected_name=config.expected_name or config.sni)
        ctx.timings.verify_us = _us(t0)
        ctx.signature_scheme = cv_scheme
        ctx.signature_size = len(cv_sig)
        ctx.cert_chain = views
        ctx.cert_chain_der = chain_der
        ctx.chain_findings = findings
        if config.verify_chain and any("does not verify" in f or "trust anchor" in f
                                       for f in findings):
            raise TlsFailure("certificate chain rejected", wire.AlertDescription.BAD_CERTIFICATE)

    # server Finished check (transcript excludes the Finished itself)
    finished_transcript = transcript.hash(hash_name)
    expected = kdf.finished_mac(schedule.server_handshake_traffic_secret,
                                finished_transcript, hash_name)
    if not hmac_mod.compare_digest(expected, body):
        raise TlsFailure("server Finished MAC mismatch", wire.AlertDescription.DECRYPT_ERROR)
    transcript.append(raw)

    server_fin_hash = transcript.hash(hash_name)
    schedule2 = kdf.derive_key_schedule(
        shared_secret, kdf.ScheduleTranscripts(hello_hash, server_fin_hash),
        hash_name, psk=psk)
    ctx.key_schedule = schedule2

    layer.write_record(wire.ContentType.CHANGE_CIPHER_SPEC, b"\x01")
    layer.set_write_secret(schedule2.client_handshake_traffic_secret)

    if cert_request is not None:
        cred = config.client_credential
        if cred is not None and cred.scheme_id in cert_request["signature_algorithms"]:
            cert_msg = wire.handshake_message(
                wire.HandshakeType.CERTIFICATE,
                wire.build_certificate_msg(cred.chain_der, cert_request["context"]))
            transcript.append(cert_msg)
            layer.write_record(wire.ContentType.HANDSHAKE, cert_msg)
            signed = wire.CLIENT_CV_CONTEXT + transcript.hash(hash_name)
            t0 = _now()
            signature = sigmod.sign(sigmod.lookup(cred.scheme_id), cred.private_key, signed)
            ctx.timings.sign_us = _us(t0)
            cv_msg = wire.handshake_message(
                wire.HandshakeType.CERTIFICATE_VERIFY,
                wire.build_certificate_verify(cred.scheme_id, signature))
            transcript.append(cv_msg)
            layer.write_record(wire.ContentType.HANDSHAKE, cv_msg)
            ctx.mutual_tls = True
        else:
            empty = wire.handshake_message(wire.HandshakeType.CERTIFICATE,
                                           wire.build_certificate_msg([], cert_request["context"]))
            transcript.append(empty)
            layer.write_record(wire.ContentType.HANDSHAKE, empty)

    client_fin = kdf.finished_mac(schedule2.client_handshake_traffic_secret,
                                  transcript.hash(hash_name), hash_name)
    fin_msg = wire.handshake_message(wire.HandshakeType.FINISHED, client_fin)
    transcript.append(fin_msg)
    layer.write_record(wire.ContentType.HANDSHAKE, fin_msg)
    ctx.timings.handshake_total_ms = max(0.001, (_now() - start) * 1000)

    # resumption-stage secrets need the client-Finished transcript
    full = kdf.derive_key_schedule(
        shared_secret,
        kdf.ScheduleTranscripts(hello_hash, server_fin_hash, transcript.hash(hash_name)),
        hash_name, psk=psk)
    schedule2.resumption_master_secret = full.resumption_master_secret
    layer.set_read_secret(schedule2.server_application_traffic_secret)
    layer.set_write_secret(schedule2.client_application_traffic_secret)
    ctx.successful = True

    if config.store_ticket:
        _read_session_ticket(ctx, reader, schedule2, hash_name, sh.cipher_suite)


def _read_session_ticket(ctx: TestContext, reader: MessageReader, schedule,
                         hash_name: str, suite_id: int) -> None:
    try:
        ctx.ticket = None
        saved = reader.layer.sock.gettimeout()
        reader.layer.sock.settimeout(1.0)
        try:
            msg_type, body, _raw = reader.next_message()
        finally:
            reader.layer.sock.settimeout(saved)
        if msg_type != wire.HandshakeType.NEW_SESSION_TICKET:
            return
        nst = wire.parse_new_session_ticket(body)
        hash_len = 48 if hash_name == "sha384" else 32
        psk = kdf.hkdf_expand_label(schedule.resumption_master_secret, "resumption",
                                    nst["nonce"], hash_len, hash_name)
        ctx.ticket = ResumptionTicket(nst["ticket"], psk, hash_name, suite_id,
                                      nst["age_add"])
    except Exception:
        ctx.ticket = None
