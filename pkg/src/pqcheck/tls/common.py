"""Shared handshake machinery: message reader, transcript, chain checks."""

from __future__ import annotations

import hashlib

from ..pki import x509
from . import wire
from .record import RecordLayer, RecordError


class TlsFailure(Exception):
    """Handshake cannot proceed; carries the alert to send."""

    def __init__(self, message: str, alert_code: int = wire.AlertDescription.HANDSHAKE_FAILURE):
        super().__init__(message)
        self.alert_code = alert_code


class AlertReceived(Exception):
    def __init__(self, level: int, description: int):
        name = wire.ALERT_NAMES.get(description, "unknown")
        super().__init__(f"received TLS alert: level={level}, description={description} ({name})")
        self.level = level
        self.description = description


class Transcript:
    """Running handshake transcript; supports the HRR message-hash rewrite."""

    def __init__(self):
        self.messages: list[bytes] = []

    def append(self, raw_msg: bytes) -> None:
        self.messages.append(raw_msg)

    def replace_first_with_hash(self, hash_name: str) -> None:
        digest = hashlib.new(hash_name, self.messages[0]).digest()
        self.messages[0] = wire.message_hash_stub(digest)

    def hash(self, hash_name: str) -> bytes:
        h = hashlib.new(hash_name)
        for m in self.messages:
            h.update(m)
        return h.digest()


class MessageReader:
    """Pulls complete handshake messages out of the record stream.

    Reassembles messages split across records and surfaces alerts as
    exceptions. ChangeCipherSpec records are ignored (middlebox
    compatibility mode).
    """

    def __init__(self, layer: RecordLayer):
        self.layer = layer
        self._pending: list[tuple[int, bytes, bytes]] = []
        self._buffer = b""

    def next_message(self) -> tuple[int, bytes, bytes]:
        while not self._pending:
            content_type, payload = self.layer.read_record()
            if content_type == wire.ContentType.CHANGE_CIPHER_SPEC:
                continue
            if content_type == wire.ContentType.ALERT:
                if len(payload) != 2:
                    raise TlsFailure("malformed alert record",
                                     wire.AlertDescription.DECODE_ERROR)
                raise AlertReceived(payload[0], payload[1])
            if content_type != wire.ContentType.HANDSHAKE:
                raise TlsFailure(f"unexpected content type {content_type} during handshake",
                                 wire.AlertDescription.UNEXPECTED_MESSAGE)
            if not payload:
                raise TlsFailure("empty handshake record",
                                 wire.AlertDescription.DECODE_ERROR)
            self._buffer += payload
            msgs, self._buffer = wire.iter_handshake_messages(self._buffer)
            self._pending.extend(msgs)
        return self._pending.pop(0)

    def next_post_handshake(self) -> tuple[int, bytes]:
        """Returns (content_type, payload) without handshake reassembly."""
        return self.layer.read_record()


def verify_certificate_message(chain_der: list[bytes], scheme_id: int, signature: bytes,
                               transcript_hash: bytes, context_string: bytes,
                               trust_anchors=None, expected_name: str = ""):
    """Verify CertificateVerify + walk the chain; returns (views, findings).

    A bad CertificateVerify signature raises (hard failure, never evidence);
    chain-shape and naming problems are findings for the compliance layer.
    """
    from ..crypto import sig as sigmod

    findings: list[str] = []
    views = []
    for der_bytes in chain_der:
        views.append(x509.parse_certificate(der_bytes))
    if not views:
        raise TlsFailure("empty certificate chain", wire.AlertDescription.DECODE_ERROR)
    leaf = views[0]
    scheme = sigmod.lookup(scheme_id)
    signed_content = context_string + transcript_hash
    if not sigmod.verify(scheme, leaf.spki_key_bytes, signed_content, signature):
        raise TlsFailure("CertificateVerify signature invalid",
                         wire.AlertDescription.DECRYPT_ERROR)

    for view in views:
        findings.extend(view.findings)
    if len(views) == 1:
        findings.append("chain depth 1 (leaf only)")
    for i in range(len(views) - 1):
        child, issuer = views[i], views[i + 1]
        if not x509.verify_certificate(child, issuer):
            findings.append(f"chain link {i} signature does not verify under link {i + 1}")
        status = "PQ" if child.is_pq_signed else "classical"
        findings.append(f"chain link {i} ({child.subject}) signed with "
                        f"{child.sig_oid} [{status}]")
    last = views[-1]
    findings.append(
        f"chain link {len(views) - 1} ({last.subject}) signed with "
        f"{last.sig_oid} [{'PQ' if last.is_pq_signed else 'classical'}]")

    if expected_name:
        if not any(_name_matches(expected_name, san) for san in leaf.sans):
            findings.append(
                f"SAN mismatch: expected {expected_name}, certificate offers "
                + (", ".join(leaf.sans) if leaf.sans else "no SANs"))
    if trust_anchors:
        root = views[-1]
        anchored = any(x509.verify_certificate(root, anchor) or
                       anchor.raw_der == root.raw_der for anchor in trust_anchors)
        if not anchored:
            findings.append("chain does not terminate at a configured trust anchor")
    return views, findings


def _name_matches(expected: str, san: str) -> bool:
    if san.startswith("*."):
        return expected.split(".", 1)[-1] == san[2:]
    return expected.lower() == san.lower()


def send_fatal(layer: RecordLayer, code: int) -> None:
    try:
        layer.send_alert(code)
    except Exception:
        pass
