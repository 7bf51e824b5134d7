"""TLS 1.3 record layer with exact byte accounting.

Every record read or written adds the 5-byte header plus the fragment
length to the direction's byte counter, so the counters reconcile exactly
against a transport-level tap. Encryption follows RFC 8446 section 5.2
(inner plaintext with content-type trailer, per-record nonce = iv XOR
sequence number).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..crypto import aead, kdf
from . import wire

MAX_PLAINTEXT = 1 << 14
MAX_CIPHERTEXT = (1 << 14) + 256
HEADER_LEN = 5


class RecordError(Exception):
    def __init__(self, message: str, alert_code: int):
        super().__init__(message)
        self.alert_code = alert_code


class ConnectionClosed(Exception):
    """Peer closed the transport."""


@dataclass
class RecordCounters:
    bytes_sent: int = 0
    bytes_received: int = 0
    records_sent: int = 0
    records_received: int = 0


@dataclass
class _DirectionState:
    key: bytes
    iv: bytes
    seq: int = 0

    def next_nonce(self) -> bytes:
        nonce = bytearray(self.iv)
        seq_bytes = struct.pack(">Q", self.seq)
        for i in range(8):
            nonce[len(nonce) - 8 + i] ^= seq_bytes[i]
        self.seq += 1
        return bytes(nonce)


class RecordLayer:
    """Owns one transport socket; single connection, single owner."""

    def __init__(self, sock, record_version: int = wire.TLS12):
        self.sock = sock
        self.counters = RecordCounters()
        self.suite: aead.AeadSuite | None = None
        self._read_state: _DirectionState | None = None
        self._write_state: _DirectionState | None = None
        self._rx_buffer = b""
        self.record_version = record_version

    # ----------------------------------------------------------- keying

    def install_suite(self, suite: aead.AeadSuite) -> None:
        self.suite = suite

    def set_read_secret(self, secret: bytes) -> None:
        key, iv = kdf.traffic_keys(secret, self.suite.key_len, self.suite.nonce_len,
                                   self.suite.hash_name)
        self._read_state = _DirectionState(key, iv)

    def set_write_secret(self, secret: bytes) -> None:
        key, iv = kdf.traffic_keys(secret, self.suite.key_len, self.suite.nonce_len,
                                   self.suite.hash_name)
        self._write_state = _DirectionState(key, iv)

    @property
    def encrypting(self) -> bool:
        return self._write_state is not None

    # ------------------------------------------------------------- send

    def write_record(self, content_type: int, payload: bytes) -> None:
        if self._write_state is None:
            for start in range(0, max(len(payload), 1), MAX_PLAINTEXT):
                fragment = payload[start: start + MAX_PLAINTEXT]
                self._send_raw(content_type, fragment)
            return
        limit = MAX_PLAINTEXT - 1  # room for the inner content-type octet
        for start in range(0, max(len(payload), 1), limit):
            fragment = payload[start: start + limit]
            inner = fragment + bytes([content_type])
            state = self._write_state
            header = bytes([wire.ContentType.APPLICATION_DATA]) + wire.u16(wire.TLS12)
            sealed_len = len(inner) + self.suite.tag_len
            aad = header + wire.u16(sealed_len)
            sealed = aead.seal(self.suite, state.key, state.next_nonce(), inner, aad)
            self._send_bytes(aad + sealed)

    def _send_raw(self, content_type: int, fragment: bytes) -> None:
        self._send_bytes(bytes([content_type]) + wire.u16(self.record_version)
                         + wire.u16(len(fragment)) + fragment)

    def _send_bytes(self, record: bytes) -> None:
        self.sock.sendall(record)
        self.counters.bytes_sent += len(record)
        self.counters.records_sent += 1

    def send_alert(self, description: int, level: int = 2) -> None:
        self.write_record(wire.ContentType.ALERT, wire.alert(level, description))

    # ------------------------------------------------------------- recv

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        got = 0
        while got < n:
            chunk = self.sock.recv(n - got)
            if not chunk:
                raise ConnectionClosed("transport closed")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def read_record(self) -> tuple[int, bytes]:
        """Returns (content_type, plaintext payload); decrypts when keyed."""
        header = self._recv_exact(HEADER_LEN)
        content_type = header[0]
        length = struct.unpack(">H", header[3:5])[0]
        if content_type not in (wire.ContentType.CHANGE_CIPHER_SPEC, wire.ContentType.ALERT,
                                wire.ContentType.HANDSHAKE, wire.ContentType.APPLICATION_DATA):
            self.counters.bytes_received += HEADER_LEN
            self.counters.records_received += 1
            raise RecordError(f"invalid record content type {content_type}",
                              wire.AlertDescription.UNEXPECTED_MESSAGE)
        if length > MAX_CIPHERTEXT:
            self.counters.bytes_received += HEADER_LEN
            self.counters.records_received += 1
            raise RecordError(f"record length {length} exceeds limit",
                              wire.AlertDescription.RECORD_OVERFLOW)
        fragment = self._recv_exact(length)
        self.counters.bytes_received += HEADER_LEN + length
        self.counters.records_received += 1
        if (self._read_state is None
                or content_type != wire.ContentType.APPLICATION_DATA):
            if content_type == wire.ContentType.HANDSHAKE and length > MAX_PLAINTEXT:
                raise RecordError("plaintext record exceeds 2^14",
                                  wire.AlertDescription.RECORD_OVERFLOW)
            return content_type, fragment
        state = self._read_state
        aad = header
        try:
            inner = aead.open_(self.suite, state.key, state.next_nonce(), fragment, aad)
        except aead.AeadError as exc:
            raise RecordError("record decryption failed",
                              wire.AlertDescription.BAD_RECORD_MAC) from exc
        end = len(inner)
        while end > 0 and inner[end - 1] == 0:
            end -= 1
        if end == 0:
            raise RecordError("inner plaintext had no content type",
                              wire.AlertDescription.UNEXPECTED_MESSAGE)
        return inner[end - 1], inner[: end - 1]
