"""TLS 1.3 wire format: handshake message codecs and constants."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field


class ContentType:
    CHANGE_CIPHER_SPEC = 20
    ALERT = 21
    HANDSHAKE = 22
    APPLICATION_DATA = 23


class HandshakeType:
    CLIENT_HELLO = 1
    SERVER_HELLO = 2
    NEW_SESSION_TICKET = 4
    END_OF_EARLY_DATA = 5
    ENCRYPTED_EXTENSIONS = 8
    CERTIFICATE = 11
    CERTIFICATE_REQUEST = 13
    CERTIFICATE_VERIFY = 15
    FINISHED = 20
    KEY_UPDATE = 24
    MESSAGE_HASH = 254


class ExtensionType:
    SERVER_NAME = 0
    SUPPORTED_GROUPS = 10
    SIGNATURE_ALGORITHMS = 13
    ALPN = 16
    COMPRESS_CERTIFICATE = 27
    PRE_SHARED_KEY = 41
    EARLY_DATA = 42
    SUPPORTED_VERSIONS = 43
    COOKIE = 44
    PSK_KEY_EXCHANGE_MODES = 45
    KEY_SHARE = 51
    RENEGOTIATION_INFO = 0xFF01


class AlertDescription:
    CLOSE_NOTIFY = 0
    UNEXPECTED_MESSAGE = 10
    BAD_RECORD_MAC = 20
    RECORD_OVERFLOW = 22
    HANDSHAKE_FAILURE = 40
    BAD_CERTIFICATE = 42
    UNSUPPORTED_CERTIFICATE = 43
    CERTIFICATE_EXPIRED = 45
    ILLEGAL_PARAMETER = 47
    UNKNOWN_CA = 48
    DECODE_ERROR = 50
    DECRYPT_ERROR = 51
    PROTOCOL_VERSION = 70
    INTERNAL_ERROR = 80
    MISSING_EXTENSION = 109
    CERTIFICATE_REQUIRED = 116
    NO_APPLICATION_PROTOCOL = 120


ALERT_NAMES = {
    0: "close_notify", 10: "unexpected_message", 20: "bad_record_mac",
    22: "record_overflow", 40: "handshake_failure", 42: "bad_certificate",
    43: "unsupported_certificate", 45: "certificate_expired",
    47: "illegal_parameter", 48: "unknown_ca", 50: "decode_error",
    51: "decrypt_error", 70: "protocol_version", 80: "internal_error",
    109: "missing_extension", 116: "certificate_required",
    120: "no_application_protocol",
}

TLS12 = 0x0303
TLS13 = 0x0304

# server random of a HelloRetryRequest (RFC 8446 section 4.1.3)
HRR_RANDOM = bytes.fromhex(
    "cf21ad74e59a6111be1d8c021e65b891c2a211167abb8c5e079e09e2c8a8339c")
# downgrade sentinels in the last 8 bytes of ServerHello.random
DOWNGRADE_TLS12 = bytes.fromhex("444f574e47524401")
DOWNGRADE_TLS11 = bytes.fromhex("444f574e47524400")

CLIENT_CV_CONTEXT = b"\x20" * 64 + b"TLS 1.3, client CertificateVerify" + b"\x00"
SERVER_CV_CONTEXT = b"\x20" * 64 + b"TLS 1.3, server CertificateVerify" + b"\x00"


class DecodeError(ValueError):
    """Malformed TLS structure."""


def u8(v: int) -> bytes:
    return struct.pack(">B", v)


def u16(v: int) -> bytes:
    return struct.pack(">H", v)


def u24(v: int) -> bytes:
    return struct.pack(">I", v)[1:]


def vec8(b: bytes) -> bytes:
    return u8(len(b)) + b


def vec16(b: bytes) -> bytes:
    return u16(len(b)) + b


def vec24(b: bytes) -> bytes:
    return u24(len(b)) + b


class Reader:
    """Bounds-checked cursor over a byte string."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("truncated structure")
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u24(self) -> int:
        b = self.take(3)
        return (b[0] << 16) | (b[1] << 8) | b[2]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def vec8(self) -> bytes:
        return self.take(self.u8())

    def vec16(self) -> bytes:
        return self.take(self.u16())

    def vec24(self) -> bytes:
        return self.take(self.u24())

    def expect_end(self) -> None:
        if self.remaining():
            raise DecodeError(f"{self.remaining()} trailing bytes")


def handshake_message(msg_type: int, body: bytes) -> bytes:
    return u8(msg_type) + vec24(body)


def extension(ext_type: int, body: bytes) -> bytes:
    return u16(ext_type) + vec16(body)


# ------------------------------------------------------------ ClientHello

@dataclass
class ClientHello:
    legacy_version: int
    random: bytes
    session_id: bytes
    cipher_suites: list[int]
    compression_methods: bytes
    extensions: list[tuple[int, bytes]]
    raw: bytes = b""

    def ext(self, ext_type: int) -> bytes | None:
        for t, body in self.extensions:
            if t == ext_type:
                return body
        return None

    @property
    def supported_versions(self) -> list[int] | None:
        body = self.ext(ExtensionType.SUPPORTED_VERSIONS)
        if body is None:
            return None
        r = Reader(body)
        versions = Reader(r.vec8())
        out = []
        while versions.remaining():
            out.append(versions.u16())
        return out

    @property
    def supported_groups(self) -> list[int]:
        body = self.ext(ExtensionType.SUPPORTED_GROUPS)
        if body is None:
            return []
        r = Reader(Reader(body).vec16())
        out = []
        while r.remaining():
            out.append(r.u16())
        return out

    @property
    def signature_algorithms(self) -> list[int]:
        body = self.ext(ExtensionType.SIGNATURE_ALGORITHMS)
        if body is None:
            return []
        r = Reader(Reader(body).vec16())
        out = []
        while r.remaining():
            out.append(r.u16())
        return out

    @property
    def key_shares(self) -> list[tuple[int, bytes]]:
        body = self.ext(ExtensionType.KEY_SHARE)
        if body is None:
            return []
        r = Reader(Reader(body).vec16())
        out = []
        while r.remaining():
            group = r.u16()
            out.append((group, r.vec16()))
        return out

    @property
    def server_name(self) -> str | None:
        body = self.ext(ExtensionType.SERVER_NAME)
        if body is None:
            return None
        r = Reader(Reader(body).vec16())
        while r.remaining():
            name_type = r.u8()
            name = r.vec16()
            if name_type == 0:
                return name.decode("ascii", "replace")
        return None

    @property
    def alpn(self) -> list[str]:
        body = self.ext(ExtensionType.ALPN)
        if body is None:
            return []
        r = Reader(Reader(body).vec16())
        out = []
        while r.remaining():
            out.append(r.vec8().decode("ascii", "replace"))
        return out


def build_client_hello_body(random: bytes, session_id: bytes, cipher_suites: list[int],
                            extensions: list[bytes], compression: bytes = b"\x00",
                            legacy_version: int = TLS12) -> bytes:
    suites = b"".join(u16(s) for s in cipher_suites)
    ext_blob = b"".join(extensions)
    return (u16(legacy_version) + random + vec8(session_id) + vec16(suites)
            + vec8(compression) + vec16(ext_blob))


def sni_extension(host: str) -> bytes:
    entry = u8(0) + vec16(host.encode("ascii"))
    return extension(ExtensionType.SERVER_NAME, vec16(entry))


def supported_versions_extension(versions: list[int]) -> bytes:
    return extension(ExtensionType.SUPPORTED_VERSIONS,
                     vec8(b"".join(u16(v) for v in versions)))


def supported_groups_extension(groups: list[int]) -> bytes:
    return extension(ExtensionType.SUPPORTED_GROUPS,
                     vec16(b"".join(u16(g) for g in groups)))


def signature_algorithms_extension(schemes: list[int]) -> bytes:
    return extension(ExtensionType.SIGNATURE_ALGORITHMS,
                     vec16(b"".join(u16(s) for s in schemes)))


def key_share_entry(group: int, opaque: bytes) -> bytes:
    # NamedGroup(u16) || u16 length || opaque key_exchange
    return u16(group) + vec16(opaque)


def key_share_extension(entries: list[tuple[int, bytes]]) -> bytes:
    blob = b"".join(key_share_entry(g, o) for g, o in entries)
    return extension(ExtensionType.KEY_SHARE, vec16(blob))


def alpn_extension(protocols: list[str]) -> bytes:
    blob = b"".join(vec8(p.encode("ascii")) for p in protocols)
    return extension(ExtensionType.ALPN, vec16(blob))


def psk_modes_extension(modes: list[int]) -> bytes:
    return extension(ExtensionType.PSK_KEY_EXCHANGE_MODES,
                     vec8(bytes(modes)))


def pre_shared_key_extension(identities: list[tuple[bytes, int]],
                             binders: list[bytes]) -> bytes:
    ids = b"".join(vec16(t) + struct.pack(">I", age) for t, age in identities)
    bds = b"".join(vec8(b) for b in binders)
    return extension(ExtensionType.PRE_SHARED_KEY, vec16(ids) + vec16(bds))


def parse_client_hello(body: bytes) -> ClientHello:
    r = Reader(body)
    version = r.u16()
    random = r.take(32)
    session_id = r.vec8()
    suites_raw = Reader(r.vec16())
    suites = []
    while suites_raw.remaining():
        suites.append(suites_raw.u16())
    compression = r.vec8()
    extensions = []
    if r.remaining():
        exts = Reader(r.vec16())
        while exts.remaining():
            ext_type = exts.u16()
            extensions.append((ext_type, exts.vec16()))
        r.expect_end()
    return ClientHello(version, random, session_id, suites, compression, extensions, body)


# ------------------------------------------------------------ ServerHello

@dataclass
class ServerHello:
    legacy_version: int
    random: bytes
    session_id: bytes
    cipher_suite: int
    extensions: list[tuple[int, bytes]]

    def ext(self, ext_type: int) -> bytes | None:
        for t, body in self.extensions:
            if t == ext_type:
                return body
        return None

    @property
    def is_hrr(self) -> bool:
        return self.random == HRR_RANDOM

    @property
    def selected_version(self) -> int | None:
        body = self.ext(ExtensionType.SUPPORTED_VERSIONS)
        if body is None:
            return None
        return Reader(body).u16()

    def key_share(self) -> tuple[int, bytes] | None:
        body = self.ext(ExtensionType.KEY_SHARE)
        if body is None:
            return None
        r = Reader(body)
        group = r.u16()
        if self.is_hrr:
            return group, b""
        return group, r.vec16()

    @property
    def selected_psk(self) -> int | None:
        body = self.ext(ExtensionType.PRE_SHARED_KEY)
        if body is None:
            return None
        return Reader(body).u16()


def build_server_hello_body(random: bytes, session_id: bytes, cipher_suite: int,
                            extensions: list[bytes], legacy_version: int = TLS12) -> bytes:
    return (u16(legacy_version) + random + vec8(session_id) + u16(cipher_suite)
            + u8(0) + vec16(b"".join(extensions)))


def parse_server_hello(body: bytes) -> ServerHello:
    r = Reader(body)
    version = r.u16()
    random = r.take(32)
    session_id = r.vec8()
    suite = r.u16()
    compression = r.u8()
    if compression != 0:
        raise DecodeError("non-null compression in ServerHello")
    extensions = []
    if r.remaining():
        exts = Reader(r.vec16())
        while exts.remaining():
            ext_type = exts.u16()
            extensions.append((ext_type, exts.vec16()))
    r.expect_end()
    return ServerHello(version, random, session_id, suite, extensions)


# ----------------------------------------------------- encrypted messages

def build_encrypted_extensions(alpn: str | None) -> bytes:
    exts = []
    if alpn:
        exts.append(alpn_extension([alpn]))
    return vec16(b"".join(exts))


def parse_encrypted_extensions(body: bytes) -> dict:
    r = Reader(body)
    exts = Reader(r.vec16())
    r.expect_end()
    out = {}
    while exts.remaining():
        ext_type = exts.u16()
        ext_body = exts.vec16()
        out[ext_type] = ext_body
    alpn = None
    if ExtensionType.ALPN in out:
        rr = Reader(Reader(out[ExtensionType.ALPN]).vec16())
        alpn = rr.vec8().decode("ascii", "replace")
    return {"extensions": out, "alpn": alpn}


def build_certificate_msg(chain_der: list[bytes], context: bytes = b"") -> bytes:
    entries = b"".join(vec24(cert) + vec16(b"") for cert in chain_der)
    return vec8(context) + vec24(entries)


def parse_certificate_msg(body: bytes) -> tuple[bytes, list[bytes]]:
    r = Reader(body)
    context = r.vec8()
    entries = Reader(r.vec24())
    r.expect_end()
    chain = []
    while entries.remaining():
        chain.append(entries.vec24())
        entries.vec16()  # per-entry extensions, ignored
    return context, chain


def build_certificate_request(sig_schemes: list[int], context: bytes = b"") -> bytes:
    exts = signature_algorithms_extension(sig_schemes)
    return vec8(context) + vec16(exts)


def parse_certificate_request(body: bytes) -> dict:
    r = Reader(body)
    context = r.vec8()
    exts = Reader(r.vec16())
    schemes: list[int] = []
    while exts.remaining():
        ext_type = exts.u16()
        ext_body = exts.vec16()
        if ext_type == ExtensionType.SIGNATURE_ALGORITHMS:
            rr = Reader(Reader(ext_body).vec16())
            while rr.remaining():
                schemes.append(rr.u16())
    return {"context": context, "signature_algorithms": schemes}


def build_certificate_verify(scheme: int, signature: bytes) -> bytes:
    return u16(scheme) + vec16(signature)


def parse_certificate_verify(body: bytes) -> tuple[int, bytes]:
    r = Reader(body)
    scheme = r.u16()
    signature = r.vec16()
    r.expect_end()
    return scheme, signature


def build_new_session_ticket(lifetime: int, age_add: int, nonce: bytes,
                             ticket: bytes) -> bytes:
    return (struct.pack(">I", lifetime) + struct.pack(">I", age_add)
            + vec8(nonce) + vec16(ticket) + vec16(b""))


def parse_new_session_ticket(body: bytes) -> dict:
    r = Reader(body)
    return {
        "lifetime": r.u32(),
        "age_add": r.u32(),
        "nonce": r.vec8(),
        "ticket": r.vec16(),
        "extensions": r.vec16(),
    }


def alert(level: int, description: int) -> bytes:
    return bytes([level, description])


def message_hash_stub(transcript_hash: bytes) -> bytes:
    """Synthetic message replacing ClientHello1 in HRR transcripts."""
    return handshake_message(HandshakeType.MESSAGE_HASH, transcript_hash)


def iter_handshake_messages(buffer: bytes):
    """Yield (msg_type, body, raw) for complete messages; returns leftover."""
    pos = 0
    out = []
    while pos + 4 <= len(buffer):
        msg_type = buffer[pos]
        length = (buffer[pos + 1] << 16) | (buffer[pos + 2] << 8) | buffer[pos + 3]
        if pos + 4 + length > len(buffer):
            break
        raw = buffer[pos: pos + 4 + length]
        out.append((msg_type, raw[4:], raw))
        pos += 4 + length
    return out, buffer[pos:]
