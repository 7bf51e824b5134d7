"""Minimal HTTP/2 GET client for service-discovery checks.

Single stream, no push, static-table-only header compression on send.
The response decoder handles indexed fields, literals (with or without
incremental indexing), and dynamic-table references it has seen itself;
Huffman-coded literals are out of scope and reported as findings.
"""

from __future__ import annotations

import struct

PREFACE = b"PRI * HTTP/2.0\r\n\r\nSM\r\n\r\n"

FRAME_DATA = 0x0
FRAME_HEADERS = 0x1
FRAME_RST_STREAM = 0x3
FRAME_SETTINGS = 0x4
FRAME_PING = 0x6
FRAME_GOAWAY = 0x7
FRAME_WINDOW_UPDATE = 0x8

FLAG_END_STREAM = 0x1
FLAG_END_HEADERS = 0x4
FLAG_ACK = 0x1

# HPACK static table (RFC 7541 appendix A), 1-based
STATIC_TABLE = [
    (":authority", ""), (":method", "GET"), (":method", "POST"), (":path", "/"),
    (":path", "/index.html"), (":scheme", "http"), (":scheme", "https"),
    (":status", "200"), (":status", "204"), (":status", "206"), (":status", "304"),
    (":status", "400"), (":status", "404"), (":status", "500"), ("accept-charset", ""),
    ("accept-encoding", "gzip, deflate"), ("accept-language", ""), ("accept-ranges", ""),
    ("accept", ""), ("access-control-allow-origin", ""), ("age", ""), ("allow", ""),
    ("authorization", ""), ("cache-control", ""), ("content-disposition", ""),
    ("content-encoding", ""), ("content-language", ""), ("content-length", ""),
    ("content-location", ""), ("content-range", ""), ("content-type", ""), ("cookie", ""),
    ("date", ""), ("etag", ""), ("expect", ""), ("expires", ""), ("from", ""),
    ("host", ""), ("if-match", ""), ("if-modified-since", ""), ("if-none-match", ""),
    ("if-range", ""), ("if-unmodified-since", ""), ("last-modified", ""), ("link", ""),
    ("location", ""), ("max-forwards", ""), ("proxy-authenticate", ""),
    ("proxy-authorization", ""), ("range", ""), ("referer", ""), ("refresh", ""),
    ("retry-after", ""), ("server", ""), ("set-cookie", ""), ("strict-transport-security", ""),
    ("transfer-encoding", ""), ("user-agent", ""), ("vary", ""), ("via", ""),
    ("www-authenticate", ""),
]
_STATIC_INDEX = {entry: i + 1 for i, entry in enumerate(STATIC_TABLE)}
_STATIC_NAME_INDEX = {}
for i, (name, _v) in enumerate(STATIC_TABLE):
    _STATIC_NAME_INDEX.setdefault(name, i + 1)


class H2Error(Exception):
    pass


def _encode_int(value: int, prefix_bits: int, top: int = 0) -> bytes:
    limit = (1 << prefix_bits) - 1
    if value < limit:
        return bytes([top | value])
    out = bytearray([top | limit])
    value -= limit
    while value >= 128:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)
    return bytes(out)


def _decode_int(data: bytes, pos: int, prefix_bits: int) -> tuple[int, int]:
    limit = (1 << prefix_bits) - 1
    value = data[pos] & limit
    pos += 1
    if value < limit:
        return value, pos
    shift = 0
    while True:
        if pos >= len(data):
            raise H2Error("truncated HPACK integer")
        byte = data[pos]
        pos += 1
        value += (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            return value, pos


def encode_headers(headers: list[tuple[str, str]]) -> bytes:
    """Static-table-only encoding: indexed where possible, literal otherwise."""
    out = bytearray()
    for name, value in headers:
        if (name, value) in _STATIC_INDEX:
            out += _encode_int(_STATIC_INDEX[(name, value)], 7, 0x80)
            continue
        name_idx = _STATIC_NAME_INDEX.get(name, 0)
        out += _encode_int(name_idx, 4, 0x00)  # literal without indexing
        if name_idx == 0:
            out += _encode_int(len(name), 7)
            out += name.encode("ascii")
        out += _encode_int(len(value), 7)
        out += value.encode("ascii")
    return bytes(out)


def decode_headers(data: bytes, dynamic: list[tuple[str, str]]) -> list[tuple[str, str]]:
    out = []
    pos = 0

    def table_entry(index: int) -> tuple[str, str]:
        if 1 <= index <= len(STATIC_TABLE):
            return STATIC_TABLE[index - 1]
        dyn_i = index - len(STATIC_TABLE) - 1
        if 0 <= dyn_i < len(dynamic):
            return dynamic[dyn_i]
        raise H2Error(f"HPACK index {index} out of range")

    def read_string() -> str:
        nonlocal pos
        huffman = bool(data[pos] & 0x80)
        length, p2 = _decode_int(data, pos, 7)
        pos = p2
        raw = data[pos: pos + length]
        pos += length
        if huffman:
            raise H2Error("Huffman-coded header field (unsupported)")
        return raw.decode("utf-8", "replace")

    while pos < len(data):
        byte = data[pos]
        if byte & 0x80:  # indexed
            index, pos = _decode_int(data, pos, 7)
            out.append(table_entry(index))
        elif byte & 0x40:  # literal with incremental indexing
            index, pos = _decode_int(data, pos, 6)
            name = table_entry(index)[0] if index else read_string()
            value = read_string()
            dynamic.insert(0, (name, value))
            out.append((name, value))
        elif byte & 0x20:  # dynamic table size update
            _size, pos = _decode_int(data, pos, 5)
        else:  # literal without indexing / never indexed
            index, pos = _decode_int(data, pos, 4)
            name = table_entry(index)[0] if index else read_string()
            value = read_string()
            out.append((name, value))
    return out


def frame(frame_type: int, flags: int, stream_id: int, payload: bytes) -> bytes:
    return struct.pack(">I", len(payload))[1:] + bytes([frame_type, flags]) \
        + struct.pack(">I", stream_id & 0x7FFFFFFF) + payload


def parse_frames(buffer: bytes):
    """Yields (type, flags, stream_id, payload); returns leftover bytes."""
    frames = []
    pos = 0
    while pos + 9 <= len(buffer):
        length = (buffer[pos] << 16) | (buffer[pos + 1] << 8) | buffer[pos + 2]
        if pos + 9 + length > len(buffer):
            break
        ftype = buffer[pos + 3]
        flags = buffer[pos + 4]
        stream_id = struct.unpack(">I", buffer[pos + 5: pos + 9])[0] & 0x7FFFFFFF
        frames.append((ftype, flags, stream_id, buffer[pos + 9: pos + 9 + length]))
        pos += 9 + length
    return frames, buffer[pos:]


def h2_get(session, path: str, authority: str, timeout: float = 5.0) -> dict:
    """One GET over an established TLS session with negotiated ALPN h2.

    Returns {"status": int|None, "headers": [...], "body": bytes,
    "findings": [...]}.
    """
    findings: list[str] = []
    session.send(PREFACE + frame(FRAME_SETTINGS, 0, 0, b""))
    header_block = encode_headers([
        (":method", "GET"),
        (":scheme", "https"),
        (":authority", authority),
        (":path", path),
        ("accept", "application/json"),
    ])
    session.send(frame(FRAME_HEADERS, FLAG_END_HEADERS | FLAG_END_STREAM, 1, header_block))

    buffer = b""
    dynamic: list[tuple[str, str]] = []
    status = None
    headers: list[tuple[str, str]] = []
    body = b""
    stream_done = False
    settings_acked = False
    while not stream_done:
        chunk = session.recv(timeout)
        if not chunk:
            findings.append("connection ended before the response completed")
            break
        buffer += chunk
        frames, buffer = parse_frames(buffer)
        for ftype, flags, stream_id, payload in frames:
            if ftype == FRAME_SETTINGS and not flags & FLAG_ACK:
                session.send(frame(FRAME_SETTINGS, FLAG_ACK, 0, b""))
                settings_acked = True
            elif ftype == FRAME_HEADERS and stream_id == 1:
                try:
                    headers = decode_headers(payload, dynamic)
                except H2Error as exc:
                    findings.append(f"HPACK decode: {exc}")
                for name, value in headers:
                    if name == ":status":
                        try:
                            status = int(value)
                        except ValueError:
                            findings.append(f"malformed :status {value!r}")
                if flags & FLAG_END_STREAM:
                    stream_done = True
            elif ftype == FRAME_DATA and stream_id == 1:
                body += payload
                if flags & FLAG_END_STREAM:
                    stream_done = True
            elif ftype == FRAME_GOAWAY:
                findings.append("server sent GOAWAY")
                stream_done = True
            elif ftype == FRAME_RST_STREAM and stream_id == 1:
                findings.append("server reset the request stream")
                stream_done = True
    if not settings_acked:
        findings.append("server never sent SETTINGS")
    return {"status": status, "headers": headers, "body": body, "findings": findings}
