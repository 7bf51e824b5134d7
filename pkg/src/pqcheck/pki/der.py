"""Minimal DER encode/decode. Definite lengths only; deterministic output."""

from __future__ import annotations

# universal tags
BOOLEAN = 0x01
INTEGER = 0x02
BIT_STRING = 0x03
OCTET_STRING = 0x04
NULL = 0x05
OID = 0x06
UTF8_STRING = 0x0C
PRINTABLE_STRING = 0x13
IA5_STRING = 0x16
UTC_TIME = 0x17
GENERALIZED_TIME = 0x18
SEQUENCE = 0x30
SET = 0x31


class DerError(ValueError):
    """Undecodable DER input."""


def encode_len(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    body = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(body)]) + body


def tlv(tag: int, value: bytes) -> bytes:
    return bytes([tag]) + encode_len(len(value)) + value


def seq(*parts: bytes) -> bytes:
    return tlv(SEQUENCE, b"".join(parts))


def octet_string(value: bytes) -> bytes:
    return tlv(OCTET_STRING, value)


def bit_string(value: bytes, unused: int = 0) -> bytes:
    return tlv(BIT_STRING, bytes([unused]) + value)


def integer(value: int) -> bytes:
    if value == 0:
        return tlv(INTEGER, b"\x00")
    body = value.to_bytes((value.bit_length() // 8) + 1, "big")
    # strip redundant leading zero while keeping the sign bit clear
    if len(body) > 1 and body[0] == 0 and body[1] < 0x80:
        body = body[1:]
    return tlv(INTEGER, body)


def boolean(value: bool) -> bytes:
    return tlv(BOOLEAN, b"\xff" if value else b"\x00")


def oid(dotted: str) -> bytes:
    arcs = [int(a) for a in dotted.split(".")]
    body = bytearray([40 * arcs[0] + arcs[1]])
    for arc in arcs[2:]:
        chunk = [arc & 0x7F]
        arc >>= 7
        while arc:
            chunk.append(0x80 | (arc & 0x7F))
            arc >>= 7
        body.extend(reversed(chunk))
    return tlv(OID, bytes(body))


def context(num: int, value: bytes, constructed: bool = True, explicit: bool = True) -> bytes:
    tag = 0x80 | num | (0x20 if constructed else 0)
    del explicit
    return tlv(tag, value)


def utf8(s: str) -> bytes:
    return tlv(UTF8_STRING, s.encode())


def ia5(s: str) -> bytes:
    return tlv(IA5_STRING, s.encode("ascii"))


# ---------------------------------------------------------------- decode

def read_tlv(data: bytes, pos: int = 0) -> tuple[int, bytes, int]:
    """Returns (tag, value, next_pos)."""
    if pos >= len(data):
        raise DerError("truncated DER: no tag byte")
    tag = data[pos]
    pos += 1
    if pos >= len(data):
        raise DerError("truncated DER: no length byte")
    first = data[pos]
    pos += 1
    if first < 0x80:
        length = first
    else:
        n = first & 0x7F
        if n == 0 or n > 4:
            raise DerError("unsupported DER length encoding")
        if pos + n > len(data):
            raise DerError("truncated DER length")
        length = int.from_bytes(data[pos: pos + n], "big")
        pos += n
    if pos + length > len(data):
        raise DerError("truncated DER value")
    return tag, data[pos: pos + length], pos + length


def iter_tlv(data: bytes):
    pos = 0
    while pos < len(data):
        tag, value, pos = read_tlv(data, pos)
        yield tag, value


def expect(data: bytes, tag: int, pos: int = 0) -> tuple[bytes, int]:
    got, value, nxt = read_tlv(data, pos)
    if got != tag:
        raise DerError(f"expected DER tag 0x{tag:02x}, got 0x{got:02x}")
    return value, nxt


def decode_oid(body: bytes) -> str:
    if not body:
        raise DerError("empty OID")
    arcs = [body[0] // 40, body[0] % 40]
    val = 0
    for byte in body[1:]:
        val = (val << 7) | (byte & 0x7F)
        if not byte & 0x80:
            arcs.append(val)
            val = 0
    return ".".join(str(a) for a in arcs)


def decode_integer(body: bytes) -> int:
    return int.from_bytes(body, "big", signed=False)
