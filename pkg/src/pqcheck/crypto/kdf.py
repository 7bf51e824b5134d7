"""HKDF and the TLS 1.3 key schedule.

Every intermediate secret (early, handshake, master, per-direction traffic
secrets) is kept on the KeySchedule object so upper layers can audit the
full derivation chain. The KEM shared secret enters at the handshake-stage
HKDF-Extract step exactly where (EC)DHE output normally would.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field


def hkdf_extract(salt: bytes, ikm: bytes, hash_name: str = "sha256") -> bytes:
    if not salt:
        salt = bytes(hashlib.new(hash_name).digest_size)
    return hmac.new(salt, ikm, hash_name).digest()


def hkdf_expand(prk: bytes, info: bytes, length: int, hash_name: str = "sha256") -> bytes:
    out = b""
    block = b""
    counter = 1
    while len(out) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hash_name).digest()
        out += block
        counter += 1
    return out[:length]


def hkdf_expand_label(secret: bytes, label: str, context: bytes, length: int,
                      hash_name: str = "sha256") -> bytes:
    full = b"tls13 " + label.encode()
    info = length.to_bytes(2, "big") + bytes([len(full)]) + full + bytes([len(context)]) + context
    return hkdf_expand(secret, info, length, hash_name)


def derive_secret(secret: bytes, label: str, transcript_hash: bytes,
                  hash_name: str = "sha256") -> bytes:
    return hkdf_expand_label(secret, label, transcript_hash,
                             hashlib.new(hash_name).digest_size, hash_name)


def empty_hash(hash_name: str) -> bytes:
    return hashlib.new(hash_name, b"").digest()


@dataclass
class ScheduleTranscripts:
    """Transcript hashes at the three stage boundaries of the schedule."""

    hello: bytes             # ClientHello .. ServerHello
    server_finished: bytes   # .. server Finished
    client_finished: bytes | None = None  # .. client Finished (resumption stage)


@dataclass
class KeySchedule:
    hash_alg: str
    early_secret: bytes = b""
    handshake_secret: bytes = b""
    master_secret: bytes = b""
    client_handshake_traffic_secret: bytes = b""
    server_handshake_traffic_secret: bytes = b""
    client_application_traffic_secret: bytes = b""
    server_application_traffic_secret: bytes = b""
    resumption_master_secret: bytes = b""
    exporter_master_secret: bytes = b""
    binder_key: bytes = b""

    def stages(self) -> dict[str, bytes]:
        return {
            "early_secret": self.early_secret,
            "handshake_secret": self.handshake_secret,
            "master_secret": self.master_secret,
            "client_handshake_traffic_secret": self.client_handshake_traffic_secret,
            "server_handshake_traffic_secret": self.server_handshake_traffic_secret,
            "client_application_traffic_secret": self.client_application_traffic_secret,
            "server_application_traffic_secret": self.server_application_traffic_secret,
        }


def derive_key_schedule(shared_secret: bytes, transcripts: ScheduleTranscripts,
                        hash_name: str = "sha256", psk: bytes = b"",
                        external_psk: bool = False) -> KeySchedule:
    hlen = hashlib.new(hash_name).digest_size
    ks = KeySchedule(hash_alg=hash_name)
    ks.early_secret = hkdf_extract(bytes(hlen), psk or bytes(hlen), hash_name)
    ks.binder_key = derive_secret(
        ks.early_secret, "ext binder" if external_psk else "res binder",
        empty_hash(hash_name), hash_name)
    derived = derive_secret(ks.early_secret, "derived", empty_hash(hash_name), hash_name)
    ks.handshake_secret = hkdf_extract(derived, shared_secret, hash_name)
    ks.client_handshake_traffic_secret = derive_secret(
        ks.handshake_secret, "c hs traffic", transcripts.hello, hash_name)
    ks.server_handshake_traffic_secret = derive_secret(
        ks.handshake_secret, "s hs traffic", transcripts.hello, hash_name)
    derived = derive_secret(ks.handshake_secret, "derived", empty_hash(hash_name), hash_name)
    ks.master_secret = hkdf_extract(derived, bytes(hlen), hash_name)
    ks.client_application_traffic_secret = derive_secret(
        ks.master_secret, "c ap traffic", transcripts.server_finished, hash_name)
    ks.server_application_traffic_secret = derive_secret(
        ks.master_secret, "s ap traffic", transcripts.server_finished, hash_name)
    ks.exporter_master_secret = derive_secret(
        ks.master_secret, "exp master", transcripts.server_finished, hash_name)
    if transcripts.client_finished is not None:
        ks.resumption_master_secret = derive_secret(
            ks.master_secret, "res master", transcripts.client_finished, hash_name)
    return ks


def traffic_keys(secret: bytes, key_len: int, iv_len: int,
                 hash_name: str = "sha256") -> tuple[bytes, bytes]:
    key = hkdf_expand_label(secret, "key", b"", key_len, hash_name)
    iv = hkdf_expand_label(secret, "iv", b"", iv_len, hash_name)
    return key, iv


def finished_key(base_secret: bytes, hash_name: str = "sha256") -> bytes:
    hlen = hashlib.new(hash_name).digest_size
    return hkdf_expand_label(base_secret, "finished", b"", hlen, hash_name)


def finished_mac(base_secret: bytes, transcript_hash: bytes, hash_name: str = "sha256") -> bytes:
    return hmac.new(finished_key(base_secret, hash_name), transcript_hash, hash_name).digest()
