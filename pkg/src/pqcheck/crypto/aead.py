"""AEAD suites for the TLS 1.3 record layer.

AES-GCM and ChaCha20-Poly1305 are implemented (via OpenSSL); the AES-CCM
suite codepoints are registered for recognition but not implemented, since
no check depends on them.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305


class AeadError(Exception):
    """Authentication failure or malformed input on open."""


@dataclass(frozen=True)
class AeadSuite:
    suite_id: int
    name: str
    key_len: int
    nonce_len: int
    tag_len: int
    hash_name: str  # transcript/HKDF hash paired with the suite
    implemented: bool = True

    @property
    def hash_len(self) -> int:
        return 48 if self.hash_name == "sha384" else 32


AES_128_GCM = AeadSuite(0x1301, "TLS_AES_128_GCM_SHA256", 16, 12, 16, "sha256")
AES_256_GCM = AeadSuite(0x1302, "TLS_AES_256_GCM_SHA384", 32, 12, 16, "sha384")
CHACHA20_POLY1305 = AeadSuite(0x1303, "TLS_CHACHA20_POLY1305_SHA256", 32, 12, 16, "sha256")
AES_128_CCM = AeadSuite(0x1304, "TLS_AES_128_CCM_SHA256", 16, 12, 16, "sha256", implemented=False)
AES_128_CCM_8 = AeadSuite(0x1305, "TLS_AES_128_CCM_8_SHA256", 16, 12, 8, "sha256", implemented=False)

SUITES = {s.suite_id: s for s in (AES_128_GCM, AES_256_GCM, CHACHA20_POLY1305,
                                  AES_128_CCM, AES_128_CCM_8)}
IMPLEMENTED_SUITES = [s for s in SUITES.values() if s.implemented]


def _cipher(suite: AeadSuite, key: bytes):
    if not suite.implemented:
        raise AeadError(f"{suite.name} is registered for recognition only")
    if len(key) != suite.key_len:
        raise AeadError(f"{suite.name} key must be {suite.key_len} bytes")
    if suite.suite_id == 0x1303:
        return ChaCha20Poly1305(key)
    return AESGCM(key)


def seal(suite: AeadSuite, key: bytes, nonce: bytes, plaintext: bytes, aad: bytes) -> bytes:
    if len(nonce) != suite.nonce_len:
        raise AeadError(f"{suite.name} nonce must be {suite.nonce_len} bytes")
    return _cipher(suite, key).encrypt(nonce, plaintext, aad)


def open_(suite: AeadSuite, key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes) -> bytes:
    if len(nonce) != suite.nonce_len:
        raise AeadError(f"{suite.name} nonce must be {suite.nonce_len} bytes")
    try:
        return _cipher(suite, key).decrypt(nonce, ciphertext, aad)
    except InvalidTag as exc:
        raise AeadError("AEAD authentication failed") from exc
