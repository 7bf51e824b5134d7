"""Signature-scheme registry: classical, ML-DSA, and the composite.

The composite scheme (ML-DSA-65 + Ed25519) is a length-framed concatenation
of both component public keys / signatures; verification is the conjunction
of both component verifications, and any framing damage verifies false.

The Ed448+Dilithium3 codepoint (0xFE62), SLH-DSA, and the RSA baseline
codepoints are registered for recognition and classification only.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

from . import classical, mldsa


class SigError(ValueError):
    """Unknown algorithm, bad key material, or a forbidden context."""


@dataclass(frozen=True)
class SigAlgorithm:
    id: int
    name: str
    pk_len: int | None        # None = variable
    sig_len: int | None       # None = variable (ECDSA DER)
    kind: str                 # classical | pure-pq | composite
    nist_category: int = 0
    implemented: bool = True
    seed_len: int = 32


@dataclass
class SigKeyPair:
    alg: SigAlgorithm
    public_key: bytes
    private_key: bytes
    origin_encoding: str = "ephemeral"


SIG_ALGORITHMS: dict[int, SigAlgorithm] = {}


def _register(alg: SigAlgorithm) -> SigAlgorithm:
    SIG_ALGORITHMS[alg.id] = alg
    return alg


ECDSA_P256 = _register(SigAlgorithm(0x0403, "ECDSA-P256-SHA256", 65, None, "classical"))
ECDSA_P384 = _register(SigAlgorithm(0x0503, "ECDSA-P384-SHA384", 97, None, "classical"))
ECDSA_P521 = _register(SigAlgorithm(0x0603, "ECDSA-P521-SHA512", 133, None, "classical"))
ED25519 = _register(SigAlgorithm(0x0807, "Ed25519", 32, 64, "classical"))

MLDSA44 = _register(SigAlgorithm(0x0B01, "ML-DSA-44", 1312, 2420, "pure-pq", nist_category=2))
MLDSA65 = _register(SigAlgorithm(0xFE63, "ML-DSA-65", 1952, 3309, "pure-pq", nist_category=3))
MLDSA87 = _register(SigAlgorithm(0x0B03, "ML-DSA-87", 2592, 4627, "pure-pq", nist_category=5))

# instantiated composite for loopback use
MLDSA65_ED25519 = _register(SigAlgorithm(
    0xFE64, "MLDSA65-Ed25519", 1952 + 32 + 4, 3309 + 64 + 4, "composite",
    nist_category=3, seed_len=64))

# recognition-only codepoints
ED448_DILITHIUM3 = _register(SigAlgorithm(
    0xFE62, "Ed448-Dilithium3", None, None, "composite", nist_category=3, implemented=False))
SLH_DSA_128S = _register(SigAlgorithm(0x0B05, "SLH-DSA-SHA2-128s", 32, 7856, "pure-pq", 1, False))
SLH_DSA_128F = _register(SigAlgorithm(0x0B06, "SLH-DSA-SHAKE-128f", 32, 17088, "pure-pq", 1, False))
SLH_DSA_192S = _register(SigAlgorithm(0x0B07, "SLH-DSA-SHA2-192s", 48, 16224, "pure-pq", 3, False))
SLH_DSA_256S = _register(SigAlgorithm(0x0B08, "SLH-DSA-SHA2-256s", 64, 29792, "pure-pq", 5, False))
RSA_PSS_SHA256 = _register(SigAlgorithm(0x0804, "RSA-PSS-SHA256", None, None, "classical", 0, False))
RSA_PSS_SHA384 = _register(SigAlgorithm(0x0805, "RSA-PSS-SHA384", None, None, "classical", 0, False))
RSA_PSS_SHA512 = _register(SigAlgorithm(0x0806, "RSA-PSS-SHA512", None, None, "classical", 0, False))
RSA_PKCS1_SHA256 = _register(SigAlgorithm(0x0401, "RSA-PKCS1-SHA256", None, None, "classical", 0, False))

SIG_BY_NAME = {alg.name: alg for alg in SIG_ALGORITHMS.values()}

_MLDSA_PARAMS = {
    "ML-DSA-44": mldsa.MLDSA44,
    "ML-DSA-65": mldsa.MLDSA65,
    "ML-DSA-87": mldsa.MLDSA87,
}
_ECDSA_CURVE = {
    "ECDSA-P256-SHA256": "P-256",
    "ECDSA-P384-SHA384": "P-384",
    "ECDSA-P521-SHA512": "P-521",
}


def lookup(alg_or_id) -> SigAlgorithm:
    if isinstance(alg_or_id, SigAlgorithm):
        return alg_or_id
    if isinstance(alg_or_id, int) and alg_or_id in SIG_ALGORITHMS:
        return SIG_ALGORITHMS[alg_or_id]
    if isinstance(alg_or_id, str) and alg_or_id in SIG_BY_NAME:
        return SIG_BY_NAME[alg_or_id]
    raise SigError(f"unknown signature algorithm: {alg_or_id!r}")


def _require_implemented(alg: SigAlgorithm) -> None:
    if not alg.implemented:
        raise SigError(f"{alg.name} is registered for recognition only")


def _frame(*parts: bytes) -> bytes:
    return b"".join(struct.pack(">H", len(p)) + p for p in parts)


def _unframe(data: bytes, count: int) -> list[bytes] | None:
    parts = []
    pos = 0
    for _ in range(count):
        if pos + 2 > len(data):
            return None
        (n,) = struct.unpack_from(">H", data, pos)
        pos += 2
        if pos + n > len(data):
            return None
        parts.append(data[pos: pos + n])
        pos += n
    if pos != len(data):
        return None
    return parts


def keygen(alg_or_id, seed: bytes | None = None) -> SigKeyPair:
    alg = lookup(alg_or_id)
    _require_implemented(alg)
    if seed is not None and len(seed) != alg.seed_len:
        raise SigError(f"{alg.name} keygen seed must be {alg.seed_len} bytes")
    if alg.name in _MLDSA_PARAMS:
        xi = seed if seed is not None else os.urandom(32)
        pk, sk = mldsa.keygen_internal(_MLDSA_PARAMS[alg.name], xi)
    elif alg.name in _ECDSA_CURVE:
        pk, sk = classical.ec_keygen(_ECDSA_CURVE[alg.name], seed)
    elif alg.name == "Ed25519":
        pk, sk = classical.ed25519_keygen(seed)
    else:  # composite
        seed = seed if seed is not None else os.urandom(64)
        pq_pk, pq_sk = mldsa.keygen_internal(mldsa.MLDSA65, seed[:32])
        ed_pk, ed_sk = classical.ed25519_keygen(seed[32:])
        pk, sk = _frame(pq_pk, ed_pk), _frame(pq_sk, ed_sk)
    pair = SigKeyPair(alg, pk, sk, "seed" if seed is not None else "ephemeral")
    probe = sign(alg, sk, b"pairwise consistency probe")
    if not verify(alg, pk, b"pairwise consistency probe", probe):
        raise SigError(f"{alg.name} keypair failed its pairwise consistency check")
    return pair


def sign(alg_or_id, sk: bytes, message: bytes, context: bytes = b"",
         deterministic: bool = True) -> bytes:
    alg = lookup(alg_or_id)
    _require_implemented(alg)
    if context:
        # TLS and X.509 profiles fix the FIPS 204 context to empty
        raise SigError(f"{alg.name} profile forbids a non-empty signing context")
    if alg.name in _MLDSA_PARAMS:
        rnd = bytes(32) if deterministic else os.urandom(32)
        return mldsa.sign(_MLDSA_PARAMS[alg.name], sk, message, b"", rnd)
    if alg.name in _ECDSA_CURVE:
        return classical.ecdsa_sign(_ECDSA_CURVE[alg.name], sk, message)
    if alg.name == "Ed25519":
        return classical.ed25519_sign(sk, message)
    parts = _unframe(sk, 2)
    if parts is None:
        raise SigError("composite private key framing is invalid")
    pq_sig = mldsa.sign(mldsa.MLDSA65, parts[0], message, b"",
                        bytes(32) if deterministic else os.urandom(32))
    ed_sig = classical.ed25519_sign(parts[1], message)
    return _frame(pq_sig, ed_sig)


def verify(alg_or_id, pk: bytes, message: bytes, signature: bytes,
           context: bytes = b"") -> bool:
    alg = lookup(alg_or_id)
    if not alg.implemented or context:
        return False
    if alg.name in _MLDSA_PARAMS:
        return mldsa.verify(_MLDSA_PARAMS[alg.name], pk, message, signature)
    if alg.name in _ECDSA_CURVE:
        return classical.ecdsa_verify(_ECDSA_CURVE[alg.name], pk, message, signature)
    if alg.name == "Ed25519":
        return classical.ed25519_verify(pk, message, signature)
    keys = _unframe(pk, 2)
    sigs = _unframe(signature, 2)
    if keys is None or sigs is None:
        return False
    return (mldsa.verify(mldsa.MLDSA65, keys[0], message, sigs[0])
            and classical.ed25519_verify(keys[1], message, sigs[1]))
