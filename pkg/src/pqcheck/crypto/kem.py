"""KEM registry: classical ECDH, pure ML-KEM, and hybrid compositions.

Every algorithm exposes keygen / encapsulate / decapsulate. Classical ECDH
groups are wrapped as KEMs (the "ciphertext" is the responder's ephemeral
share), which is exactly how the TLS 1.3 key_share exchange treats them.

Hybrid wire layout puts the ML-KEM component first in the key_share opaque
(pq_ek || classical_pk, pq_ct || classical_pk); the derived shared secret
concatenates the classical secret first (ss_classical || ss_pq). The
asymmetry is deliberate and logged in evidence output, since published
descriptions of the hybrid ordering disagree with each other.

Keypairs are pairwise-consistency checked at creation: an
encapsulate/decapsulate roundtrip must reproduce the shared secret, and a
failure raises instead of returning a broken pair.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import classical, mlkem


class KemError(ValueError):
    """Unknown algorithm or malformed key/ciphertext input."""


class ConsistencyError(Exception):
    """Pairwise consistency check failed; the primitive is broken."""


@dataclass(frozen=True)
class KemAlgorithm:
    id: int
    name: str
    ek_len: int
    dk_len: int
    ct_len: int
    ss_len: int
    nist_category: int
    kind: str  # classical | pure-pq | hybrid
    pq_component: str | None = None
    classical_component: str | None = None
    implemented: bool = True

    @property
    def seed_len(self) -> int:
        if self.kind == "pure-pq":
            return 64
        if self.kind == "hybrid":
            return 96  # 64-byte d||z for the ML-KEM part, 32 for the curve part
        return 32


@dataclass
class KemKeyPair:
    alg: KemAlgorithm
    encapsulation_key: bytes
    decapsulation_key: bytes
    origin_encoding: str = "ephemeral"  # seed | expanded | both | ephemeral


_CURVE_BY_NAME = {"X25519": None, "P-256": "P-256", "P-384": "P-384", "P-521": "P-521"}

KEM_ALGORITHMS: dict[int, KemAlgorithm] = {}


def _register(alg: KemAlgorithm) -> KemAlgorithm:
    KEM_ALGORITHMS[alg.id] = alg
    return alg


X25519 = _register(KemAlgorithm(0x001D, "X25519", 32, 32, 32, 32, 0, "classical"))
P256 = _register(KemAlgorithm(0x0017, "P-256", 65, 32, 65, 32, 0, "classical"))
P384 = _register(KemAlgorithm(0x0018, "P-384", 97, 48, 97, 48, 0, "classical"))
P521 = _register(KemAlgorithm(0x0019, "P-521", 133, 66, 133, 66, 0, "classical"))

MLKEM512 = _register(KemAlgorithm(0x0512, "ML-KEM-512", 800, 1632, 768, 32, 1, "pure-pq"))
MLKEM768 = _register(KemAlgorithm(0x0768, "ML-KEM-768", 1184, 2400, 1088, 32, 3, "pure-pq"))
MLKEM1024 = _register(KemAlgorithm(0x1024, "ML-KEM-1024", 1568, 3168, 1568, 32, 5, "pure-pq"))

X25519MLKEM768 = _register(KemAlgorithm(
    0x11EC, "X25519MLKEM768", 1216, 2432, 1120, 64, 3, "hybrid",
    pq_component="ML-KEM-768", classical_component="X25519"))
P256MLKEM768 = _register(KemAlgorithm(
    0x11ED, "SecP256r1MLKEM768", 1249, 2432, 1153, 64, 3, "hybrid",
    pq_component="ML-KEM-768", classical_component="P-256"))
P384MLKEM1024 = _register(KemAlgorithm(
    0x11EE, "SecP384r1MLKEM1024", 1665, 3216, 1665, 80, 5, "hybrid",
    pq_component="ML-KEM-1024", classical_component="P-384"))

# recognition-only entries: classified and reported, never negotiated
HQC128 = _register(KemAlgorithm(0x022C, "HQC-128", 2249, 2305, 4433, 64, 1, "pure-pq", implemented=False))
HQC192 = _register(KemAlgorithm(0x022D, "HQC-192", 4522, 4586, 8978, 64, 3, "pure-pq", implemented=False))
HQC256 = _register(KemAlgorithm(0x022E, "HQC-256", 7245, 7317, 14421, 64, 5, "pure-pq", implemented=False))

KEM_BY_NAME = {alg.name: alg for alg in KEM_ALGORITHMS.values()}

_MLKEM_PARAMS = {
    "ML-KEM-512": mlkem.MLKEM512,
    "ML-KEM-768": mlkem.MLKEM768,
    "ML-KEM-1024": mlkem.MLKEM1024,
}


def lookup(alg_or_id) -> KemAlgorithm:
    if isinstance(alg_or_id, KemAlgorithm):
        return alg_or_id
    if isinstance(alg_or_id, int) and alg_or_id in KEM_ALGORITHMS:
        return KEM_ALGORITHMS[alg_or_id]
    if isinstance(alg_or_id, str) and alg_or_id in KEM_BY_NAME:
        return KEM_BY_NAME[alg_or_id]
    raise KemError(f"unknown KEM algorithm: {alg_or_id!r}")


def _require_implemented(alg: KemAlgorithm) -> None:
    if not alg.implemented:
        raise KemError(f"{alg.name} is registered for recognition only")


def _classical_keygen(name: str, seed: bytes | None) -> tuple[bytes, bytes]:
    if name == "X25519":
        return classical.x25519_keygen(seed)
    return classical.ec_keygen(name, seed)


def _classical_exchange(name: str, dk: bytes, peer: bytes) -> bytes:
    if name == "X25519":
        return classical.x25519_exchange(dk, peer)
    return classical.ec_exchange(name, dk, peer)


def _hybrid_split_ek(alg: KemAlgorithm, ek: bytes) -> tuple[bytes, bytes]:
    pq = lookup(alg.pq_component)
    return ek[: pq.ek_len], ek[pq.ek_len:]


def keygen(alg_or_id, seed: bytes | None = None) -> KemKeyPair:
    """Generate a checked keypair; a fixed seed makes it bit-reproducible."""
    alg = lookup(alg_or_id)
    _require_implemented(alg)
    if seed is not None and len(seed) != alg.seed_len:
        raise KemError(f"{alg.name} keygen seed must be {alg.seed_len} bytes")
    if alg.kind == "classical":
        ek, dk = _classical_keygen(alg.name, seed)
    elif alg.kind == "pure-pq":
        params = _MLKEM_PARAMS[alg.name]
        seed = seed if seed is not None else os.urandom(64)
        ek, dk = mlkem.keygen_internal(params, seed[:32], seed[32:])
    else:
        params = _MLKEM_PARAMS[alg.pq_component]
        seed = seed if seed is not None else os.urandom(96)
        pq_ek, pq_dk = mlkem.keygen_internal(params, seed[:32], seed[32:64])
        cl_ek, cl_dk = _classical_keygen(alg.classical_component, seed[64:])
        ek, dk = pq_ek + cl_ek, pq_dk + cl_dk
    pair = KemKeyPair(alg, ek, dk, "seed" if seed is not None else "ephemeral")
    _consistency_check(pair)
    return pair


def _consistency_check(pair: KemKeyPair) -> None:
    ct, ss = encapsulate(pair.alg, pair.encapsulation_key)
    if decapsulate(pair.alg, pair.decapsulation_key, ct) != ss:
        raise ConsistencyError(
            f"{pair.alg.name} pairwise consistency check failed: "
            "encapsulate/decapsulate disagree on the shared secret")


def encapsulate(alg_or_id, ek: bytes,
                randomness: bytes | None = None) -> tuple[bytes, bytes]:
    """Returns (ciphertext, shared_secret); optional fixed randomness for tests."""
    alg = lookup(alg_or_id)
    _require_implemented(alg)
    if len(ek) != alg.ek_len:
        raise KemError(f"{alg.name} public key must be {alg.ek_len} bytes, got {len(ek)}")
    if alg.kind == "classical":
        peer_ct, peer_dk = _classical_keygen(alg.name, randomness)
        return peer_ct, _classical_exchange(alg.name, peer_dk, ek)
    if alg.kind == "pure-pq":
        params = _MLKEM_PARAMS[alg.name]
        m = randomness if randomness is not None else os.urandom(32)
        try:
            return mlkem.encaps_internal(params, ek, m)
        except mlkem.MLKEMError as exc:
            raise KemError(str(exc)) from exc
    pq_ek, cl_ek = _hybrid_split_ek(alg, ek)
    params = _MLKEM_PARAMS[alg.pq_component]
    m = randomness[:32] if randomness is not None else os.urandom(32)
    cl_seed = randomness[32:64] if randomness is not None else None
    try:
        pq_ct, pq_ss = mlkem.encaps_internal(params, pq_ek, m)
    except mlkem.MLKEMError as exc:
        raise KemError(str(exc)) from exc
    cl_ct, cl_dk = _classical_keygen(alg.classical_component, cl_seed)
    cl_ss = _classical_exchange(alg.classical_component, cl_dk, cl_ek)
    # wire: pq first; shared secret: classical first
    return pq_ct + cl_ct, cl_ss + pq_ss


def decapsulate(alg_or_id, dk: bytes, ct: bytes) -> bytes:
    alg = lookup(alg_or_id)
    _require_implemented(alg)
    if len(ct) != alg.ct_len:
        raise KemError(f"{alg.name} ciphertext must be {alg.ct_len} bytes, got {len(ct)}")
    if alg.kind == "classical":
        return _classical_exchange(alg.name, dk, ct)
    if alg.kind == "pure-pq":
        return mlkem.decaps_internal(_MLKEM_PARAMS[alg.name], dk, ct)
    params = _MLKEM_PARAMS[alg.pq_component]
    pq_dk, cl_dk = dk[: params.dk_len], dk[params.dk_len:]
    pq_ct, cl_ct = ct[: params.ct_len], ct[params.ct_len:]
    pq_ss = mlkem.decaps_internal(params, pq_dk, pq_ct)
    cl_ss = _classical_exchange(alg.classical_component, cl_dk, cl_ct)
    return cl_ss + pq_ss
