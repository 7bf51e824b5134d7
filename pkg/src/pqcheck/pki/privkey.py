"""DER codec for ML-KEM / ML-DSA private keys in OneAsymmetricKey framing.

Three CHOICE encodings per key:

    seed        [0] IMPLICIT OCTET STRING  (64 B d||z / 32 B xi)
    expandedKey OCTET STRING
    both        SEQUENCE { seed OCTET STRING, expandedKey OCTET STRING }

The `both` variant is admitted only when the stored expanded key is
byte-identical to the one re-derived from the seed; a seed-only document
with an embedded OneAsymmetricKey publicKey treats that key as a
consistency witness and verifies it the same way. Each imported ML-KEM key
carries the binding class implied by its encoding so policy layers can
reject weak-binding keys.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..crypto import mldsa, mlkem
from . import der

OID_MLKEM512 = "2.16.840.1.101.3.4.4.1"
OID_MLKEM768 = "2.16.840.1.101.3.4.4.2"
OID_MLKEM1024 = "2.16.840.1.101.3.4.4.3"
OID_MLDSA44 = "2.16.840.1.101.3.4.3.17"
OID_MLDSA65 = "2.16.840.1.101.3.4.3.18"
OID_MLDSA87 = "2.16.840.1.101.3.4.3.19"

HASH_MLDSA_OIDS = {
    "2.16.840.1.101.3.4.3.32",
    "2.16.840.1.101.3.4.3.33",
    "2.16.840.1.101.3.4.3.34",
}

_MLKEM_BY_OID = {
    OID_MLKEM512: mlkem.MLKEM512,
    OID_MLKEM768: mlkem.MLKEM768,
    OID_MLKEM1024: mlkem.MLKEM1024,
}
_MLDSA_BY_OID = {
    OID_MLDSA44: mldsa.MLDSA44,
    OID_MLDSA65: mldsa.MLDSA65,
    OID_MLDSA87: mldsa.MLDSA87,
}
OID_BY_NAME = {
    "ML-KEM-512": OID_MLKEM512,
    "ML-KEM-768": OID_MLKEM768,
    "ML-KEM-1024": OID_MLKEM1024,
    "ML-DSA-44": OID_MLDSA44,
    "ML-DSA-65": OID_MLDSA65,
    "ML-DSA-87": OID_MLDSA87,
}


class PrivateKeyError(ValueError):
    """Import/export failure: unknown OID, bad lengths, or inconsistency."""


@dataclass(frozen=True)
class BindingClass:
    leak_bind_k_pk: bool
    leak_bind_k_ct: bool
    mal_bind_k_ct: bool
    mal_bind_k_pk: bool


# the encoding-derived binding matrix for ML-KEM keys
_BINDING = {
    "seed": BindingClass(True, True, True, False),
    "both": BindingClass(True, True, True, False),
    "expanded": BindingClass(True, True, False, False),
}


@dataclass
class PrivateKeyDocument:
    algorithm_oid: str
    encoding: str  # seed | expanded | both
    seed: bytes | None
    expanded_key: bytes | None
    embedded_public_key: bytes | None
    raw_der: bytes

    @property
    def family(self) -> str:
        return "ML-KEM" if self.algorithm_oid in _MLKEM_BY_OID else "ML-DSA"

    @property
    def algorithm_name(self) -> str:
        for name, o in OID_BY_NAME.items():
            if o == self.algorithm_oid:
                return name
        return self.algorithm_oid


def _params_for(algorithm_oid: str):
    if algorithm_oid in HASH_MLDSA_OIDS:
        raise PrivateKeyError("HashML-DSA keys are forbidden in this profile")
    if algorithm_oid in _MLKEM_BY_OID:
        return "ML-KEM", _MLKEM_BY_OID[algorithm_oid]
    if algorithm_oid in _MLDSA_BY_OID:
        return "ML-DSA", _MLDSA_BY_OID[algorithm_oid]
    raise PrivateKeyError(f"unknown private key algorithm OID {algorithm_oid}")


def expand_from_seed(algorithm_oid: str, seed: bytes) -> tuple[bytes, bytes]:
    """Deterministic (expanded_key, public_key) from the stored seed."""
    family, params = _params_for(algorithm_oid)
    if family == "ML-KEM":
        if len(seed) != 64:
            raise PrivateKeyError("ML-KEM seed must be exactly 64 bytes (d||z)")
        ek, dk = mlkem.keygen_internal(params, seed[:32], seed[32:])
        return dk, ek
    if len(seed) != 32:
        raise PrivateKeyError("ML-DSA seed must be exactly 32 bytes")
    pk, sk = mldsa.keygen_internal(params, seed)
    return sk, pk


def _expanded_len(algorithm_oid: str) -> int:
    family, params = _params_for(algorithm_oid)
    return params.dk_len if family == "ML-KEM" else params.sk_len


def _seed_len(algorithm_oid: str) -> int:
    return 64 if _params_for(algorithm_oid)[0] == "ML-KEM" else 32


def public_key_of(doc: PrivateKeyDocument) -> bytes:
    family, params = _params_for(doc.algorithm_oid)
    if doc.seed is not None:
        return expand_from_seed(doc.algorithm_oid, doc.seed)[1]
    if family == "ML-KEM":
        return mlkem.ek_from_dk(params, doc.expanded_key)
    return mldsa.pk_from_sk(params, doc.expanded_key)


def binding_class(doc: PrivateKeyDocument) -> BindingClass | None:
    """Encoding-derived binding properties; KEM keys only (None for ML-DSA)."""
    if doc.family != "ML-KEM":
        return None
    return _BINDING[doc.encoding]


# ---------------------------------------------------------------- decode

def decode_private_key(data: bytes) -> PrivateKeyDocument:
    try:
        body, _ = der.expect(data, der.SEQUENCE)
        _version, pos = der.expect(body, der.INTEGER)
        alg_body, pos = der.expect(body, der.SEQUENCE, pos)
        oid_body, alg_rest = der.expect(alg_body, der.OID)
        algorithm_oid = der.decode_oid(oid_body)
        inner, pos = der.expect(body, der.OCTET_STRING, pos)
    except der.DerError as exc:
        raise PrivateKeyError(f"not a OneAsymmetricKey envelope: {exc}") from exc
    if algorithm_oid in HASH_MLDSA_OIDS:
        raise PrivateKeyError("HashML-DSA keys are forbidden in this profile")
    family, _params = _params_for(algorithm_oid)
    if alg_rest != len(alg_body):
        raise PrivateKeyError("private key AlgorithmIdentifier must omit parameters")

    embedded_pub = None
    while pos < len(body):
        tag, value, pos = der.read_tlv(body, pos)
        if tag == 0x81:  # [1] IMPLICIT BIT STRING publicKey
            if not value:
                raise PrivateKeyError("embedded public key BIT STRING is empty")
            embedded_pub = value[1:]  # strip unused-bits octet

    tag, value, end = der.read_tlv(inner)
    if end != len(inner):
        raise PrivateKeyError("trailing bytes after private key CHOICE")
    seed = expanded = None
    if tag == 0x80:  # seed [0] IMPLICIT OCTET STRING
        encoding = "seed"
        seed = value
    elif tag == der.OCTET_STRING:
        encoding = "expanded"
        expanded = value
    elif tag == der.SEQUENCE:
        encoding = "both"
        seed, p2 = der.expect(value, der.OCTET_STRING)
        expanded, p2 = der.expect(value, der.OCTET_STRING, p2)
        if p2 != len(value):
            raise PrivateKeyError("trailing bytes in `both` SEQUENCE")
    else:
        raise PrivateKeyError(f"unknown private key CHOICE tag 0x{tag:02x}")

    if seed is not None and len(seed) != _seed_len(algorithm_oid):
        raise PrivateKeyError(
            f"{family} seed must be {_seed_len(algorithm_oid)} bytes, got {len(seed)}")
    if expanded is not None and len(expanded) != _expanded_len(algorithm_oid):
        raise PrivateKeyError(
            f"{family} expanded key must be {_expanded_len(algorithm_oid)} bytes, "
            f"got {len(expanded)}")

    if encoding == "both":
        derived, _pub = expand_from_seed(algorithm_oid, seed)
        if derived != expanded:
            raise PrivateKeyError(
                "expanded key is not consistent with the stored seed; refusing import")

    doc = PrivateKeyDocument(algorithm_oid, encoding, seed, expanded, embedded_pub, data)

    if embedded_pub is not None:
        # the publicKey field is a keypair-consistency witness, not key material
        if embedded_pub != public_key_of(doc):
            raise PrivateKeyError(
                "embedded public key does not match the private key; refusing import")
    return doc


# ---------------------------------------------------------------- encode

def _choice_bytes(doc_seed: bytes | None, doc_expanded: bytes | None,
                  algorithm_oid: str, target: str) -> bytes:
    if target in ("seed", "both") and doc_seed is None:
        raise PrivateKeyError(
            "seed is unavailable; an expanded-only import cannot be down-converted")
    if target == "seed":
        return der.tlv(0x80, doc_seed)
    if target == "expanded":
        expanded = doc_expanded
        if expanded is None:
            expanded, _ = expand_from_seed(algorithm_oid, doc_seed)
        return der.octet_string(expanded)
    if target == "both":
        expanded = doc_expanded
        if expanded is None:
            expanded, _ = expand_from_seed(algorithm_oid, doc_seed)
        return der.seq(der.octet_string(doc_seed), der.octet_string(expanded))
    raise PrivateKeyError(f"unknown target encoding {target!r}")


def encode_private_key(doc: PrivateKeyDocument, target_encoding: str = "seed",
                       include_public: bool = False) -> bytes:
    choice = _choice_bytes(doc.seed, doc.expanded_key, doc.algorithm_oid, target_encoding)
    parts = [
        der.integer(1 if include_public else 0),
        der.seq(der.oid(doc.algorithm_oid)),
        der.octet_string(choice),
    ]
    if include_public:
        # never duplicated for ML-DSA expanded keys: the expanded form already
        # stores the public key
        parts.append(der.tlv(0x81, b"\x00" + public_key_of(doc)))
    return der.seq(*parts)


def new_document(algorithm_name: str, seed: bytes, encoding: str = "seed") -> PrivateKeyDocument:
    oid = OID_BY_NAME[algorithm_name]
    expanded, _pub = expand_from_seed(oid, seed)
    doc = PrivateKeyDocument(oid, encoding,
                             seed if encoding in ("seed", "both") else None,
                             expanded if encoding in ("expanded", "both") else None,
                             None, b"")
    raw = encode_private_key(doc, encoding)
    return PrivateKeyDocument(doc.algorithm_oid, encoding, doc.seed, doc.expanded_key,
                              None, raw)
