"""Classical ECDH / signature primitives behind byte-oriented helpers.

Backed by the `cryptography` package (OpenSSL). Key material crosses these
functions as raw bytes so the KEM/signer registries can treat classical and
post-quantum algorithms uniformly. Deterministic keygen from a 32-byte seed
is supported for reproducible tests; the seed is expanded with SHAKE-256
where a curve needs more entropy than the seed provides.
"""

from __future__ import annotations

import hashlib
import os

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed25519, x25519

_CURVES = {
    "P-256": (ec.SECP256R1(), 32, hashes.SHA256()),
    "P-384": (ec.SECP384R1(), 48, hashes.SHA384()),
    "P-521": (ec.SECP521R1(), 66, hashes.SHA512()),
}


def _seed_scalar(curve_name: str, seed: bytes) -> int:
    _, size, _ = _CURVES[curve_name]
    # group orders per SEC 2; cryptography does not expose them directly
    orders = {
        "P-256": 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
        "P-384": 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFC7634D81F4372DDF581A0DB248B0A77AECEC196ACCC52973,
        "P-521": 0x01FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFA51868783BF2F966B7FCC0148F709A5D03BB5C9B8899C47AEBB6FB71E91386409,
    }
    order = orders[curve_name]
    wide = int.from_bytes(hashlib.shake_256(seed).digest(size + 16), "big")
    return wide % (order - 1) + 1


# ------------------------------------------------------------------ ECDH

def x25519_keygen(seed: bytes | None = None) -> tuple[bytes, bytes]:
    seed = seed if seed is not None else os.urandom(32)
    priv = x25519.X25519PrivateKey.from_private_bytes(seed)
    return priv.public_key().public_bytes_raw(), seed


def x25519_exchange(priv_bytes: bytes, peer_pub: bytes) -> bytes:
    priv = x25519.X25519PrivateKey.from_private_bytes(priv_bytes)
    return priv.exchange(x25519.X25519PublicKey.from_public_bytes(peer_pub))


def ec_keygen(curve_name: str, seed: bytes | None = None) -> tuple[bytes, bytes]:
    curve, size, _ = _CURVES[curve_name]
    if seed is not None:
        priv = ec.derive_private_key(_seed_scalar(curve_name, seed), curve)
    else:
        priv = ec.generate_private_key(curve)
    pub = priv.public_key().public_bytes(
        serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
    )
    return pub, priv.private_numbers().private_value.to_bytes(size, "big")


def ec_exchange(curve_name: str, priv_bytes: bytes, peer_pub: bytes) -> bytes:
    curve, _, _ = _CURVES[curve_name]
    priv = ec.derive_private_key(int.from_bytes(priv_bytes, "big"), curve)
    peer = ec.EllipticCurvePublicKey.from_encoded_point(curve, peer_pub)
    return priv.exchange(ec.ECDH(), peer)


def ec_point_len(curve_name: str) -> int:
    _, size, _ = _CURVES[curve_name]
    return 2 * size + 1


# ------------------------------------------------------------ signatures

def ecdsa_sign(curve_name: str, priv_bytes: bytes, message: bytes) -> bytes:
    curve, _, hash_alg = _CURVES[curve_name]
    priv = ec.derive_private_key(int.from_bytes(priv_bytes, "big"), curve)
    return priv.sign(message, ec.ECDSA(hash_alg))


def ecdsa_verify(curve_name: str, pub_bytes: bytes, message: bytes, sig: bytes) -> bool:
    curve, _, hash_alg = _CURVES[curve_name]
    try:
        pub = ec.EllipticCurvePublicKey.from_encoded_point(curve, pub_bytes)
        pub.verify(sig, message, ec.ECDSA(hash_alg))
        return True
    except (InvalidSignature, ValueError):
        return False


def ed25519_keygen(seed: bytes | None = None) -> tuple[bytes, bytes]:
    seed = seed if seed is not None else os.urandom(32)
    priv = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
    return priv.public_key().public_bytes_raw(), seed


def ed25519_sign(priv_bytes: bytes, message: bytes) -> bytes:
    return ed25519.Ed25519PrivateKey.from_private_bytes(priv_bytes).sign(message)


def ed25519_verify(pub_bytes: bytes, message: bytes, sig: bytes) -> bool:
    try:
        ed25519.Ed25519PublicKey.from_public_bytes(pub_bytes).verify(sig, message)
        return True
    except (InvalidSignature, ValueError):
        return False
