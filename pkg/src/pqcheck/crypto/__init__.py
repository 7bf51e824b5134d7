"""Uniform KEM / signer / AEAD / KDF engine.

All operations are pure or act on caller-owned state; safe for concurrent
use from many handshake drivers.
"""

from . import aead, classical, kdf, kem, mldsa, mlkem, sig  # noqa: F401
from .kem import ConsistencyError, KemAlgorithm, KemError, KemKeyPair  # noqa: F401
from .sig import SigAlgorithm, SigError, SigKeyPair  # noqa: F401
