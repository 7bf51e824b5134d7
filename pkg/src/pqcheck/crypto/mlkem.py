"""ML-KEM (FIPS 203) key encapsulation over Z_q[X]/(X^256+1), q = 3329.

Implements all three parameter sets (ML-KEM-512/768/1024) with the
seed-based internal entry points exposed so deterministic known-answer
vectors can drive keygen/encaps/decaps directly:

    keygen_internal(d, z)   -> (ek, dk)
    encaps_internal(ek, m)  -> (ct, ss)
    decaps_internal(dk, ct) -> ss        (implicit rejection, never raises
                                          on a tampered ciphertext)

Input validation follows the standard's encapsulation/decapsulation key
checks: length, modulus (re-encode) check on ek, and the embedded-ek hash
check is implicit in the FO transform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

Q = 3329
N = 256


def _bitrev7(n: int) -> int:
    r = 0
    for _ in range(7):
        r = (r << 1) | (n & 1)
        n >>= 1
    return r


# zeta = 17 is a primitive 256th root of unity mod q
_ZETAS = [pow(17, _bitrev7(i), Q) for i in range(128)]
# gamma_i = zeta^(2*bitrev7(i)+1), used by the degree-one base multiplier
_GAMMAS = [pow(17, 2 * _bitrev7(i) + 1, Q) for i in range(128)]
_NINV = pow(128, -1, Q)


@dataclass(frozen=True)
class MLKEMParams:
    name: str
    k: int
    eta1: int
    eta2: int
    du: int
    dv: int

    @property
    def ek_len(self) -> int:
        return 384 * self.k + 32

    @property
    def dk_len(self) -> int:
        return 768 * self.k + 96

    @property
    def ct_len(self) -> int:
        return 32 * (self.du * self.k + self.dv)


MLKEM512 = MLKEMParams("ML-KEM-512", k=2, eta1=3, eta2=2, du=10, dv=4)
MLKEM768 = MLKEMParams("ML-KEM-768", k=3, eta1=2, eta2=2, du=10, dv=4)
MLKEM1024 = MLKEMParams("ML-KEM-1024", k=4, eta1=2, eta2=2, du=11, dv=5)

PARAMS = {p.name: p for p in (MLKEM512, MLKEM768, MLKEM1024)}


class MLKEMError(ValueError):
    """Malformed key or ciphertext input."""


# ---------------------------------------------------------------- hashing

def _G(data: bytes) -> tuple[bytes, bytes]:
    h = hashlib.sha3_512(data).digest()
    return h[:32], h[32:]


def _H(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def _J(data: bytes) -> bytes:
    return hashlib.shake_256(data).digest(32)


def _prf(eta: int, s: bytes, b: int) -> bytes:
    return hashlib.shake_256(s + bytes([b])).digest(64 * eta)


# ------------------------------------------------------------------- NTT

def _ntt(f: list[int]) -> list[int]:
    f = f[:]
    k = 1
    length = 128
    while length >= 2:
        for start in range(0, 256, 2 * length):
            zeta = _ZETAS[k]
            k += 1
            for j in range(start, start + length):
                t = (zeta * f[j + length]) % Q
                f[j + length] = (f[j] - t) % Q
                f[j] = (f[j] + t) % Q
        length >>= 1
    return f


def _intt(f: list[int]) -> list[int]:
    f = f[:]
    k = 127
    length = 2
    while length <= 128:
        for start in range(0, 256, 2 * length):
            zeta = _ZETAS[k]
            k -= 1
            for j in range(start, start + length):
                t = f[j]
                f[j] = (t + f[j + length]) % Q
                f[j + length] = (zeta * (f[j + length] - t)) % Q
        length <<= 1
    return [(x * _NINV) % Q for x in f]


def _basemul(a: list[int], b: list[int]) -> list[int]:
    c = [0] * 256
    for i in range(128):
        a0, a1 = a[2 * i], a[2 * i + 1]
        b0, b1 = b[2 * i], b[2 * i + 1]
        c[2 * i] = (a0 * b0 + a1 * b1 * _GAMMAS[i]) % Q
        c[2 * i + 1] = (a0 * b1 + a1 * b0) % Q
    return c


def _poly_add(a: list[int], b: list[int]) -> list[int]:
    return [(x + y) % Q for x, y in zip(a, b)]


def _poly_sub(a: list[int], b: list[int]) -> list[int]:
    return [(x - y) % Q for x, y in zip(a, b)]


# ------------------------------------------------------------- sampling

@lru_cache(maxsize=128)
def _expand_matrix(rho: bytes, k: int) -> tuple:
    """A_hat[i][j] = SampleNTT(rho || j || i); cached per seed."""
    return tuple(
        tuple(_sample_ntt(rho + bytes([j, i])) for j in range(k)) for i in range(k)
    )


def _sample_ntt(seed: bytes) -> tuple:
    xof = hashlib.shake_128(seed)
    out = []
    n_bytes = 576
    while True:
        buf = xof.digest(n_bytes)
        out = []
        pos = 0
        while pos + 3 <= n_bytes and len(out) < 256:
            b0, b1, b2 = buf[pos], buf[pos + 1], buf[pos + 2]
            pos += 3
            d1 = b0 + 256 * (b1 & 0x0F)
            d2 = (b1 >> 4) + 16 * b2
            if d1 < Q:
                out.append(d1)
            if d2 < Q and len(out) < 256:
                out.append(d2)
        if len(out) == 256:
            return tuple(out)
        n_bytes *= 2  # astronomically rare


def _cbd(eta: int, buf: bytes) -> list[int]:
    bits = []
    for byte in buf:
        for i in range(8):
            bits.append((byte >> i) & 1)
    f = []
    for i in range(256):
        x = sum(bits[2 * i * eta: 2 * i * eta + eta])
        y = sum(bits[(2 * i + 1) * eta: (2 * i + 1) * eta + eta])
        f.append((x - y) % Q)
    return f


# ------------------------------------------------- encodings / compression

def _byte_encode(d: int, f: list[int]) -> bytes:
    acc = 0
    acc_bits = 0
    out = bytearray()
    mask = (1 << d) - 1
    for x in f:
        acc |= (x & mask) << acc_bits
        acc_bits += d
        while acc_bits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            acc_bits -= 8
    return bytes(out)


def _byte_decode(d: int, data: bytes) -> list[int]:
    out = []
    acc = 0
    acc_bits = 0
    mask = (1 << d) - 1
    for byte in data:
        acc |= byte << acc_bits
        acc_bits += 8
        while acc_bits >= d and len(out) < 256:
            out.append(acc & mask)
            acc >>= d
            acc_bits -= d
    return out


def _compress(d: int, x: int) -> int:
    return (((x << (d + 1)) + Q) // (2 * Q)) & ((1 << d) - 1)


def _decompress(d: int, y: int) -> int:
    return (y * Q + (1 << (d - 1))) >> d


# ------------------------------------------------------------------ K-PKE

def _kpke_keygen(params: MLKEMParams, d: bytes) -> tuple[bytes, bytes]:
    k = params.k
    rho, sigma = _G(d + bytes([k]))
    a_hat = _expand_matrix(rho, k)
    n = 0
    s = []
    for _ in range(k):
        s.append(_cbd(params.eta1, _prf(params.eta1, sigma, n)))
        n += 1
    e = []
    for _ in range(k):
        e.append(_cbd(params.eta1, _prf(params.eta1, sigma, n)))
        n += 1
    s_hat = [_ntt(v) for v in s]
    e_hat = [_ntt(v) for v in e]
    t_hat = []
    for i in range(k):
        acc = [0] * 256
        for j in range(k):
            acc = _poly_add(acc, _basemul(list(a_hat[i][j]), s_hat[j]))
        t_hat.append(_poly_add(acc, e_hat[i]))
    ek = b"".join(_byte_encode(12, v) for v in t_hat) + rho
    dk = b"".join(_byte_encode(12, v) for v in s_hat)
    return ek, dk


def _kpke_encrypt(params: MLKEMParams, ek: bytes, m: bytes, r: bytes) -> bytes:
    k = params.k
    t_hat = [_byte_decode(12, ek[384 * i: 384 * (i + 1)]) for i in range(k)]
    rho = ek[384 * k:]
    a_hat = _expand_matrix(rho, k)
    n = 0
    y = []
    for _ in range(k):
        y.append(_cbd(params.eta1, _prf(params.eta1, r, n)))
        n += 1
    e1 = []
    for _ in range(k):
        e1.append(_cbd(params.eta2, _prf(params.eta2, r, n)))
        n += 1
    e2 = _cbd(params.eta2, _prf(params.eta2, r, n))
    y_hat = [_ntt(v) for v in y]
    u = []
    for i in range(k):
        acc = [0] * 256
        for j in range(k):
            # A^T: swap indices
            acc = _poly_add(acc, _basemul(list(a_hat[j][i]), y_hat[j]))
        u.append(_poly_add(_intt(acc), e1[i]))
    mu = [_decompress(1, b) for b in _byte_decode(1, m)]
    acc = [0] * 256
    for j in range(k):
        acc = _poly_add(acc, _basemul(t_hat[j], y_hat[j]))
    v = _poly_add(_poly_add(_intt(acc), e2), mu)
    c1 = b"".join(_byte_encode(params.du, [_compress(params.du, x) for x in ui]) for ui in u)
    c2 = _byte_encode(params.dv, [_compress(params.dv, x) for x in v])
    return c1 + c2


def _kpke_decrypt(params: MLKEMParams, dk: bytes, ct: bytes) -> bytes:
    k, du, dv = params.k, params.du, params.dv
    c1_len = 32 * du
    u = []
    for i in range(k):
        block = ct[c1_len * i: c1_len * (i + 1)]
        u.append([_decompress(du, x) for x in _byte_decode(du, block)])
    v = [_decompress(dv, x) for x in _byte_decode(dv, ct[c1_len * k:])]
    s_hat = [_byte_decode(12, dk[384 * i: 384 * (i + 1)]) for i in range(k)]
    acc = [0] * 256
    for j in range(k):
        acc = _poly_add(acc, _basemul(s_hat[j], _ntt(u[j])))
    w = _poly_sub(v, _intt(acc))
    return _byte_encode(1, [_compress(1, x) for x in w])


# ----------------------------------------------------------------- ML-KEM

def keygen_internal(params: MLKEMParams, d: bytes, z: bytes) -> tuple[bytes, bytes]:
    if len(d) != 32 or len(z) != 32:
        raise MLKEMError("keygen seed must be d||z with 32 bytes each")
    ek, dk_pke = _kpke_keygen(params, d)
    dk = dk_pke + ek + _H(ek) + z
    return ek, dk


def check_ek(params: MLKEMParams, ek: bytes) -> None:
    """Encapsulation-key input check: length and modulus (re-encode) test."""
    if len(ek) != params.ek_len:
        raise MLKEMError(
            f"{params.name} encapsulation key must be {params.ek_len} bytes, got {len(ek)}"
        )
    for i in range(params.k):
        block = ek[384 * i: 384 * (i + 1)]
        if _byte_encode(12, [x % Q for x in _byte_decode(12, block)]) != block:
            raise MLKEMError(f"{params.name} encapsulation key fails modulus check")


def encaps_internal(params: MLKEMParams, ek: bytes, m: bytes) -> tuple[bytes, bytes]:
    check_ek(params, ek)
    if len(m) != 32:
        raise MLKEMError("encapsulation randomness must be 32 bytes")
    shared, r = _G(m + _H(ek))
    ct = _kpke_encrypt(params, ek, m, r)
    return ct, shared


def decaps_internal(params: MLKEMParams, dk: bytes, ct: bytes) -> bytes:
    if len(ct) != params.ct_len:
        raise MLKEMError(
            f"{params.name} ciphertext must be {params.ct_len} bytes, got {len(ct)}"
        )
    if len(dk) != params.dk_len:
        raise MLKEMError(
            f"{params.name} decapsulation key must be {params.dk_len} bytes, got {len(dk)}"
        )
    k = params.k
    dk_pke = dk[: 384 * k]
    ek = dk[384 * k: 768 * k + 32]
    h = dk[768 * k + 32: 768 * k + 64]
    z = dk[768 * k + 64:]
    if _H(ek) != h:
        raise MLKEMError(f"{params.name} decapsulation key fails hash check")
    m = _kpke_decrypt(params, dk_pke, ct)
    shared, r = _G(m + h)
    rejected = _J(z + ct)
    ct2 = _kpke_encrypt(params, ek, m, r)
    if ct2 != ct:
        return rejected
    return shared


def ek_from_dk(params: MLKEMParams, dk: bytes) -> bytes:
    """Extract the embedded encapsulation key from an expanded dk."""
    k = params.k
    return dk[384 * k: 768 * k + 32]
