"""ML-DSA (FIPS 204) signatures over Z_q[X]/(X^256+1), q = 8380417.

All three parameter sets (ML-DSA-44/65/87). Internal entry points take
explicit randomness so known-answer vectors drive them directly:

    keygen_internal(xi)                 -> (pk, sk)
    sign_internal(sk, m_prime, rnd)     -> sig
    verify_internal(pk, m_prime, sig)   -> bool

The public sign/verify pair applies the pure-ML-DSA domain separator
(0x00 || len(ctx) || ctx || message); the deterministic variant fixes the
signing randomness to 32 zero bytes. Signature sizes are 2420 / 3309 /
4627 bytes for the three parameter sets.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

Q = 8380417
N = 256
D = 13


def _bitrev8(n: int) -> int:
    r = 0
    for _ in range(8):
        r = (r << 1) | (n & 1)
        n >>= 1
    return r


_ZETAS = [pow(1753, _bitrev8(i), Q) for i in range(256)]
_NINV = pow(256, -1, Q)


@dataclass(frozen=True)
class MLDSAParams:
    name: str
    k: int
    l: int
    eta: int
    tau: int
    lam: int
    gamma1: int
    gamma2: int
    omega: int

    @property
    def beta(self) -> int:
        return self.tau * self.eta

    @property
    def z_bits(self) -> int:
        return 1 + (self.gamma1 - 1).bit_length()

    @property
    def w1_bits(self) -> int:
        return ((Q - 1) // (2 * self.gamma2) - 1).bit_length()

    @property
    def eta_bits(self) -> int:
        return (2 * self.eta).bit_length()

    @property
    def pk_len(self) -> int:
        return 32 + 320 * self.k

    @property
    def sk_len(self) -> int:
        return 128 + 32 * ((self.k + self.l) * self.eta_bits + self.k * D)

    @property
    def sig_len(self) -> int:
        return self.lam // 4 + 32 * self.l * self.z_bits + self.omega + self.k


MLDSA44 = MLDSAParams("ML-DSA-44", k=4, l=4, eta=2, tau=39, lam=128,
                      gamma1=1 << 17, gamma2=(Q - 1) // 88, omega=80)
MLDSA65 = MLDSAParams("ML-DSA-65", k=6, l=5, eta=4, tau=49, lam=192,
                      gamma1=1 << 19, gamma2=(Q - 1) // 32, omega=55)
MLDSA87 = MLDSAParams("ML-DSA-87", k=8, l=7, eta=2, tau=60, lam=256,
                      gamma1=1 << 19, gamma2=(Q - 1) // 32, omega=75)

PARAMS = {p.name: p for p in (MLDSA44, MLDSA65, MLDSA87)}


class MLDSAError(ValueError):
    """Malformed key, signature, or context input."""


# ------------------------------------------------------------------- NTT

def _ntt(f: list[int]) -> list[int]:
    f = f[:]
    k = 0
    length = 128
    while length >= 1:
        for start in range(0, 256, 2 * length):
            k += 1
            zeta = _ZETAS[k]
            for j in range(start, start + length):
                t = (zeta * f[j + length]) % Q
                f[j + length] = (f[j] - t) % Q
                f[j] = (f[j] + t) % Q
        length >>= 1
    return f


def _intt(f: list[int]) -> list[int]:
    f = f[:]
    k = 256
    length = 1
    while length <= 128:
        for start in range(0, 256, 2 * length):
            k -= 1
            zeta = _ZETAS[k]
            for j in range(start, start + length):
                t = f[j]
                f[j] = (t + f[j + length]) % Q
                f[j + length] = (zeta * (f[j + length] - t)) % Q
        length <<= 1
    return [(x * _NINV) % Q for x in f]


def _pw_mul(a: list[int], b: list[int]) -> list[int]:
    return [(x * y) % Q for x, y in zip(a, b)]


def _add(a: list[int], b: list[int]) -> list[int]:
    return [(x + y) % Q for x, y in zip(a, b)]


def _sub(a: list[int], b: list[int]) -> list[int]:
    return [(x - y) % Q for x, y in zip(a, b)]


def _center(x: int, m: int = Q) -> int:
    x %= m
    return x - m if x > m // 2 else x


def _inf_norm(poly: list[int]) -> int:
    return max(abs(_center(x)) for x in poly)


# ------------------------------------------------------------- sampling

@lru_cache(maxsize=64)
def _expand_a(rho: bytes, k: int, l: int) -> tuple:
    return tuple(
        tuple(_rej_ntt_poly(rho + bytes([s, r])) for s in range(l)) for r in range(k)
    )


def _rej_ntt_poly(seed: bytes) -> tuple:
    xof = hashlib.shake_128(seed)
    n_bytes = 894
    while True:
        buf = xof.digest(n_bytes)
        out = []
        pos = 0
        while pos + 3 <= n_bytes and len(out) < 256:
            z = buf[pos] | (buf[pos + 1] << 8) | ((buf[pos + 2] & 0x7F) << 16)
            pos += 3
            if z < Q:
                out.append(z)
        if len(out) == 256:
            return tuple(out)
        n_bytes *= 2


def _rej_bounded_poly(eta: int, seed: bytes) -> list[int]:
    xof = hashlib.shake_256(seed)
    n_bytes = 320
    while True:
        buf = xof.digest(n_bytes)
        out = []
        for byte in buf:
            for z in (byte & 0x0F, byte >> 4):
                if len(out) == 256:
                    break
                if eta == 2:
                    if z < 15:
                        out.append((2 - z % 5) % Q)
                else:  # eta == 4
                    if z < 9:
                        out.append((4 - z) % Q)
            if len(out) == 256:
                return out
        n_bytes *= 2


def _expand_s(params: MLDSAParams, rho_prime: bytes) -> tuple[list, list]:
    s1 = [_rej_bounded_poly(params.eta, rho_prime + r.to_bytes(2, "little"))
          for r in range(params.l)]
    s2 = [_rej_bounded_poly(params.eta, rho_prime + (params.l + r).to_bytes(2, "little"))
          for r in range(params.k)]
    return s1, s2


def _expand_mask(params: MLDSAParams, rho2: bytes, mu: int) -> list[list[int]]:
    c = params.z_bits
    y = []
    for r in range(params.l):
        v = hashlib.shake_256(rho2 + (mu + r).to_bytes(2, "little")).digest(32 * c)
        y.append(_bit_unpack(v, params.gamma1 - 1, params.gamma1))
    return y


def _sample_in_ball(params: MLDSAParams, c_tilde: bytes) -> list[int]:
    xof = hashlib.shake_256(c_tilde)
    buf = xof.digest(512)
    sign_bits = int.from_bytes(buf[:8], "little")
    c = [0] * 256
    pos = 8
    for i in range(256 - params.tau, 256):
        while True:
            if pos >= len(buf):
                buf = xof.digest(len(buf) * 2)
            j = buf[pos]
            pos += 1
            if j <= i:
                break
        c[i] = c[j]
        c[j] = (1 if (sign_bits & 1) == 0 else Q - 1)
        sign_bits >>= 1
    return c


# ------------------------------------------------------ rounding helpers

def _power2round(r: int) -> tuple[int, int]:
    r = r % Q
    r0 = _center(r, 1 << D)
    return (r - r0) >> D, r0


def _decompose(params: MLDSAParams, r: int) -> tuple[int, int]:
    r = r % Q
    r0 = _center(r, 2 * params.gamma2)
    if r - r0 == Q - 1:
        return 0, r0 - 1
    return (r - r0) // (2 * params.gamma2), r0


def _high_bits(params: MLDSAParams, poly: list[int]) -> list[int]:
    return [_decompose(params, x)[0] for x in poly]


def _make_hint_poly(params: MLDSAParams, ct0: list[int], w_cs2_ct0: list[int]) -> list[int]:
    # hint = [[ HighBits(r+z) != HighBits(r) ]] with z = -ct0, r = w - cs2 + ct0
    hints = []
    for a, b in zip(w_cs2_ct0, ct0):
        r_plus_z = (a - b) % Q
        hints.append(1 if _decompose(params, r_plus_z)[0] != _decompose(params, a)[0] else 0)
    return hints


def _use_hint(params: MLDSAParams, h: list[int], poly: list[int]) -> list[int]:
    m = (Q - 1) // (2 * params.gamma2)
    out = []
    for hint, r in zip(h, poly):
        r1, r0 = _decompose(params, r)
        if hint:
            r1 = (r1 + 1) % m if r0 > 0 else (r1 - 1) % m
        out.append(r1)
    return out


# ------------------------------------------------------------- packing

def _simple_bit_pack(poly: list[int], bits: int) -> bytes:
    acc = 0
    acc_bits = 0
    out = bytearray()
    for x in poly:
        acc |= x << acc_bits
        acc_bits += bits
        while acc_bits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            acc_bits -= 8
    return bytes(out)


def _simple_bit_unpack(data: bytes, bits: int) -> list[int]:
    out = []
    acc = 0
    acc_bits = 0
    mask = (1 << bits) - 1
    for byte in data:
        acc |= byte << acc_bits
        acc_bits += 8
        while acc_bits >= bits and len(out) < 256:
            out.append(acc & mask)
            acc >>= bits
            acc_bits -= bits
    return out


def _bit_pack(poly: list[int], a: int, b: int) -> bytes:
    bits = (a + b).bit_length()
    return _simple_bit_pack([(b - _center(x)) % (1 << bits) for x in poly], bits)


def _bit_unpack(data: bytes, a: int, b: int) -> list[int]:
    bits = (a + b).bit_length()
    return [(b - x) % Q for x in _simple_bit_unpack(data, bits)]


def _hint_bit_pack(params: MLDSAParams, h: list[list[int]]) -> bytes:
    y = bytearray(params.omega + params.k)
    index = 0
    for i in range(params.k):
        for j in range(256):
            if h[i][j]:
                y[index] = j
                index += 1
        y[params.omega + i] = index
    return bytes(y)


def _hint_bit_unpack(params: MLDSAParams, data: bytes) -> list[list[int]] | None:
    h = [[0] * 256 for _ in range(params.k)]
    index = 0
    for i in range(params.k):
        end = data[params.omega + i]
        if end < index or end > params.omega:
            return None
        first = index
        while index < end:
            # indices must be strictly increasing within a polynomial
            if index > first and data[index] <= data[index - 1]:
                return None
            h[i][data[index]] = 1
            index += 1
    if any(b != 0 for b in data[index: params.omega]):
        return None
    return h


# ------------------------------------------------------- key/sig codecs

def _pk_encode(params: MLDSAParams, rho: bytes, t1: list[list[int]]) -> bytes:
    return rho + b"".join(_simple_bit_pack(p, 10) for p in t1)


def _pk_decode(params: MLDSAParams, pk: bytes) -> tuple[bytes, list[list[int]]]:
    rho = pk[:32]
    t1 = [_simple_bit_unpack(pk[32 + 320 * i: 32 + 320 * (i + 1)], 10)
          for i in range(params.k)]
    return rho, t1


def _sk_encode(params: MLDSAParams, rho: bytes, key: bytes, tr: bytes,
               s1: list, s2: list, t0: list) -> bytes:
    out = rho + key + tr
    out += b"".join(_bit_pack(p, params.eta, params.eta) for p in s1)
    out += b"".join(_bit_pack(p, params.eta, params.eta) for p in s2)
    out += b"".join(_bit_pack(p, (1 << (D - 1)) - 1, 1 << (D - 1)) for p in t0)
    return out


def _sk_decode(params: MLDSAParams, sk: bytes):
    rho, key, tr = sk[:32], sk[32:64], sk[64:128]
    pos = 128
    step = 32 * params.eta_bits
    s1 = []
    for _ in range(params.l):
        s1.append(_bit_unpack(sk[pos: pos + step], params.eta, params.eta))
        pos += step
    s2 = []
    for _ in range(params.k):
        s2.append(_bit_unpack(sk[pos: pos + step], params.eta, params.eta))
        pos += step
    t0 = []
    for _ in range(params.k):
        t0.append(_bit_unpack(sk[pos: pos + 416], (1 << (D - 1)) - 1, 1 << (D - 1)))
        pos += 416
    return rho, key, tr, s1, s2, t0


def _sig_encode(params: MLDSAParams, c_tilde: bytes, z: list, h: list) -> bytes:
    out = c_tilde
    out += b"".join(_bit_pack(p, params.gamma1 - 1, params.gamma1) for p in z)
    out += _hint_bit_pack(params, h)
    return out


def _sig_decode(params: MLDSAParams, sig: bytes):
    lam4 = params.lam // 4
    c_tilde = sig[:lam4]
    step = 32 * params.z_bits
    z = []
    pos = lam4
    for _ in range(params.l):
        z.append(_bit_unpack(sig[pos: pos + step], params.gamma1 - 1, params.gamma1))
        pos += step
    h = _hint_bit_unpack(params, sig[pos:])
    return c_tilde, z, h


def _w1_encode(params: MLDSAParams, w1: list[list[int]]) -> bytes:
    return b"".join(_simple_bit_pack(p, params.w1_bits) for p in w1)


# -------------------------------------------------------------- ML-DSA

def keygen_internal(params: MLDSAParams, xi: bytes) -> tuple[bytes, bytes]:
    if len(xi) != 32:
        raise MLDSAError("keygen seed must be 32 bytes")
    seed = hashlib.shake_256(xi + bytes([params.k, params.l])).digest(128)
    rho, rho_prime, key = seed[:32], seed[32:96], seed[96:]
    a_hat = _expand_a(rho, params.k, params.l)
    s1, s2 = _expand_s(params, rho_prime)
    s1_hat = [_ntt(p) for p in s1]
    t = []
    for i in range(params.k):
        acc = [0] * 256
        for j in range(params.l):
            acc = _add(acc, _pw_mul(list(a_hat[i][j]), s1_hat[j]))
        t.append(_add(_intt(acc), s2[i]))
    t1 = []
    t0 = []
    for poly in t:
        hi, lo = zip(*(_power2round(x) for x in poly))
        t1.append(list(hi))
        t0.append([x % Q for x in lo])
    pk = _pk_encode(params, rho, t1)
    tr = hashlib.shake_256(pk).digest(64)
    sk = _sk_encode(params, rho, key, tr, s1, s2, t0)
    return pk, sk


def sign_internal(params: MLDSAParams, sk: bytes, m_prime: bytes, rnd: bytes) -> bytes:
    if len(sk) != params.sk_len:
        raise MLDSAError(f"{params.name} private key must be {params.sk_len} bytes")
    rho, key, tr, s1, s2, t0 = _sk_decode(params, sk)
    s1_hat = [_ntt(p) for p in s1]
    s2_hat = [_ntt(p) for p in s2]
    t0_hat = [_ntt(p) for p in t0]
    a_hat = _expand_a(rho, params.k, params.l)
    mu = hashlib.shake_256(tr + m_prime).digest(64)
    rho2 = hashlib.shake_256(key + rnd + mu).digest(64)
    kappa = 0
    g1, g2, beta = params.gamma1, params.gamma2, params.beta
    while True:
        y = _expand_mask(params, rho2, kappa)
        kappa += params.l
        y_hat = [_ntt(p) for p in y]
        w = []
        for i in range(params.k):
            acc = [0] * 256
            for j in range(params.l):
                acc = _add(acc, _pw_mul(list(a_hat[i][j]), y_hat[j]))
            w.append(_intt(acc))
        w1 = [_high_bits(params, p) for p in w]
        c_tilde = hashlib.shake_256(mu + _w1_encode(params, w1)).digest(params.lam // 4)
        c_hat = _ntt(_sample_in_ball(params, c_tilde))
        z = [_add(y[j], _intt(_pw_mul(c_hat, s1_hat[j]))) for j in range(params.l)]
        if max(_inf_norm(p) for p in z) >= g1 - beta:
            continue
        w_cs2 = [_sub(w[i], _intt(_pw_mul(c_hat, s2_hat[i]))) for i in range(params.k)]
        r0_max = max(abs(_decompose(params, x)[1]) for p in w_cs2 for x in p)
        if r0_max >= g2 - beta:
            continue
        ct0 = [_intt(_pw_mul(c_hat, t0_hat[i])) for i in range(params.k)]
        if max(_inf_norm(p) for p in ct0) >= g2:
            continue
        h = [_make_hint_poly(params, ct0[i], _add(w_cs2[i], ct0[i])) for i in range(params.k)]
        if sum(sum(p) for p in h) > params.omega:
            continue
        return _sig_encode(params, c_tilde, z, h)


def verify_internal(params: MLDSAParams, pk: bytes, m_prime: bytes, sig: bytes) -> bool:
    if len(pk) != params.pk_len or len(sig) != params.sig_len:
        return False
    rho, t1 = _pk_decode(params, pk)
    c_tilde, z, h = _sig_decode(params, sig)
    if h is None:
        return False
    if max(_inf_norm(p) for p in z) >= params.gamma1 - params.beta:
        return False
    a_hat = _expand_a(rho, params.k, params.l)
    tr = hashlib.shake_256(pk).digest(64)
    mu = hashlib.shake_256(tr + m_prime).digest(64)
    c_hat = _ntt(_sample_in_ball(params, c_tilde))
    z_hat = [_ntt(p) for p in z]
    t1_hat = [_ntt([(x << D) % Q for x in p]) for p in t1]
    w1 = []
    for i in range(params.k):
        acc = [0] * 256
        for j in range(params.l):
            acc = _add(acc, _pw_mul(list(a_hat[i][j]), z_hat[j]))
        approx = _intt(_sub(acc, _pw_mul(c_hat, t1_hat[i])))
        w1.append(_use_hint(params, h[i], approx))
    return c_tilde == hashlib.shake_256(mu + _w1_encode(params, w1)).digest(params.lam // 4)


def _format_message(message: bytes, ctx: bytes) -> bytes:
    if len(ctx) > 255:
        raise MLDSAError("context must be at most 255 bytes")
    return bytes([0, len(ctx)]) + ctx + message


def sign(params: MLDSAParams, sk: bytes, message: bytes, ctx: bytes = b"",
         rnd: bytes | None = None) -> bytes:
    """Pure ML-DSA signature; rnd=None selects the deterministic variant."""
    if rnd is None:
        rnd = bytes(32)
    if len(rnd) != 32:
        raise MLDSAError("signing randomness must be 32 bytes")
    return sign_internal(params, sk, _format_message(message, ctx), rnd)


def verify(params: MLDSAParams, pk: bytes, message: bytes, sig: bytes,
           ctx: bytes = b"") -> bool:
    try:
        m_prime = _format_message(message, ctx)
    except MLDSAError:
        return False
    return verify_internal(params, pk, m_prime, sig)


def pk_from_sk(params: MLDSAParams, sk: bytes) -> bytes:
    """Recompute the public key from an expanded private key."""
    rho, _key, tr, s1, s2, _t0 = _sk_decode(params, sk)
    a_hat = _expand_a(rho, params.k, params.l)
    s1_hat = [_ntt(p) for p in s1]
    t1 = []
    for i in range(params.k):
        acc = [0] * 256
        for j in range(params.l):
            acc = _add(acc, _pw_mul(list(a_hat[i][j]), s1_hat[j]))
        t = _add(_intt(acc), s2[i])
        t1.append([_power2round(x)[0] for x in t])
    pk = _pk_encode(params, rho, t1)
    if hashlib.shake_256(pk).digest(64) != tr:
        raise MLDSAError("private key embedded tr does not match recomputed public key")
    return pk
