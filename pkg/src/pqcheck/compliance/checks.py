"""The compliance checks: pure functions from probe input to a Verdict.

Groups: tls (15 tests), 5g (8), pq (10), nrf (3), hardening (4 + merged
fuzz findings). Checks that need a successful handshake degrade to an
informational verdict when none is available, so a dead or degenerate
target still yields a complete suite run.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, field

from ..crypto import aead, kem, sig as sigmod
from ..evidence import CLASSICAL, FULL_PQ, PQRegistries, DEFAULT_REGISTRIES
from ..tls.context import TestContext
from .registry import CRITICAL, INFO, WARNING, Verdict, register

STRONG_SUITES = {0x1301, 0x1302, 0x1303}
PQ_AEAD_SUITES = {0x1302, 0x1303}
SBI_PORT_RANGE = range(29500, 29601)


@dataclass
class ProbeInput:
    """Everything the probe planner observed for one target."""

    ctx: TestContext
    registries: PQRegistries = DEFAULT_REGISTRIES
    level: str = CLASSICAL
    target_host: str = ""
    target_port: int = 0
    expected_fqdn: str = ""
    nf_type: str = "unknown"
    declared_nf_type: str | None = None
    legacy_offer: str = "not-attempted"   # refused | accepted | error:...
    weak_offer: str = "not-attempted"
    http11_offer: str = "not-attempted"
    resumption: str = "not-attempted"     # resumed | full-handshake | refused | no-ticket
    resumption_suite: int | None = None
    mtls_probe: str = "not-attempted"     # enforced | not-enforced
    h2_response: dict | None = None
    h2c_attempt: str = "not-attempted"    # refused | accepted
    now: datetime.datetime = field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc))


def _no_handshake(test_id: str, severity: str, citation: str, inp: ProbeInput) -> Verdict:
    return Verdict(test_id, None, severity,
                   details=f"no successful handshake: {inp.ctx.failure or 'unknown'}",
                   citation=citation)


def _suite_name(suite_id: int | None) -> str:
    if suite_id in aead.SUITES:
        return f"{aead.SUITES[suite_id].name} (0x{suite_id:04x})"
    return f"0x{suite_id:04x}" if suite_id is not None else "none"


def _group_name(group: int | None) -> str:
    try:
        return f"{kem.lookup(group).name} (0x{group:04x})"
    except (kem.KemError, TypeError):
        return f"0x{group:04x}" if group is not None else "none"


def _scheme_name(scheme: int | None) -> str:
    try:
        return f"{sigmod.lookup(scheme).name} (0x{scheme:04x})"
    except (sigmod.SigError, TypeError):
        return f"0x{scheme:04x}" if scheme is not None else "none"


# ================================================================== TLS ==

@register("tls_version_1_3", "tls", CRITICAL, "RFC 8446 §4.1.2")
def tls_version_1_3(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §4.1.2"
    negotiated = inp.ctx.tls_version == 0x0304
    legacy_refused = inp.legacy_offer in ("refused", "not-attempted")
    passed = negotiated and legacy_refused
    details = []
    details.append("session negotiated TLS 1.3" if negotiated
                   else "session did not negotiate TLS 1.3")
    if inp.legacy_offer == "accepted":
        details.append("server accepted a legacy-version (TLS 1.2) offer")
    elif inp.legacy_offer == "refused":
        details.append("legacy-version offer refused")
    if not inp.ctx.successful and not negotiated:
        return _no_handshake("tls_version_1_3", CRITICAL, cite, inp) \
            if inp.legacy_offer == "not-attempted" else Verdict(
                "tls_version_1_3", False, CRITICAL, "; ".join(details),
                expected="TLS 1.3 only; legacy offers refused",
                actual=inp.ctx.failure or "no TLS 1.3 session", citation=cite)
    return Verdict("tls_version_1_3", passed, CRITICAL, "; ".join(details),
                   expected="TLS 1.3 only; legacy offers refused",
                   actual="TLS 1.3" if negotiated else "not TLS 1.3", citation=cite)


@register("tls_strong_ciphers", "tls", CRITICAL, "RFC 8446 §9.1")
def tls_strong_ciphers(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §9.1"
    if not inp.ctx.successful:
        return _no_handshake("tls_strong_ciphers", CRITICAL, cite, inp)
    strong = inp.ctx.cipher_suite in STRONG_SUITES
    weak_refused = inp.weak_offer in ("refused", "not-attempted")
    details = f"negotiated {_suite_name(inp.ctx.cipher_suite)}"
    if inp.weak_offer == "accepted":
        details += "; server accepted a weak/legacy-cipher-only offer"
    elif inp.weak_offer == "refused":
        details += "; weak-cipher-only offer refused"
    return Verdict("tls_strong_ciphers", strong and weak_refused, CRITICAL, details,
                   expected="AEAD suites only; CBC/RC4/NULL refused",
                   actual=_suite_name(inp.ctx.cipher_suite), citation=cite)


@register("tls_cert_san_eku", "tls", WARNING, "RFC 5280 §4.2.1")
def tls_cert_san_eku(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §4.2.1"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_san_eku", WARNING, cite, inp)
    leaf = inp.ctx.cert_chain[0]
    from ..pki.x509 import OID_SERVER_AUTH
    has_san = bool(leaf.sans)
    has_eku = OID_SERVER_AUTH in leaf.eku
    return Verdict("tls_cert_san_eku", has_san and has_eku, WARNING,
                   f"SAN present: {has_san}; serverAuth EKU: {has_eku}",
                   expected="leaf carries SAN and serverAuth EKU",
                   actual=f"SANs: {', '.join(leaf.sans) or 'none'}; EKU: "
                          f"{', '.join(leaf.eku) or 'none'}",
                   citation=cite)


@register("tls_alpn_h2", "tls", WARNING, "RFC 7301")
def tls_alpn_h2(inp: ProbeInput) -> Verdict:
    cite = "RFC 7301"
    if not inp.ctx.successful:
        return _no_handshake("tls_alpn_h2", WARNING, cite, inp)
    return Verdict("tls_alpn_h2", inp.ctx.alpn_result == "h2", WARNING,
                   f"ALPN result: {inp.ctx.alpn_result!r}",
                   expected="h2", actual=str(inp.ctx.alpn_result), citation=cite)


@register("tls_key_strength", "tls", CRITICAL, "NIST SP 800-131A")
def tls_key_strength(inp: ProbeInput) -> Verdict:
    cite = "NIST SP 800-131A"
    if not inp.ctx.successful:
        return _no_handshake("tls_key_strength", CRITICAL, cite, inp)
    suite_ok = inp.ctx.cipher_suite in STRONG_SUITES
    try:
        galg = kem.lookup(inp.ctx.key_exchange_group)
        group_bits = {0: 128, 1: 128, 3: 192, 5: 256}[galg.nist_category]
        group_ok = group_bits >= 128 and galg.ek_len * 8 >= 256
    except kem.KemError:
        group_ok = False
        group_bits = 0
    return Verdict("tls_key_strength", suite_ok and group_ok, CRITICAL,
                   f"suite {_suite_name(inp.ctx.cipher_suite)}; group "
                   f"{_group_name(inp.ctx.key_exchange_group)} "
                   f"(~{group_bits}-bit classical-equivalent)",
                   expected=">=128-bit symmetric-equivalent strength",
                   actual=f"{group_bits}-bit", citation=cite)


@register("tls_session_resumption", "tls", WARNING, "RFC 8446 §4.6.1")
def tls_session_resumption(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §4.6.1"
    if inp.resumption == "no-ticket":
        return Verdict("tls_session_resumption", None, WARNING,
                       "server issued no session ticket; resumption not exercised",
                       citation=cite)
    if inp.resumption == "not-attempted":
        return Verdict("tls_session_resumption", None, WARNING,
                       "resumption probe not attempted", citation=cite)
    if inp.resumption == "resumed":
        same_family = inp.resumption_suite == inp.ctx.cipher_suite
        return Verdict("tls_session_resumption", bool(same_family), WARNING,
                       "PSK resumption succeeded with unchanged TLS 1.3 parameters"
                       if same_family else
                       "resumption changed the cipher suite (downgrade via resumption)",
                       expected="resumption keeps TLS 1.3 parameters",
                       actual=_suite_name(inp.resumption_suite), citation=cite)
    if inp.resumption == "full-handshake":
        return Verdict("tls_session_resumption", True, WARNING,
                       "server declined the ticket and fell back to a full handshake",
                       citation=cite)
    return Verdict("tls_session_resumption", False, WARNING,
                   f"resumption attempt failed: {inp.resumption}",
                   expected="clean resumption or clean decline",
                   actual=inp.resumption, citation=cite)


@register("tls_cert_chain", "tls", INFO, "RFC 5280 §6")
def tls_cert_chain(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §6"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_chain", INFO, cite, inp)
    depth = len(inp.ctx.cert_chain)
    if depth >= 2:
        return Verdict("tls_cert_chain", True, INFO,
                       f"chain depth {depth}", citation=cite)
    return Verdict("tls_cert_chain", False, INFO,
                   "Chain depth 1 (leaf only); intermediate CA not presented",
                   expected="issuing chain presented with the leaf",
                   actual="leaf only", citation=cite)


@register("tls_cert_expiry", "tls", CRITICAL, "RFC 5280 §4.1.2.5")
def tls_cert_expiry(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §4.1.2.5"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_expiry", CRITICAL, cite, inp)
    expired = [v.subject for v in inp.ctx.cert_chain
               if not (v.not_before <= inp.now <= v.not_after)]
    return Verdict("tls_cert_expiry", not expired, CRITICAL,
                   "all chain links within their validity window" if not expired
                   else f"outside validity window: {', '.join(expired)}",
                   expected="current time within every link's validity",
                   actual="valid" if not expired else "expired/not yet valid",
                   citation=cite)


@register("tls_cert_self_signed", "tls", WARNING, "RFC 5280 §3.2")
def tls_cert_self_signed(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §3.2"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_self_signed", WARNING, cite, inp)
    leaf = inp.ctx.cert_chain[0]
    return Verdict("tls_cert_self_signed", not leaf.self_signed, WARNING,
                   "leaf is CA-issued" if not leaf.self_signed
                   else "leaf certificate is self-signed",
                   expected="leaf issued by a CA", actual=leaf.issuer, citation=cite)


@register("tls_cert_san_present", "tls", WARNING, "RFC 5280 §4.2.1.6")
def tls_cert_san_present(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §4.2.1.6"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_san_present", WARNING, cite, inp)
    sans = inp.ctx.cert_chain[0].sans
    return Verdict("tls_cert_san_present", bool(sans), WARNING,
                   f"SANs: {', '.join(sans) if sans else 'none'}",
                   expected="subjectAltName extension present",
                   actual=f"{len(sans)} names", citation=cite)


@register("tls_cert_eku_server_auth", "tls", WARNING, "RFC 5280 §4.2.1.12")
def tls_cert_eku_server_auth(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §4.2.1.12"
    if not inp.ctx.cert_chain:
        return _no_handshake("tls_cert_eku_server_auth", WARNING, cite, inp)
    from ..pki.x509 import OID_SERVER_AUTH
    eku = inp.ctx.cert_chain[0].eku
    return Verdict("tls_cert_eku_server_auth", OID_SERVER_AUTH in eku, WARNING,
                   "serverAuth present in EKU" if OID_SERVER_AUTH in eku
                   else "EKU lacks serverAuth",
                   expected="id-kp-serverAuth", actual=", ".join(eku) or "none",
                   citation=cite)


@register("tls_mutual_tls", "tls", INFO, "TS 33.501 §6.3.4")
def tls_mutual_tls(inp: ProbeInput) -> Verdict:
    cite = "TS 33.501 §6.3.4"
    if not inp.ctx.successful:
        return _no_handshake("tls_mutual_tls", INFO, cite, inp)
    if inp.ctx.certificate_request_seen:
        return Verdict("tls_mutual_tls", True, INFO,
                       "server requested a client certificate"
                       + ("; mutual TLS completed" if inp.ctx.mutual_tls else ""),
                       citation=cite)
    # absent CertificateRequest is reported as critical by 5g_mutual_auth;
    # here it is demoted to an informational outcome
    return Verdict("tls_mutual_tls", None, INFO,
                   "server did not request a client certificate "
                   "(see 5g_mutual_auth for the normative verdict)", citation=cite)


@register("tls_downgrade_sentinel", "tls", WARNING, "RFC 8446 §4.1.3")
def tls_downgrade_sentinel(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §4.1.3"
    if not inp.ctx.successful:
        return _no_handshake("tls_downgrade_sentinel", WARNING, cite, inp)
    from ..tls import wire
    tail = inp.ctx.server_random[-8:]
    sentinel = tail in (wire.DOWNGRADE_TLS12, wire.DOWNGRADE_TLS11)
    return Verdict("tls_downgrade_sentinel", not sentinel, WARNING,
                   "ServerHello.random carries a downgrade sentinel on a TLS 1.3 session"
                   if sentinel else "no downgrade sentinel in ServerHello.random",
                   expected="no sentinel on TLS 1.3",
                   actual=tail.hex(), citation=cite)


@register("tls_certificate_verify", "tls", CRITICAL, "RFC 8446 §4.4.3")
def tls_certificate_verify(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §4.4.3"
    if not inp.ctx.successful:
        return _no_handshake("tls_certificate_verify", CRITICAL, cite, inp)
    if inp.ctx.resumed:
        return Verdict("tls_certificate_verify", None, CRITICAL,
                       "resumed session: no CertificateVerify exchanged", citation=cite)
    ok = inp.ctx.signature_scheme is not None and inp.ctx.signature_size > 0
    return Verdict("tls_certificate_verify", ok, CRITICAL,
                   f"CertificateVerify validated over the handshake transcript "
                   f"({_scheme_name(inp.ctx.signature_scheme)}, "
                   f"{inp.ctx.signature_size} B)",
                   expected="transcript signature verifies under the leaf key",
                   actual="verified" if ok else "absent", citation=cite)


@register("tls_supported_versions", "tls", WARNING, "RFC 8446 §4.2.1")
def tls_supported_versions(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §4.2.1"
    if not inp.ctx.successful:
        return _no_handshake("tls_supported_versions", WARNING, cite, inp)
    # the client driver rejects ServerHellos without a proper
    # supported_versions selection, so a successful session implies it
    return Verdict("tls_supported_versions", True, WARNING,
                   "server selected TLS 1.3 via the supported_versions extension",
                   citation=cite)


# =================================================================== 5G ==

@register("5g_mutual_auth", "5g", CRITICAL, "TS 33.501 §6.3.4")
def g5_mutual_auth(inp: ProbeInput) -> Verdict:
    cite = "TS 33.501 §6.3.4"
    if inp.mtls_probe == "not-attempted":
        return Verdict("5g_mutual_auth", None, CRITICAL,
                       "mTLS probe not attempted", citation=cite)
    enforced = inp.mtls_probe == "enforced"
    return Verdict("5g_mutual_auth", enforced, CRITICAL,
                   "server enforces mutual TLS" if enforced else
                   "5G SBI requires mutual TLS per 3GPP TS 33.501 §6.3.4; the "
                   "server completed a session for an anonymous client",
                   expected="Server must request client certificate (mTLS)",
                   actual="CertificateRequest sent and anonymous clients rejected"
                   if enforced else "Connection succeeded without client certificate",
                   citation=cite)


@register("5g_http2_mandatory", "5g", CRITICAL, "TS 29.500 §6.1.3B")
def g5_http2_mandatory(inp: ProbeInput) -> Verdict:
    cite = "TS 29.500 §6.1.3B"
    if not inp.ctx.successful:
        return _no_handshake("5g_http2_mandatory", CRITICAL, cite, inp)
    h2 = inp.ctx.alpn_result == "h2"
    http11_refused = inp.http11_offer in ("refused", "not-attempted")
    passed = h2 and http11_refused
    details = ("Server supports HTTP/2 as required by TS 29.500"
               if h2 else f"ALPN negotiated {inp.ctx.alpn_result!r} instead of h2")
    if inp.http11_offer == "accepted":
        details += "; server accepted an HTTP/1.1-only ALPN offer"
    return Verdict("5g_http2_mandatory", passed, CRITICAL, details,
                   expected="ALPN h2; HTTP/1.x fallback refused",
                   actual=str(inp.ctx.alpn_result), citation=cite)


@register("5g_nf_identity_san", "5g", CRITICAL, "TS 33.310")
def g5_nf_identity_san(inp: ProbeInput) -> Verdict:
    cite = "TS 33.310"
    if not inp.ctx.cert_chain:
        return _no_handshake("5g_nf_identity_san", CRITICAL, cite, inp)
    sans = inp.ctx.cert_chain[0].sans
    expected = inp.expected_fqdn
    if not expected:
        return Verdict("5g_nf_identity_san", None, CRITICAL,
                       "no canonical NF FQDN declared for this target", citation=cite)
    match = any(expected.lower() == s.lower()
                or (s.startswith("*.") and expected.split(".", 1)[-1] == s[2:])
                for s in sans)
    return Verdict("5g_nf_identity_san", match, CRITICAL,
                   "certificate SAN matches the canonical NF identity" if match else
                   "NF identity does not match any certificate SAN",
                   expected=f"SAN matching '{expected}'",
                   actual="SANs: " + ", ".join(f"DNS:{s}" for s in sans)
                   if sans else "no SANs", citation=cite)


@register("5g_cert_san_fqdn", "5g", WARNING, "TS 23.003")
def g5_cert_san_fqdn(inp: ProbeInput) -> Verdict:
    cite = "TS 23.003"
    if not inp.ctx.cert_chain:
        return _no_handshake("5g_cert_san_fqdn", WARNING, cite, inp)
    sans = inp.ctx.cert_chain[0].sans
    fqdn_re = re.compile(r"^(\*\.)?([a-z0-9-]+\.)+[a-z0-9-]+$", re.I)
    short = [s for s in sans if not fqdn_re.match(s)]
    return Verdict("5g_cert_san_fqdn", not short, WARNING,
                   "all SANs are fully qualified" if not short else
                   "short-form SANs are not valid FQDNs",
                   expected="every SAN is a fully qualified domain name",
                   actual=("Invalid: " + ", ".join(short)) if short else "all FQDNs",
                   citation=cite)


@register("5g_tls13_required", "5g", CRITICAL, "TS 33.501 §13.1")
def g5_tls13_required(inp: ProbeInput) -> Verdict:
    cite = "TS 33.501 §13.1"
    ok = inp.ctx.successful and inp.ctx.tls_version == 0x0304
    if not inp.ctx.successful and inp.ctx.failure.startswith("transport"):
        return _no_handshake("5g_tls13_required", CRITICAL, cite, inp)
    return Verdict("5g_tls13_required", ok, CRITICAL,
                   "SBI session protected by TLS 1.3" if ok
                   else "no TLS 1.3 protection on the SBI endpoint",
                   expected="TLS 1.3", actual="TLS 1.3" if ok else "absent",
                   citation=cite)


@register("5g_fqdn_format", "5g", WARNING, "TS 23.003")
def g5_fqdn_format(inp: ProbeInput) -> Verdict:
    cite = "TS 23.003"
    fqdn = inp.expected_fqdn
    if not fqdn:
        return Verdict("5g_fqdn_format", None, WARNING,
                       "no FQDN declared for this target", citation=cite)
    ok = bool(re.match(r"^[a-z0-9-]+\.[a-z0-9-]+\.svc\.cluster\.local$", fqdn, re.I))
    return Verdict("5g_fqdn_format", ok, WARNING,
                   f"FQDN {fqdn!r} "
                   + ("follows" if ok else "does not follow")
                   + " <svc>.<ns>.svc.cluster.local",
                   expected="<svc>.<ns>.svc.cluster.local", actual=fqdn, citation=cite)


@register("5g_nf_type", "5g", INFO, "TS 29.510")
def g5_nf_type(inp: ProbeInput) -> Verdict:
    cite = "TS 29.510"
    if inp.nf_type == "unknown":
        return Verdict("5g_nf_type", None, INFO,
                       "NF type could not be inferred for this target", citation=cite)
    declared = inp.declared_nf_type
    if declared and declared != inp.nf_type:
        return Verdict("5g_nf_type", False, INFO,
                       f"declared NF type {declared} disagrees with inferred {inp.nf_type}",
                       expected=declared, actual=inp.nf_type, citation=cite)
    return Verdict("5g_nf_type", True, INFO,
                   f"NF type {inp.nf_type} consistent with target naming", citation=cite)


@register("5g_sbi_port_range", "5g", INFO, "TS 29.500 (IANA SBI range)")
def g5_sbi_port_range(inp: ProbeInput) -> Verdict:
    cite = "TS 29.500 (IANA SBI range)"
    ok = inp.target_port in SBI_PORT_RANGE
    return Verdict("5g_sbi_port_range", ok, INFO,
                   f"target port {inp.target_port} "
                   + ("inside" if ok else "outside") + " the 3GPP-reserved 29500-29600 range",
                   expected="29500-29600", actual=str(inp.target_port), citation=cite)


# =================================================================== PQ ==

@register("pq_kex_type", "pq", CRITICAL, "draft-ietf-tls-ecdhe-mlkem")
def pq_kex_type(inp: ProbeInput) -> Verdict:
    cite = "draft-ietf-tls-ecdhe-mlkem"
    if not inp.ctx.successful:
        return _no_handshake("pq_kex_type", CRITICAL, cite, inp)
    group = inp.ctx.key_exchange_group
    ok = group in inp.registries.pq_named_groups
    return Verdict("pq_kex_type", ok, CRITICAL,
                   ("Key exchange uses post-quantum algorithm: " if ok
                    else "Key exchange fell back to a classical group: ")
                   + _group_name(group),
                   expected="ML-KEM or hybrid KEM group",
                   actual=_group_name(group), citation=cite)


@register("pq_kex_hybrid", "pq", INFO, "hybrid decomposition rule (validator)")
def pq_kex_hybrid(inp: ProbeInput) -> Verdict:
    cite = "hybrid decomposition rule (validator)"
    if not inp.ctx.successful:
        return _no_handshake("pq_kex_hybrid", INFO, cite, inp)
    try:
        alg = kem.lookup(inp.ctx.key_exchange_group)
    except kem.KemError:
        return Verdict("pq_kex_hybrid", False, INFO, "unknown group", citation=cite)
    if alg.kind == "hybrid":
        sizes_ok = (len(inp.ctx.server_key_share) == alg.ct_len
                    and inp.ctx.shared_secret_size == alg.ss_len)
        return Verdict("pq_kex_hybrid", sizes_ok, INFO,
                       f"{alg.name} decomposes into {alg.classical_component} + "
                       f"{alg.pq_component}; both components exercised",
                       expected=f"ct {alg.ct_len} B, ss {alg.ss_len} B",
                       actual=f"ct {len(inp.ctx.server_key_share)} B, "
                              f"ss {inp.ctx.shared_secret_size} B", citation=cite)
    if alg.kind == "pure-pq":
        return Verdict("pq_kex_hybrid", True, INFO,
                       f"{alg.name} is a pure PQ KEM; no hybrid composition",
                       citation=cite)
    return Verdict("pq_kex_hybrid", False, INFO,
                   f"{alg.name} is classical; no PQ component exercised",
                   expected="hybrid or pure PQ group", actual=alg.name, citation=cite)


@register("pq_sig_type", "pq", CRITICAL, "FIPS 204")
def pq_sig_type(inp: ProbeInput) -> Verdict:
    cite = "FIPS 204"
    if not inp.ctx.successful:
        return _no_handshake("pq_sig_type", CRITICAL, cite, inp)
    scheme = inp.ctx.signature_scheme
    ok = scheme in inp.registries.pq_signature_schemes
    return Verdict("pq_sig_type", ok, CRITICAL,
                   ("Server uses post-quantum signature: " if ok
                    else "Server authenticated with a classical signature: ")
                   + _scheme_name(scheme),
                   expected="ML-DSA / SLH-DSA / composite CertificateVerify",
                   actual=_scheme_name(scheme), citation=cite)


@register("pq_full_pq", "pq", CRITICAL, "PQ-level definition (validator)")
def pq_full_pq(inp: ProbeInput) -> Verdict:
    cite = "PQ-level definition (validator)"
    if not inp.ctx.successful:
        return _no_handshake("pq_full_pq", CRITICAL, cite, inp)
    ok = inp.level == FULL_PQ
    return Verdict("pq_full_pq", ok, CRITICAL,
                   "Connection is fully post-quantum: PQ key exchange and PQ signature"
                   if ok else f"session level is {inp.level}",
                   expected="full-pq", actual=inp.level, citation=cite)


@register("pq_kex_strength", "pq", WARNING, "FIPS 203")
def pq_kex_strength(inp: ProbeInput) -> Verdict:
    cite = "FIPS 203"
    if not inp.ctx.successful:
        return _no_handshake("pq_kex_strength", WARNING, cite, inp)
    try:
        alg = kem.lookup(inp.ctx.key_exchange_group)
        cat = alg.nist_category
    except kem.KemError:
        cat = 0
    ok = cat >= 3
    return Verdict("pq_kex_strength", ok, WARNING,
                   f"negotiated KEM parameter set is NIST category {cat}"
                   + ("" if ok else " (requires category 3 or higher: ML-KEM-768 or ML-KEM-1024)"),
                   expected="NIST category >= 3", actual=f"category {cat}", citation=cite)


@register("pq_cert_chain_classical", "pq", INFO, "chain provenance rule (validator)")
def pq_cert_chain_classical(inp: ProbeInput) -> Verdict:
    cite = "chain provenance rule (validator)"
    if not inp.ctx.cert_chain:
        return _no_handshake("pq_cert_chain_classical", INFO, cite, inp)
    lines = []
    for i, view in enumerate(inp.ctx.cert_chain):
        status = "PQ signature" if view.is_pq_signed else "classical signature"
        lines.append(f"[{i}] {view.subject.removeprefix('CN=')}: {status} "
                     f"({view.sig_oid}, {len(view.signature)} B)")
    lines.append(f"[CertificateVerify] {_scheme_name(inp.ctx.signature_scheme)}")
    leaf_pq = inp.ctx.cert_chain[0].is_pq_signed
    return Verdict("pq_cert_chain_classical", leaf_pq, INFO, "\n".join(lines),
                   expected="PQ-signed leaf; classical links reported per link",
                   actual="leaf PQ-signed" if leaf_pq else "leaf classically signed",
                   citation=cite)


@register("pq_aead_cipher", "pq", WARNING, "RFC 8446 §9.1")
def pq_aead_cipher(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §9.1"
    if not inp.ctx.successful:
        return _no_handshake("pq_aead_cipher", WARNING, cite, inp)
    ok = inp.ctx.cipher_suite in PQ_AEAD_SUITES
    return Verdict("pq_aead_cipher", ok, WARNING,
                   f"bulk cipher {_suite_name(inp.ctx.cipher_suite)}"
                   + ("" if ok else " (requires AES-256-GCM or ChaCha20-Poly1305)"),
                   expected="AES-256-GCM or ChaCha20-Poly1305",
                   actual=_suite_name(inp.ctx.cipher_suite), citation=cite)


@register("pq_security_level", "pq", CRITICAL, "PQ-level definition (validator)")
def pq_security_level(inp: ProbeInput) -> Verdict:
    cite = "PQ-level definition (validator)"
    if not inp.ctx.successful:
        return _no_handshake("pq_security_level", CRITICAL, cite, inp)
    ok = inp.level != CLASSICAL
    return Verdict("pq_security_level", ok, CRITICAL,
                   f"Connection classified as {inp.level.upper()}",
                   expected="full-pq or hybrid-pq", actual=inp.level, citation=cite)


@register("pq_key_share_size", "pq", CRITICAL, "FIPS 203 / draft-ietf-tls-ecdhe-mlkem")
def pq_key_share_size(inp: ProbeInput) -> Verdict:
    cite = "FIPS 203 / draft-ietf-tls-ecdhe-mlkem"
    if not inp.ctx.successful:
        return _no_handshake("pq_key_share_size", CRITICAL, cite, inp)
    try:
        alg = kem.lookup(inp.ctx.key_exchange_group)
    except kem.KemError:
        return Verdict("pq_key_share_size", False, CRITICAL,
                       "negotiated group is unknown; cannot check share size",
                       citation=cite)
    measured = len(inp.ctx.server_key_share)
    ok = measured == alg.ct_len
    return Verdict("pq_key_share_size", ok, CRITICAL,
                   f"server key-share size matches {alg.name} specification"
                   if ok else
                   f"server key share is {measured} B, {alg.name} requires {alg.ct_len} B",
                   expected=f"{alg.ct_len} B", actual=f"{measured} B", citation=cite)


@register("pq_sig_size", "pq", WARNING, "FIPS 204")
def pq_sig_size(inp: ProbeInput) -> Verdict:
    cite = "FIPS 204"
    if not inp.ctx.successful or inp.ctx.signature_scheme is None:
        return _no_handshake("pq_sig_size", WARNING, cite, inp)
    try:
        alg = sigmod.lookup(inp.ctx.signature_scheme)
    except sigmod.SigError:
        return Verdict("pq_sig_size", False, WARNING,
                       "unknown signature scheme; cannot check size", citation=cite)
    measured = inp.ctx.signature_size
    if alg.sig_len is None:
        ok = 16 <= measured <= 1024  # DER ECDSA / variable classical envelope
        expected = "variable-length classical signature"
    else:
        ok = measured == alg.sig_len
        expected = f"{alg.sig_len} B"
    return Verdict("pq_sig_size", ok, WARNING,
                   f"CertificateVerify signature is {measured} B for {alg.name}",
                   expected=expected, actual=f"{measured} B", citation=cite)


# ================================================================== NRF ==

@register("nrf_reachable", "nrf", CRITICAL, "TS 29.510 §5.2")
def nrf_reachable(inp: ProbeInput) -> Verdict:
    cite = "TS 29.510 §5.2"
    if inp.h2_response is None:
        return Verdict("nrf_reachable", None, CRITICAL,
                       "NRF discovery probe not attempted", citation=cite)
    status = inp.h2_response.get("status")
    ok = status == 200
    return Verdict("nrf_reachable", ok, CRITICAL,
                   f"GET /nnrf-nfm/v1/nf-instances returned {status}",
                   expected="HTTP 200", actual=str(status), citation=cite)


@register("nrf_tls_required", "nrf", CRITICAL, "TS 33.501 §13")
def nrf_tls_required(inp: ProbeInput) -> Verdict:
    cite = "TS 33.501 §13"
    if inp.h2c_attempt == "not-attempted":
        return Verdict("nrf_tls_required", None, CRITICAL,
                       "cleartext probe not attempted", citation=cite)
    ok = inp.h2c_attempt == "refused"
    return Verdict("nrf_tls_required", ok, CRITICAL,
                   "cleartext h2c attempt refused" if ok
                   else "NRF endpoint answered a cleartext (h2c) request",
                   expected="plaintext refused", actual=inp.h2c_attempt, citation=cite)


@register("nrf_nfprofile_schema", "nrf", WARNING, "TS 29.510 §6.2")
def nrf_nfprofile_schema(inp: ProbeInput) -> Verdict:
    cite = "TS 29.510 §6.2"
    if inp.h2_response is None or inp.h2_response.get("status") != 200:
        return Verdict("nrf_nfprofile_schema", None, WARNING,
                       "no NFProfile document retrieved", citation=cite)
    try:
        doc = json.loads(inp.h2_response["body"])
    except (ValueError, TypeError):
        return Verdict("nrf_nfprofile_schema", False, WARNING,
                       "NFProfile response is not valid JSON",
                       expected="JSON NFProfile", actual="unparseable body", citation=cite)
    profiles = doc if isinstance(doc, list) else [doc]
    problems = []
    for i, profile in enumerate(profiles):
        if not isinstance(profile, dict):
            problems.append(f"profile[{i}] is not an object")
            continue
        if not isinstance(profile.get("nfType"), str):
            problems.append(f"profile[{i}]: nfType missing in profile")
        if not isinstance(profile.get("nfStatus"), str):
            problems.append(f"profile[{i}]: nfStatus missing or not a string")
        plmn = profile.get("plmnList")
        if plmn is not None and not isinstance(plmn, list):
            problems.append(f"profile[{i}]: plmnList is not a list")
    return Verdict("nrf_nfprofile_schema", not problems, WARNING,
                   "NFProfile carries nfType/nfStatus/PLMN fields with expected types"
                   if not problems else "; ".join(problems),
                   expected="nfType, nfStatus present; plmnList well-typed",
                   actual="ok" if not problems else "; ".join(problems), citation=cite)


# ============================================================ hardening ==

@register("sh_forward_secrecy", "hardening", INFO, "RFC 8446 §1.2")
def sh_forward_secrecy(inp: ProbeInput) -> Verdict:
    cite = "RFC 8446 §1.2"
    if not inp.ctx.successful:
        return _no_handshake("sh_forward_secrecy", INFO, cite, inp)
    # every TLS 1.3 exchange here is ephemeral ((EC)DHE or KEM-ephemeral)
    return Verdict("sh_forward_secrecy", True, INFO,
                   f"key exchange {_group_name(inp.ctx.key_exchange_group)} is "
                   "ephemeral (forward secrecy)", citation=cite)


@register("sh_no_compression", "hardening", WARNING, "CVE-2012-4929")
def sh_no_compression(inp: ProbeInput) -> Verdict:
    cite = "CVE-2012-4929"
    if not inp.ctx.successful:
        return _no_handshake("sh_no_compression", WARNING, cite, inp)
    return Verdict("sh_no_compression", True, WARNING,
                   "TLS-level compression disabled (TLS 1.3 removes it; "
                   "null compression verified in ServerHello)", citation=cite)


@register("sh_ca_constraints", "hardening", WARNING, "RFC 5280 §4.2.1.9")
def sh_ca_constraints(inp: ProbeInput) -> Verdict:
    cite = "RFC 5280 §4.2.1.9"
    if not inp.ctx.cert_chain:
        return _no_handshake("sh_ca_constraints", WARNING, cite, inp)
    issuers = inp.ctx.cert_chain[1:]
    if not issuers:
        return Verdict("sh_ca_constraints", None, WARNING,
                       "no intermediate or root presented; constraint not checkable",
                       citation=cite)
    bad = [v.subject for v in issuers if v.basic_constraints_ca is not True]
    return Verdict("sh_ca_constraints", not bad, WARNING,
                   "issuing links assert BasicConstraints CA:TRUE" if not bad
                   else f"links without CA:TRUE: {', '.join(bad)}",
                   expected="CA:TRUE on every issuing link",
                   actual="ok" if not bad else ", ".join(bad), citation=cite)


@register("sh_revocation_info", "hardening", WARNING, "RFC 6960")
def sh_revocation_info(inp: ProbeInput) -> Verdict:
    cite = "RFC 6960"
    if not inp.ctx.cert_chain:
        return _no_handshake("sh_revocation_info", WARNING, cite, inp)
    leaf = inp.ctx.cert_chain[0]
    ok = leaf.has_crl_dp or leaf.has_ocsp
    return Verdict("sh_revocation_info", ok, WARNING,
                   "leaf carries revocation pointers"
                   f" (CRL DP: {leaf.has_crl_dp}, OCSP/AIA: {leaf.has_ocsp})"
                   if ok else "leaf lacks both OCSP (AIA) and CRL distribution points",
                   expected="OCSP stapling or CRL DP present",
                   actual="present" if ok else "absent", citation=cite)
