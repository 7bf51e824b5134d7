"""Session classification and the typed PQ evidence document.

A session is labeled by membership alone: full-pq when both the negotiated
group and the CertificateVerify scheme sit in the PQ registries, hybrid-pq
when only the group does, classical otherwise. Chain status is reported as
supplementary evidence and never changes the label. Evidence is built only
from sessions whose Finished MACs verified; the builder refuses anything
else so an evidence document always reflects a real negotiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import aead, kem, sig as sigmod
from .pki import x509
from .tls.context import TestContext

FULL_PQ = "full-pq"
HYBRID_PQ = "hybrid-pq"
CLASSICAL = "classical"

SCHEMA = "pq-tls-client-v1"


@dataclass(frozen=True)
class PQRegistries:
    """Codepoint sets driving classification; shipped as editable data."""

    pq_named_groups: frozenset[int]
    pq_signature_schemes: frozenset[int]


def default_registries() -> PQRegistries:
    groups = {alg.id for alg in kem.KEM_ALGORITHMS.values() if alg.kind in ("pure-pq", "hybrid")}
    # composites count as PQ signatures for classification purposes
    schemes = {alg.id for alg in sigmod.SIG_ALGORITHMS.values()
               if alg.kind in ("pure-pq", "composite")}
    return PQRegistries(frozenset(groups), frozenset(schemes))


DEFAULT_REGISTRIES = default_registries()


def classify(group: int | None, scheme: int | None,
             registries: PQRegistries = DEFAULT_REGISTRIES) -> str:
    pq_kex = group in registries.pq_named_groups
    pq_sig = scheme in registries.pq_signature_schemes
    if pq_kex and pq_sig:
        return FULL_PQ
    if pq_kex:
        return HYBRID_PQ
    return CLASSICAL


@dataclass
class EvidenceItem:
    category: str
    claim: str
    evidence: str
    verified: bool

    def to_json(self) -> dict:
        return {"category": self.category, "claim": self.claim,
                "evidence": self.evidence, "verified": self.verified}


@dataclass
class PQEvidence:
    security_level: str
    is_pq_secure: bool
    is_fully_pq: bool
    kex_evidence: dict
    sig_evidence: dict
    chain_evidence: dict
    evidence_items: list[EvidenceItem]
    timing_us: dict
    schema: str = SCHEMA

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "security_level": self.security_level,
            "is_pq_secure": self.is_pq_secure,
            "is_fully_pq": self.is_fully_pq,
            "kex_evidence": self.kex_evidence,
            "sig_evidence": self.sig_evidence,
            "chain_evidence": self.chain_evidence,
            "evidence_items": [i.to_json() for i in self.evidence_items],
            "timing_us": self.timing_us,
        }


class EvidenceError(ValueError):
    """Refused to build evidence (soundness: the session never verified)."""


def _group_label(group: int) -> str:
    try:
        return f"{kem.lookup(group).name} (0x{group:04x})"
    except kem.KemError:
        return f"unknown (0x{group:04x})"


def _scheme_label(scheme: int) -> str:
    try:
        return f"{sigmod.lookup(scheme).name} (0x{scheme:04x})"
    except sigmod.SigError:
        return f"unknown (0x{scheme:04x})"


def chain_is_pq(views: list[x509.CertificateView]) -> bool:
    """True only when every link in the chain carries a PQ signature OID."""
    return bool(views) and all(v.is_pq_signed for v in views)


def build_evidence(ctx: TestContext,
                   registries: PQRegistries = DEFAULT_REGISTRIES) -> PQEvidence:
    if not ctx.successful:
        raise EvidenceError(
            "refusing to build evidence from a failed handshake: " + (ctx.failure or "unknown"))

    group = ctx.key_exchange_group
    scheme = ctx.signature_scheme
    level = classify(group, scheme, registries)
    items: list[EvidenceItem] = []

    try:
        kalg = kem.lookup(group)
    except kem.KemError:
        kalg = None
    kex_type = kalg.kind if kalg else "unknown"
    if kex_type == "pure-pq":
        kex_type = "pure"
    kex_evidence = {
        "negotiated_group": _group_label(group),
        "group_id": group,
        "type": kex_type if kex_type != "classical" else "classical",
        "server_key_share_size": len(ctx.server_key_share),
        "shared_secret_size": ctx.shared_secret_size,
    }
    if kalg is not None and kalg.kind == "hybrid":
        kex_evidence["pq_component"] = kalg.pq_component
        kex_evidence["classical_component"] = kalg.classical_component
        items.append(EvidenceItem(
            "key_exchange", "KEX is hybrid post-quantum",
            f"group 0x{group:04X} decomposes into {kalg.classical_component} + "
            f"{kalg.pq_component}; wire order puts the ML-KEM key first, the "
            "shared secret concatenates the classical part first",
            True))
    items.append(EvidenceItem(
        "key_exchange",
        f"negotiated group is {'a PQ/hybrid' if group in registries.pq_named_groups else 'a classical'} NamedGroup",
        f"group 0x{group:04X} membership checked against the PQ group registry",
        True))
    if kalg is not None:
        items.append(EvidenceItem(
            "key_exchange",
            f"server key-share size matches {kalg.pq_component or kalg.name} specification",
            f"measured {len(ctx.server_key_share)} bytes, registry expects {kalg.ct_len}",
            len(ctx.server_key_share) == kalg.ct_len))
        items.append(EvidenceItem(
            "key_exchange", "shared secret length matches the algorithm",
            f"measured {ctx.shared_secret_size} bytes, registry expects {kalg.ss_len}",
            ctx.shared_secret_size == kalg.ss_len))

    try:
        salg = sigmod.lookup(scheme) if scheme is not None else None
    except sigmod.SigError:
        salg = None
    sig_type = "unknown"
    if salg is not None:
        sig_type = {"classical": "classical", "pure-pq": "post-quantum",
                    "composite": "composite"}[salg.kind]
    sig_evidence = {
        "negotiated_scheme": _scheme_label(scheme) if scheme is not None else None,
        "scheme_id": scheme,
        "type": sig_type,
        "signature_size": ctx.signature_size,
        "cert_key_algorithm": (
            x509.spki_scheme(ctx.cert_chain[0]).name
            if ctx.cert_chain and x509.spki_scheme(ctx.cert_chain[0]) else "unknown"),
    }
    items.append(EvidenceItem(
        "signature",
        "CertificateVerify uses a "
        + ("post-quantum/composite" if scheme in registries.pq_signature_schemes
           else "classical") + " signature scheme",
        f"scheme 0x{scheme:04X}, size {ctx.signature_size} B" if scheme is not None
        else "no CertificateVerify observed",
        True))

    chain_evidence = {
        "leaf_sig_alg": (_oid_label(ctx.cert_chain[0].sig_oid) if ctx.cert_chain else None),
        "chain_is_pq": chain_is_pq(ctx.cert_chain),
        "chain_depth": len(ctx.cert_chain),
    }
    if ctx.cert_chain:
        per_link = "; ".join(
            f"[{i}] {v.subject}: {'PQ' if v.is_pq_signed else 'classical'} signature"
            for i, v in enumerate(ctx.cert_chain))
        items.append(EvidenceItem("certificate_chain",
                                  "per-link chain signature provenance recorded",
                                  per_link, True))

    timing_us = {
        "keygen": ctx.timings.keygen_us,
        "encap": ctx.timings.encap_us,
        "decap": ctx.timings.decap_us,
        "verify": ctx.timings.verify_us,
        "handshake_total_ms": round(ctx.timings.handshake_total_ms, 3),
    }

    return PQEvidence(
        security_level=level,
        is_pq_secure=level != CLASSICAL,
        is_fully_pq=level == FULL_PQ,
        kex_evidence=kex_evidence,
        sig_evidence=sig_evidence,
        chain_evidence=chain_evidence,
        evidence_items=items,
        timing_us=timing_us,
    )


def _oid_label(oid: str) -> str:
    scheme = x509.SIG_OID_TO_SCHEME.get(oid)
    return scheme.name if scheme else oid


# ---------------------------------------------------------------- grading

GRADE_LADDER = ["A+", "A", "B", "C", "F"]


def grade(level: str, critical_failures: int, cve_fuzz_failure: bool = False) -> str:
    """SSL-Labs-style letter.

    Start at A+; one letter off at >=1 critical failure, another at >=3, a
    third at >=5. A classical session or a failed CVE-identified fuzz probe
    is an automatic F.
    """
    if level == CLASSICAL or cve_fuzz_failure:
        return "F"
    steps = 0
    if critical_failures >= 1:
        steps += 1
    if critical_failures >= 3:
        steps += 1
    if critical_failures >= 5:
        steps += 1
    return GRADE_LADDER[steps]
