"""Probe planner and suite runner.

One run opens at most seven connections per target: the primary PQ-first
handshake plus auxiliary probes (legacy-version offer, weak-cipher offer,
HTTP/1.1-only ALPN offer, resumption attempt, anonymous-client connection,
and a cleartext h2c attempt for NRF targets). Probe errors become verdicts,
never suite aborts.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass, field

from .. import evidence as evmod
from ..tls.client import client_handshake
from ..tls.context import HandshakeConfig
from . import h2 as h2mod
from .checks import ProbeInput
from .registry import (CRITICAL, WARNING, GROUP_NAMES, GroupResult, ValidationResult,
                       Verdict, tests_for_groups)

DEFAULT_GROUPS = ("tls", "5g", "pq", "nrf", "hardening")

# legacy cipher codepoints used for the weak-cipher-only offer
WEAK_OFFER_SUITES = [0x002F, 0x0035, 0xC013, 0xC014]


@dataclass
class ComplianceTarget:
    host: str
    port: int
    fqdn: str = ""
    nf_type: str = "unknown"
    declared_nf_type: str | None = None

    @property
    def address(self) -> str:
        return f"{self.fqdn or self.host}:{self.port}"


class SuiteConfig:
    """Connection parameters shared by every probe in a run."""

    def __init__(self, offered_groups=None, offered_sig_schemes=None, cipher_suites=None,
                 client_credential=None, trust_anchors=None, timeout_ms=5000,
                 registries=evmod.DEFAULT_REGISTRIES):
        self.offered_groups = offered_groups or [0x11EC, 0x0768, 0x001D]
        self.offered_sig_schemes = offered_sig_schemes or [
            0xFE63, 0xFE64, 0x0B01, 0x0B03, 0x0807, 0x0403]
        self.cipher_suites = cipher_suites or [0x1302, 0x1301, 0x1303]
        self.client_credential = client_credential
        self.trust_anchors = trust_anchors
        self.timeout_ms = timeout_ms
        self.registries = registries


def _connect(target: ComplianceTarget, timeout_ms: int):
    sock = socket.create_connection((target.host, target.port), timeout=timeout_ms / 1000)
    sock.settimeout(timeout_ms / 1000)
    return sock


def _handshake_probe(target: ComplianceTarget, config: HandshakeConfig):
    sock = _connect(target, config.timeout_ms)
    try:
        return client_handshake(sock, config, target.address), sock
    except Exception:
        sock.close()
        raise


def _base_config(target: ComplianceTarget, cfg: SuiteConfig,
                 **overrides) -> HandshakeConfig:
    params = dict(
        offered_groups=list(cfg.offered_groups),
        offered_sig_schemes=list(cfg.offered_sig_schemes),
        cipher_suites=list(cfg.cipher_suites),
        sni=target.fqdn or target.host,
        alpn=["h2"],
        client_credential=cfg.client_credential,
        trust_anchors=cfg.trust_anchors,
        timeout_ms=cfg.timeout_ms,
        expected_name=target.fqdn or "",
        store_ticket=True,
    )
    params.update(overrides)
    return HandshakeConfig(**params)


def run_probes(target: ComplianceTarget, cfg: SuiteConfig,
               groups=DEFAULT_GROUPS) -> ProbeInput:
    from ..tls.context import TestContext
    inp = ProbeInput(ctx=TestContext(target=target.address, failure="not probed"),
                     registries=cfg.registries,
                     target_host=target.host, target_port=target.port,
                     expected_fqdn=target.fqdn, nf_type=target.nf_type,
                     declared_nf_type=target.declared_nf_type)

    # 1. primary PQ-first handshake
    primary_sock = None
    try:
        ctx, primary_sock = _handshake_probe(target, _base_config(target, cfg))
    except OSError as exc:
        from ..tls.context import TestContext
        ctx = TestContext(target=target.address, failure=f"transport error: {exc}")
    inp.ctx = ctx
    inp.level = evmod.classify(ctx.key_exchange_group, ctx.signature_scheme,
                               cfg.registries) if ctx.successful else evmod.CLASSICAL

    # NRF discovery over the primary session, while it is still open
    if "nrf" in groups and target.nf_type == "NRF" and ctx.successful \
            and ctx.alpn_result == "h2" and ctx.session is not None:
        try:
            inp.h2_response = h2mod.h2_get(ctx.session, "/nnrf-nfm/v1/nf-instances",
                                           target.fqdn or target.host,
                                           timeout=cfg.timeout_ms / 1000)
        except Exception as exc:
            inp.h2_response = {"status": None, "headers": [], "body": b"",
                               "findings": [f"h2 error: {exc}"]}
    if ctx.session is not None:
        ctx.session.close()
    elif primary_sock is not None:
        primary_sock.close()

    # 2. legacy-version offer, expecting refusal
    try:
        legacy_ctx, sock = _handshake_probe(target, _base_config(
            target, cfg, offer_tls13=False, store_ticket=False,
            offered_groups=[0x001D, 0x0017],
            cipher_suites=[0x1301, 0x002F, 0x0035]))
        sock.close()
        inp.legacy_offer = ("accepted" if "accepted legacy version offer"
                            in legacy_ctx.failure else "refused")
    except OSError as exc:
        inp.legacy_offer = f"error: {exc}"

    # 3. weak-cipher-only offer, expecting refusal
    try:
        weak_ctx, sock = _handshake_probe(target, _base_config(
            target, cfg, cipher_suites=list(WEAK_OFFER_SUITES), store_ticket=False))
        sock.close()
        inp.weak_offer = ("accepted" if weak_ctx.cipher_suite in WEAK_OFFER_SUITES
                          else "refused")
    except OSError as exc:
        inp.weak_offer = f"error: {exc}"

    # 4. HTTP/1.1-only ALPN offer
    try:
        alpn_ctx, sock = _handshake_probe(target, _base_config(
            target, cfg, alpn=["http/1.1"], store_ticket=False))
        sock.close()
        if alpn_ctx.successful:
            inp.http11_offer = "accepted"
        else:
            inp.http11_offer = "refused"
    except OSError as exc:
        inp.http11_offer = f"error: {exc}"

    # 5. resumption attempt with the primary session's ticket
    if ctx.ticket is None:
        inp.resumption = "no-ticket"
    else:
        try:
            res_ctx, sock = _handshake_probe(target, _base_config(
                target, cfg, resumption=ctx.ticket, store_ticket=False))
            sock.close()
            if res_ctx.successful and res_ctx.resumed:
                inp.resumption = "resumed"
                inp.resumption_suite = res_ctx.cipher_suite
            elif res_ctx.successful:
                inp.resumption = "full-handshake"
            else:
                inp.resumption = f"error: {res_ctx.failure}"
        except OSError as exc:
            inp.resumption = f"error: {exc}"

    # 6. anonymous-client connection: does the server enforce mTLS?
    try:
        anon_ctx, sock = _handshake_probe(target, _base_config(
            target, cfg, client_credential=None, store_ticket=False))
        if not anon_ctx.successful:
            inp.mtls_probe = "enforced"
        elif anon_ctx.session is not None:
            move, code = anon_ctx.session.observe(timeout=2.0)
            inp.mtls_probe = "enforced" if move in ("alert", "closed") else "not-enforced"
        else:
            inp.mtls_probe = "not-enforced"
        sock.close()
    except OSError:
        inp.mtls_probe = "not-attempted"

    # 7. cleartext h2c attempt (NRF only)
    if "nrf" in groups and target.nf_type == "NRF":
        try:
            sock = _connect(target, cfg.timeout_ms)
            sock.sendall(h2mod.PREFACE + h2mod.frame(h2mod.FRAME_SETTINGS, 0, 0, b""))
            sock.settimeout(2.0)
            try:
                reply = sock.recv(1024)
            except TimeoutError:
                reply = b""
            sock.close()
            frames, _ = h2mod.parse_frames(reply)
            answered_h2 = any(f[0] == h2mod.FRAME_SETTINGS for f in frames)
            inp.h2c_attempt = "accepted" if answered_h2 else "refused"
        except OSError:
            inp.h2c_attempt = "refused"
    return inp


def evaluate(inp: ProbeInput, groups=DEFAULT_GROUPS,
             fuzz_findings=None) -> tuple[dict[str, GroupResult], bool]:
    selected = [g for g in DEFAULT_GROUPS if g in groups]
    if inp.nf_type != "NRF" and "nrf" in selected:
        selected.remove("nrf")  # NRF group runs only against NRF targets
    results = {g: GroupResult(GROUP_NAMES[g]) for g in selected}
    for test in tests_for_groups(selected):
        try:
            verdict = test.check(inp)
        except Exception as exc:  # a buggy check must not abort the suite
            verdict = Verdict(test.test_id, False, test.severity,
                              details=f"check raised: {exc}", citation=test.citation)
        if not verdict.citation:
            verdict.citation = test.citation
        results[test.group].verdicts.append(verdict)
    cve_failure = False
    if fuzz_findings and "hardening" in results:
        merged, cve_failure = merge_fuzz_findings(fuzz_findings)
        results["hardening"].verdicts.extend(merged)
    return results, cve_failure


FUZZ_VERDICT_MAP = {
    "EmptyMessage": ("fuzz_empty_message", "RFC 8446 §5.1"),
    "TruncatedClientHello": ("fuzz_truncated_ch", "RFC 8446 §6.2"),
    "InvalidRecordType": ("fuzz_invalid_record_type", "RFC 8446 §5.1"),
    "BadRecordLength": ("fuzz_bad_record_length", "RFC 8446 §5.1"),
    "DuplicateClientHello": ("fuzz_duplicate_ch", "RFC 8446 §4.1.2"),
    "MalformedExtensions": ("fuzz_malformed_ext", "RFC 8446 §4.2"),
    "InvalidKeyShareGroup": ("fuzz_invalid_keyshare", "RFC 8446 §4.2.8"),
    "OversizedPayload": ("fuzz_oversized_payload", "RFC 8446 §5.1"),
    "ZeroLengthKeyShare": ("fuzz_zero_length_keyshare", "RFC 8446 §4.2.8"),
    "LargeRecordSplit": ("fuzz_large_record_split", "RFC 8446 §5.1"),
    "SSLv3Downgrade": ("cve_poodle", "CVE-2014-3566"),
    "TLS10Downgrade": ("cve_beast", "CVE-2011-3389"),
    "NullCipherOffer": ("cve_null_cipher", "RFC 8446 §9.1"),
    "CompressionOffer": ("cve_crime", "CVE-2012-4929"),
    "RenegotiationProbe": ("cve_rfc5746_reneg", "RFC 5746"),
    "ServerHelloTimeout": ("fuzz_serverhello_timeout", "response-time budget (validator)"),
}


def merge_fuzz_findings(findings) -> tuple[list[Verdict], bool]:
    """Fuzz results become first-class hardening verdicts.

    A failed probe with a CVE identifier is critical (and forces grade F);
    other failures are hygiene warnings.
    """
    verdicts = []
    cve_failure = False
    for result in findings:
        test_id, citation = FUZZ_VERDICT_MAP.get(
            result.test_name, (f"fuzz_{result.test_name.lower()}", "fuzz case (validator)"))
        is_cve = bool(result.cve and result.cve.upper().startswith("CVE-"))
        severity = CRITICAL if (is_cve and not result.success) else WARNING
        if not result.success and is_cve:
            cve_failure = True
        verdicts.append(Verdict(
            test_id, result.success, severity,
            details=(f"fuzz case {result.test_name}: "
                     + (result.error or "behaved as expected")),
            expected=result.expected_summary or "",
            actual=result.observed_summary or "",
            citation=result.cve or citation))
        result.verdict_id = test_id
    return verdicts, cve_failure


def run_suite(target: ComplianceTarget, cfg: SuiteConfig | None = None,
              groups=DEFAULT_GROUPS, fuzz_findings=None,
              run_id: str | None = None) -> ValidationResult:
    cfg = cfg or SuiteConfig()
    started = time.perf_counter()
    inp = run_probes(target, cfg, groups)
    results, cve_failure = evaluate(inp, groups, fuzz_findings)
    ev = None
    if inp.ctx.successful:
        try:
            ev = evmod.build_evidence(inp.ctx, cfg.registries).to_json()
        except evmod.EvidenceError:
            ev = None
    criticals = sum(1 for g in results.values()
                    for v in g.verdicts if v.passed is False and v.severity == CRITICAL)
    letter = evmod.grade(inp.level, criticals, cve_failure)
    duration_ms = int((time.perf_counter() - started) * 1000)
    return ValidationResult(
        id=run_id or f"val-{int(time.time())}",
        target=target.address,
        nf_type=target.nf_type,
        duration_ms=duration_ms,
        groups=results,
        evidence=ev,
        security_level=inp.level,
        grade=letter,
    )
