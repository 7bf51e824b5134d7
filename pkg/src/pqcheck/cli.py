"""Orchestration front-end: mode dispatch and artifact persistence.

Modes: check (connectivity + classification), validate (compliance suite),
bench (matrix run), fuzz (mutation batch), full (fuzz -> validate with
merged findings -> bench). Artifacts land under the logs directory as
val-<epoch>.json / 5gc-<epoch>.json / fuzz-batch-<epoch>.json, each
embedding the tool version and a digest of the driving configuration.

Exit codes: 0 clean, 1 critical failures found, 2 unreadable config,
3 no reachable targets.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import click

from . import __version__, bench as benchmod, evidence as evmod, fuzzer as fuzzmod
from .compliance.runner import ComplianceTarget, SuiteConfig, run_suite
from .config import ConfigError, RunConfig, TargetRecord, load_config
from .crypto import sig as sigmod
from .pki import privkey as pkmod, x509
from .tls.client import client_handshake
from .tls.context import ClientCredential, HandshakeConfig

_ARTIFACT_LOCK = threading.Lock()
_LAST_IDS: set[str] = set()


def artifact_id(prefix: str) -> str:
    """Epoch-seconds id; same-second collisions get a suffix counter."""
    with _ARTIFACT_LOCK:
        base = f"{prefix}-{int(time.time())}"
        candidate = base
        counter = 1
        while candidate in _LAST_IDS:
            counter += 1
            candidate = f"{base}-{counter}"
        _LAST_IDS.add(candidate)
        return candidate


def write_artifact(logs_dir: str, name: str, document: dict, config_digest: str,
                   json_only: bool = False) -> str:
    os.makedirs(logs_dir, exist_ok=True)
    document = dict(document)
    document["tool_version"] = __version__
    document["config_digest"] = config_digest
    path = os.path.join(logs_dir, f"{name}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2)
    if not json_only:
        click.echo(f"wrote {path}")
    return path


def config_digest(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.raw or {}, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def load_client_credential(cfg: RunConfig) -> ClientCredential | None:
    if not cfg.client_cert or not cfg.client_key:
        return None
    with open(cfg.client_cert, "rb") as fh:
        chain = [der for der in x509.from_pem_or_der(fh.read(), "CERTIFICATE")]
    with open(cfg.client_key, "rb") as fh:
        key_der = x509.from_pem_or_der(fh.read(), "PRIVATE KEY")[0]
    doc = pkmod.decode_private_key(key_der)
    name = doc.algorithm_name
    scheme = sigmod.SIG_BY_NAME.get(name)
    if scheme is None:
        raise ConfigError(f"client key algorithm {name} has no TLS signature scheme")
    expanded = doc.expanded_key
    if expanded is None:
        expanded, _pub = pkmod.expand_from_seed(doc.algorithm_oid, doc.seed)
    return ClientCredential(chain, scheme.id, expanded)


def load_trust_anchors(cfg: RunConfig):
    if not cfg.ca_bundle:
        return None
    with open(cfg.ca_bundle, "rb") as fh:
        ders = x509.from_pem_or_der(fh.read(), "CERTIFICATE")
    return [x509.parse_certificate(d) for d in ders]


def reachable(target: TargetRecord, timeout_ms: int) -> bool:
    try:
        with socket.create_connection((target.host, target.port),
                                      timeout=timeout_ms / 1000):
            return True
    except OSError:
        return False


def _handshake_config(cfg: RunConfig, target: TargetRecord,
                      credential) -> HandshakeConfig:
    return HandshakeConfig(
        offered_groups=list(cfg.key_exchanges),
        offered_sig_schemes=list(cfg.signature_schemes),
        cipher_suites=list(cfg.cipher_suites),
        sni=target.fqdn or target.host,
        client_credential=credential,
        timeout_ms=cfg.timeout_ms,
        expected_name=target.fqdn,
        store_ticket=False)


def run_check(cfg: RunConfig, credential, json_only: bool) -> int:
    """Single connectivity + classification pass per target."""
    worst = 0
    for target in cfg.targets:
        try:
            sock = socket.create_connection((target.host, target.port),
                                            timeout=cfg.timeout_ms / 1000)
            sock.settimeout(cfg.timeout_ms / 1000)
        except OSError as exc:
            click.echo(f"{target.address}: unreachable ({exc})")
            worst = max(worst, 3)
            continue
        ctx = client_handshake(sock, _handshake_config(cfg, target, credential),
                               target.address)
        if ctx.session:
            ctx.session.close()
        else:
            sock.close()
        if ctx.successful:
            level = evmod.classify(ctx.key_exchange_group, ctx.signature_scheme)
            if not json_only:
                click.echo(f"{target.address}: {level} "
                           f"(group 0x{ctx.key_exchange_group:04x}, "
                           f"sigscheme 0x{ctx.signature_scheme:04x}, "
                           f"{ctx.timings.handshake_total_ms:.1f} ms)")
        else:
            if not json_only:
                click.echo(f"{target.address}: handshake failed: {ctx.failure}")
            worst = max(worst, 1)
    return worst


def run_validate(cfg: RunConfig, credential, anchors, digest: str, json_only: bool,
                 fuzz_results=None) -> int:
    suite_cfg = SuiteConfig(
        offered_groups=list(cfg.key_exchanges),
        offered_sig_schemes=list(cfg.signature_schemes),
        cipher_suites=list(cfg.cipher_suites),
        client_credential=credential,
        trust_anchors=anchors,
        timeout_ms=cfg.timeout_ms)

    def one(target: TargetRecord):
        ct = ComplianceTarget(target.host, target.port, fqdn=target.fqdn,
                              nf_type=target.nf_type,
                              declared_nf_type=target.declared_nf_type)
        findings = (fuzz_results or {}).get(target.address)
        return target, run_suite(ct, suite_cfg, fuzz_findings=findings,
                                 run_id=artifact_id("val"))

    exit_code = 0
    with ThreadPoolExecutor(max_workers=min(8, max(1, len(cfg.targets)))) as pool:
        for target, result in pool.map(one, cfg.targets):
            write_artifact(cfg.logs_dir, result.id, result.to_json(), digest, json_only)
            if not json_only:
                click.echo(f"{target.address}: grade {result.grade} "
                           f"({result.security_level}); "
                           f"{result.passed_tests}/{result.total_tests} passed, "
                           f"{result.failed_tests} failed, {result.warnings} warnings")
            if result.critical_failures():
                exit_code = 1
    return exit_code


def run_bench(cfg: RunConfig, credential, digest: str, json_only: bool) -> int:
    matrix = [(g, s) for g in cfg.key_exchanges for s in cfg.signature_schemes]
    targets = [benchmod.BenchTarget(t.host, t.port, t.nf_type, t.fqdn)
               for t in cfg.targets]
    bc = benchmod.BenchConfig(
        matrix=matrix, targets=targets, mode=cfg.bench.mode,
        clients=cfg.bench.clients, pool_workers=cfg.bench.pool_workers,
        cipher_suites=list(cfg.cipher_suites), timeout_ms=cfg.timeout_ms,
        warmup=cfg.bench.warmup, client_credential=credential)
    results, aggregates = benchmod.run_benchmark(bc)
    run_name = artifact_id("5gc")
    doc = benchmod.export_json(results, aggregates, bc.mode)
    write_artifact(cfg.logs_dir, run_name, doc, digest, json_only)
    csv_path = os.path.join(cfg.logs_dir, f"{run_name}.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(benchmod.export_csv(results))
    if not json_only:
        click.echo(f"wrote {csv_path}")
        for key, agg in sorted(aggregates.items()):
            if agg.n:
                hs = agg.metrics["handshake_ms"]
                click.echo(f"  {key}: n={agg.n} p50={hs['p50']}ms p95={hs['p95']}ms "
                           f"p99={hs['p99']}ms failures={agg.failures}")
            else:
                click.echo(f"  {key}: all {agg.failures} attempts failed")
    return 0 if any(r.success for r in results) else 1


def run_fuzz(cfg: RunConfig, credential, digest: str, json_only: bool):
    hs = HandshakeConfig(
        offered_groups=list(cfg.key_exchanges),
        offered_sig_schemes=list(cfg.signature_schemes),
        cipher_suites=list(cfg.cipher_suites),
        sni=cfg.targets[0].fqdn or cfg.targets[0].host if cfg.targets else "",
        client_credential=credential, timeout_ms=cfg.timeout_ms)
    fz = fuzzmod.FuzzConfig(handshake=hs, timeout=cfg.timeout_ms / 1000,
                            hello_budget_s=cfg.fuzz.hello_budget_s, seed=cfg.fuzz.seed)
    target_tuples = [(t.host, t.port, t.nf_type, t.address) for t in cfg.targets]
    out = fuzzmod.run_fuzz_batch(target_tuples, fz, batch_id=artifact_id("fuzz-batch"))
    report = out["report"]
    write_artifact(cfg.logs_dir, report["id"], report, digest, json_only)
    if not json_only:
        click.echo(f"fuzz: {report['passed_tests']}/{report['total_tests']} passed")
    failed_cve = any(
        not r.success and (r.cve or "").upper().startswith("CVE-")
        for results in out["results"].values() for r in results)
    return out["results"], (1 if failed_cve else 0)


@click.command("pqcheck", context_settings={"auto_envvar_prefix": "PQCHECK"})
@click.option("--mode", type=click.Choice(["check", "validate", "bench", "fuzz", "full"]),
              default=None, help="override the configured run mode")
@click.option("--config", "config_path", type=str, default=None,
              help="YAML run configuration")
@click.option("--target", "targets", multiple=True,
              help="host:port target (repeatable; overrides config targets)")
@click.option("--logs", default=None, help="artifact directory")
@click.option("--clients", type=int, default=None, help="benchmark client count")
@click.option("--clients-mode", type=click.Choice(list(benchmod.MODES)), default=None)
@click.option("--pool-workers", type=int, default=None)
@click.option("--timeout-ms", type=int, default=None)
@click.option("--ca", default=None, help="CA bundle (PEM) for chain verification")
@click.option("--cert", default=None, help="client certificate chain (PEM)")
@click.option("--key", default=None, help="client private key (PEM/DER)")
@click.option("--json-only", is_flag=True, help="suppress human-readable output")
def main(mode, config_path, targets, logs, clients, clients_mode, pool_workers,
         timeout_ms, ca, cert, key, json_only):
    """Post-quantum TLS validation: check | validate | bench | fuzz | full."""
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        if mode:
            cfg.mode = mode
        if targets:
            cfg.targets = [TargetRecord.from_address(t) for t in targets]
        if logs:
            cfg.logs_dir = logs
        if clients is not None:
            cfg.bench.clients = clients
        if clients_mode:
            cfg.bench.mode = clients_mode
        if pool_workers is not None:
            cfg.bench.pool_workers = pool_workers
        if timeout_ms is not None:
            cfg.timeout_ms = timeout_ms
        if ca:
            cfg.ca_bundle = ca
        if cert:
            cfg.client_cert = cert
        if key:
            cfg.client_key = key
        if not cfg.targets:
            raise ConfigError("no targets configured")
        credential = load_client_credential(cfg)
        anchors = load_trust_anchors(cfg)
    except (ConfigError, OSError, pkmod.PrivateKeyError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    alive = [t for t in cfg.targets if reachable(t, cfg.timeout_ms)]
    if not alive:
        click.echo("no reachable targets", err=True)
        sys.exit(3)
    cfg.targets = alive

    digest = config_digest(cfg)
    exit_code = 0
    if cfg.mode == "check":
        exit_code = run_check(cfg, credential, json_only)
    elif cfg.mode == "validate":
        exit_code = run_validate(cfg, credential, anchors, digest, json_only)
    elif cfg.mode == "bench":
        exit_code = run_bench(cfg, credential, digest, json_only)
    elif cfg.mode == "fuzz":
        _results, exit_code = run_fuzz(cfg, credential, digest, json_only)
    else:  # full
        fuzz_results, fuzz_code = run_fuzz(cfg, credential, digest, json_only)
        val_code = run_validate(cfg, credential, anchors, digest, json_only,
                                fuzz_results=fuzz_results)
        bench_code = run_bench(cfg, credential, digest, json_only)
        exit_code = max(fuzz_code, val_code, bench_code)
    sys.exit(exit_code)


if __name__ == "__main__":
    main()
