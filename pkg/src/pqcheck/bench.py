"""Handshake benchmarking across the (KEX, Sig) matrix.

Execution modes: single (smoke), sequential (isolated per-handshake cost),
parallel (every client at once; diagnostic only and excluded from
reportable aggregates by default), and pool (bounded workers, default
2 x logical CPUs). Aggregation groups results by "<KEX>+<Sig>", computes
mean/stddev and nearest-rank P50/P75/P90/P95/P99, and buckets each metric
into a logarithmic histogram. Artifacts export as CSV (one row per client)
and hierarchical JSON including the per-session PQ evidence.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import evidence as evmod
from .crypto import kem, sig as sigmod
from .tls.client import client_handshake
from .tls.context import HandshakeConfig

MODES = ("single", "sequential", "parallel", "pool")

HISTOGRAM_CUTS_MS = [0, 1, 2, 5, 10, 20, 50, 100, 200, 500]

AGG_METRICS = ("handshake_ms", "keygen_us", "encap_us", "decap_us", "sign_us",
               "verify_us", "crypto_total_us", "bytes_sent", "bytes_received")


@dataclass
class BenchTarget:
    host: str
    port: int
    nf_type: str = "unknown"
    fqdn: str = ""

    @property
    def address(self) -> str:
        return f"{self.fqdn or self.host}:{self.port}"


@dataclass
class BenchConfig:
    matrix: list[tuple[int, int]]
    targets: list[BenchTarget]
    mode: str = "pool"
    clients: int = 4
    pool_workers: int = 0  # 0 = 2 x logical CPUs
    cipher_suites: list[int] = field(default_factory=lambda: [0x1302, 0x1301, 0x1303])
    timeout_ms: int = 10000
    warmup: bool = True
    client_credential: object = None

    def __post_init__(self):
        if not self.matrix:
            raise ValueError("benchmark matrix must be nonempty")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.pool_workers <= 0:
            self.pool_workers = 2 * (os.cpu_count() or 1)


@dataclass
class ClientResult:
    client_id: str
    nf_type: str
    address: str
    success: bool
    kex_algorithm: str = ""
    sig_algorithm: str = ""
    cipher_suite: str = ""
    handshake_ms: float = 0.0
    keygen_us: int = 0
    encap_us: int = 0
    decap_us: int = 0
    sign_us: int = 0
    verify_us: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    error: str | None = None
    pq_evidence: dict | None = None

    @property
    def crypto_total_us(self) -> int:
        return self.keygen_us + self.encap_us + self.decap_us + self.sign_us + self.verify_us

    def metric(self, name: str) -> float:
        if name == "crypto_total_us":
            return self.crypto_total_us
        return getattr(self, name)

    def to_json(self) -> dict:
        out = {
            "client_id": self.client_id,
            "nf_type": self.nf_type,
            "address": self.address,
            "success": self.success,
            "kex_algorithm": self.kex_algorithm,
            "sig_algorithm": self.sig_algorithm,
            "cipher_suite": self.cipher_suite,
            "handshake_ms": self.handshake_ms,
            "keygen_us": self.keygen_us,
            "encap_us": self.encap_us,
            "decap_us": self.decap_us,
            "sign_us": self.sign_us,
            "verify_us": self.verify_us,
            "bytes_sent": self.bytes_sent,
            "bytes_recv": self.bytes_received,
        }
        if self.error:
            out["error"] = self.error
        if self.pq_evidence is not None:
            out["pq_evidence"] = self.pq_evidence
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "ClientResult":
        return cls(
            client_id=doc["client_id"], nf_type=doc["nf_type"], address=doc["address"],
            success=doc["success"], kex_algorithm=doc.get("kex_algorithm", ""),
            sig_algorithm=doc.get("sig_algorithm", ""),
            cipher_suite=doc.get("cipher_suite", ""),
            handshake_ms=doc.get("handshake_ms", 0.0),
            keygen_us=doc.get("keygen_us", 0), encap_us=doc.get("encap_us", 0),
            decap_us=doc.get("decap_us", 0), sign_us=doc.get("sign_us", 0),
            verify_us=doc.get("verify_us", 0), bytes_sent=doc.get("bytes_sent", 0),
            bytes_received=doc.get("bytes_recv", 0), error=doc.get("error"),
            pq_evidence=doc.get("pq_evidence"))


# ---------------------------------------------------------- percentiles

def nearest_rank(sorted_values: list[float], q: float) -> float:
    """Nearest-rank percentile: value at index ceil(q*n) of the sorted list."""
    if not sorted_values:
        raise ValueError("no samples")
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def bucketize(value_ms: float) -> int:
    """Bucket index for the logarithmic histogram; final bucket open-ended."""
    if value_ms < 0:
        raise ValueError("negative duration")
    for i in range(1, len(HISTOGRAM_CUTS_MS)):
        if value_ms < HISTOGRAM_CUTS_MS[i]:
            return i - 1
    return len(HISTOGRAM_CUTS_MS) - 1


@dataclass
class AlgoAggregate:
    key: str
    n: int
    failures: int
    metrics: dict[str, dict[str, float]]
    histogram: dict[str, list[int]]

    def to_json(self) -> dict:
        return {"key": self.key, "n": self.n, "failures": self.failures,
                "metrics": self.metrics,
                "histogram": {"cut_points_ms": HISTOGRAM_CUTS_MS,
                              "counts": self.histogram["handshake_ms"]}}


def aggregate(results: list[ClientResult]) -> dict[str, AlgoAggregate]:
    """Per-(KEX+Sig) statistics over the successful results only."""
    groups: dict[str, list[ClientResult]] = {}
    failures: dict[str, int] = {}
    for r in results:
        key = f"{r.kex_algorithm.split(' ')[0] or 'unknown'}+{r.sig_algorithm.split(' ')[0] or 'unknown'}"
        if r.success:
            groups.setdefault(key, []).append(r)
        else:
            failures[key] = failures.get(key, 0) + 1
    out: dict[str, AlgoAggregate] = {}
    for key, rows in groups.items():
        metrics = {}
        for name in AGG_METRICS:
            values = sorted(row.metric(name) for row in rows)
            n = len(values)
            mean = sum(values) / n
            stddev = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
            metrics[name] = {
                "mean": round(mean, 3),
                "stddev": round(stddev, 3),
                "p50": nearest_rank(values, 0.50),
                "p75": nearest_rank(values, 0.75),
                "p90": nearest_rank(values, 0.90),
                "p95": nearest_rank(values, 0.95),
                "p99": nearest_rank(values, 0.99),
            }
        hist = [0] * len(HISTOGRAM_CUTS_MS)
        for row in rows:
            hist[bucketize(row.handshake_ms)] += 1
        out[key] = AlgoAggregate(key, len(rows), failures.pop(key, 0),
                                 metrics, {"handshake_ms": hist})
    for key, count in failures.items():
        out[key] = AlgoAggregate(key, 0, count, {}, {"handshake_ms": [0] * len(HISTOGRAM_CUTS_MS)})
    return out


# -------------------------------------------------------------- drivers

def _default_driver(target: BenchTarget, group: int, scheme: int, client_id: str,
                    config: BenchConfig, server_log_lookup=None) -> ClientResult:
    result = ClientResult(client_id=client_id, nf_type=target.nf_type,
                          address=target.address, success=False,
                          kex_algorithm=_kex_label(group), sig_algorithm=_sig_label(scheme))
    try:
        sock = socket.create_connection((target.host, target.port),
                                        timeout=config.timeout_ms / 1000)
        sock.settimeout(config.timeout_ms / 1000)
    except OSError as exc:
        result.error = f"connect failed: {exc}"
        return result
    hs = HandshakeConfig(
        offered_groups=[group], offered_sig_schemes=[scheme],
        cipher_suites=list(config.cipher_suites),
        sni=target.fqdn or target.host, store_ticket=False,
        client_credential=config.client_credential,
        timeout_ms=config.timeout_ms)
    ctx = client_handshake(sock, hs, target.address)
    if ctx.session is not None:
        ctx.session.close()
    else:
        sock.close()
    result.success = ctx.successful
    result.error = ctx.failure or None
    result.cipher_suite = _suite_label(ctx.cipher_suite)
    result.handshake_ms = round(ctx.timings.handshake_total_ms, 3)
    result.keygen_us = ctx.timings.keygen_us
    result.encap_us = ctx.timings.encap_us
    result.decap_us = ctx.timings.decap_us
    result.sign_us = ctx.timings.sign_us
    result.verify_us = ctx.timings.verify_us
    result.bytes_sent = ctx.counters.bytes_sent
    result.bytes_received = ctx.counters.bytes_received
    if ctx.successful:
        result.pq_evidence = evmod.build_evidence(ctx).to_json()
        if server_log_lookup is not None:
            record = server_log_lookup(ctx.client_random)
            if record is not None:
                result.encap_us = record.encap_us
    return result


def _kex_label(group: int) -> str:
    try:
        return f"{kem.lookup(group).name} (0x{group:04x})"
    except kem.KemError:
        return f"0x{group:04x}"


def _sig_label(scheme: int) -> str:
    try:
        return f"{sigmod.lookup(scheme).name} (0x{scheme:04x})"
    except sigmod.SigError:
        return f"0x{scheme:04x}"


def _suite_label(suite_id: int | None) -> str:
    from .crypto import aead
    if suite_id in aead.SUITES:
        return f"{aead.SUITES[suite_id].name} (0x{suite_id:04x})"
    return "" if suite_id is None else f"0x{suite_id:04x}"


# ------------------------------------------------------------- scheduler

def plan_jobs(config: BenchConfig) -> list[tuple[BenchTarget, int, int, str]]:
    """Round-robin clients over matrix rows x targets; pins one pair each."""
    jobs = []
    clients = 1 if config.mode == "single" else config.clients
    for i in range(clients):
        target = config.targets[i % len(config.targets)]
        group, scheme = config.matrix[i % len(config.matrix)]
        client_id = f"{target.nf_type}-T{config.targets.index(target) + 1}-C{i + 1}"
        jobs.append((target, group, scheme, client_id))
    return jobs


def run_benchmark(config: BenchConfig, driver=None,
                  server_log_lookup=None) -> tuple[list[ClientResult], dict[str, AlgoAggregate]]:
    driver = driver or (lambda t, g, s, cid: _default_driver(
        t, g, s, cid, config, server_log_lookup))
    jobs = plan_jobs(config)

    if config.warmup:
        seen = set()
        for target, group, scheme, _cid in jobs:
            key = (target.address, group, scheme)
            if key not in seen:
                seen.add(key)
                try:
                    driver(target, group, scheme, "warmup")
                except Exception:
                    pass

    results: list[ClientResult] = [None] * len(jobs)

    def run_job(index: int) -> None:
        target, group, scheme, cid = jobs[index]
        try:
            results[index] = driver(target, group, scheme, cid)
        except Exception as exc:
            results[index] = ClientResult(cid, target.nf_type, target.address,
                                          False, _kex_label(group), _sig_label(scheme),
                                          error=f"driver error: {exc}")

    if config.mode in ("single", "sequential"):
        for i in range(len(jobs)):
            run_job(i)
    elif config.mode == "parallel":
        threads = [threading.Thread(target=run_job, args=(i,)) for i in range(len(jobs))]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    else:  # pool
        with ThreadPoolExecutor(max_workers=config.pool_workers) as pool:
            list(pool.map(run_job, range(len(jobs))))

    return results, aggregate(results)


# -------------------------------------------------------------- exports

CSV_COLUMNS = ["client_id", "nf_type", "address", "success", "kex", "sig", "suite",
               "handshake_ms", "keygen_us", "encap_us", "decap_us", "verify_us",
               "bytes_sent", "bytes_received", "error"]


def export_csv(results: list[ClientResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow([r.client_id, r.nf_type, r.address, r.success,
                         r.kex_algorithm, r.sig_algorithm, r.cipher_suite,
                         r.handshake_ms, r.keygen_us, r.encap_us, r.decap_us,
                         r.verify_us, r.bytes_sent, r.bytes_received, r.error or ""])
    return buf.getvalue()


def export_json(results: list[ClientResult], aggregates: dict[str, AlgoAggregate],
                mode: str, extra: dict | None = None) -> dict:
    doc = {
        "client_count": len(results),
        "execution_mode": mode,
        "mode": "benchmark",
        "results": [r.to_json() for r in results],
        "aggregates": {k: v.to_json() for k, v in sorted(aggregates.items())},
    }
    if extra:
        doc.update(extra)
    return doc


def import_results(doc: dict) -> list[ClientResult]:
    return [ClientResult.from_json(r) for r in doc["results"]]
