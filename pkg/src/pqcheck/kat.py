"""Known-answer fixture loading and the build-gate verifier.

Fixture files are plain hex-record text: `name = hexvalue` lines grouped
into records separated by blank lines, `#` comments tolerated anywhere.
verify_fixtures() re-executes every vector through the crypto engine and
reports per-family pass counts; any mismatch fails the gate.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

from .crypto import aead, mldsa, mlkem

FIXTURE_FILES = ("mlkem_acvp.txt", "mlkem_cross.txt", "mldsa_cross.txt", "aead_rfc.txt")

MANDATORY_MIN_VECTORS = {"ML-KEM-768": 10, "ML-DSA-65": 10}


class FixtureError(Exception):
    """Missing, corrupt, or failing fixtures (build gate)."""


def load_records(text: str, source: str = "<fixture>") -> list[dict]:
    records: list[dict] = []
    current: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()
        if not line:
            if current:
                records.append(current)
                current = {}
            continue
        if line.startswith("#"):
            continue
        if "=" not in line:
            raise FixtureError(f"{source}:{lineno}: expected 'name = value'")
        name, _, value = line.partition("=")
        current[name.strip()] = value.strip()
    if current:
        records.append(current)
    return records


def load_fixture_file(filename: str) -> list[dict]:
    ref = importlib.resources.files("pqcheck.fixtures") / filename
    try:
        text = ref.read_text()
    except FileNotFoundError as exc:
        raise FixtureError(f"missing fixtures: {filename}") from exc
    records = load_records(text, filename)
    if not records:
        raise FixtureError(f"missing fixtures: {filename} holds no records")
    return records


@dataclass
class FixtureReport:
    per_family: dict[str, int] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def line_summary(self) -> str:
        families = ", ".join(f"{k}: {v}" for k, v in sorted(self.per_family.items()))
        status = "all pass" if self.ok else f"{len(self.failures)} FAILURES"
        return f"fixtures [{families}] -> {status}"


def _hex(record: dict, key: str, source: str, index: int) -> bytes:
    if key not in record:
        raise FixtureError(f"{source} record {index}: missing field {key!r}")
    try:
        return bytes.fromhex(record[key])
    except ValueError as exc:
        raise FixtureError(f"{source} record {index}: field {key!r} is not hex") from exc


_MLKEM = {"ML-KEM-512": mlkem.MLKEM512, "ML-KEM-768": mlkem.MLKEM768,
          "ML-KEM-1024": mlkem.MLKEM1024}
_MLDSA = {"ML-DSA-44": mldsa.MLDSA44, "ML-DSA-65": mldsa.MLDSA65,
          "ML-DSA-87": mldsa.MLDSA87}
_AEAD = {s.name: s for s in aead.SUITES.values()}


def _check_mlkem(record: dict, source: str, i: int, report: FixtureReport) -> None:
    alg = record.get("alg", "?")
    params = _MLKEM.get(alg)
    if params is None:
        raise FixtureError(f"{source} record {i}: unknown ML-KEM set {alg!r}")
    kind = record.get("test", "full")
    label = f"{source} record {i} ({alg} {kind})"
    if kind in ("keygen", "full"):
        seed = _hex(record, "seed", source, i)
        ek, dk = mlkem.keygen_internal(params, seed[:32], seed[32:])
        if ek != _hex(record, "ek", source, i):
            report.failures.append(f"{label}: ek mismatch")
        if dk != _hex(record, "dk", source, i):
            report.failures.append(f"{label}: dk mismatch")
    if kind in ("encaps", "full"):
        ek = _hex(record, "ek", source, i)
        ct, ss = mlkem.encaps_internal(params, ek, _hex(record, "m", source, i))
        if ct != _hex(record, "ct", source, i):
            report.failures.append(f"{label}: ct mismatch")
        if ss != _hex(record, "ss", source, i):
            report.failures.append(f"{label}: ss mismatch")
    if kind in ("decaps", "full"):
        dk = _hex(record, "dk", source, i)
        ss = mlkem.decaps_internal(params, dk, _hex(record, "ct", source, i))
        if ss != _hex(record, "ss", source, i):
            report.failures.append(f"{label}: decaps ss mismatch")
    report.per_family[alg] = report.per_family.get(alg, 0) + 1


def _check_mldsa(record: dict, source: str, i: int, report: FixtureReport) -> None:
    alg = record.get("alg", "?")
    params = _MLDSA.get(alg)
    if params is None:
        raise FixtureError(f"{source} record {i}: unknown ML-DSA set {alg!r}")
    label = f"{source} record {i} ({alg})"
    seed = _hex(record, "seed", source, i)
    pk, sk = mldsa.keygen_internal(params, seed)
    if pk != _hex(record, "pk", source, i):
        report.failures.append(f"{label}: pk mismatch")
    if sk != _hex(record, "sk", source, i):
        report.failures.append(f"{label}: sk mismatch")
    msg = _hex(record, "msg", source, i)
    ctx = bytes.fromhex(record.get("ctx", "") or "")
    sig = mldsa.sign(params, sk, msg, ctx)  # deterministic variant
    if sig != _hex(record, "sig", source, i):
        report.failures.append(f"{label}: sig mismatch")
    if not mldsa.verify(params, pk, msg, sig, ctx):
        report.failures.append(f"{label}: self-verify failed")
    report.per_family[alg] = report.per_family.get(alg, 0) + 1


def _check_aead(record: dict, source: str, i: int, report: FixtureReport) -> None:
    name = record.get("alg", "?")
    suite = _AEAD.get(name)
    if suite is None:
        raise FixtureError(f"{source} record {i}: unknown AEAD suite {name!r}")
    label = f"{source} record {i} ({name})"
    key = _hex(record, "key", source, i)
    nonce = _hex(record, "nonce", source, i)
    aad = _hex(record, "aad", source, i)
    pt = _hex(record, "pt", source, i)
    ct = _hex(record, "ct", source, i)
    if aead.seal(suite, key, nonce, pt, aad) != ct:
        report.failures.append(f"{label}: seal mismatch")
    if aead.open_(suite, key, nonce, ct, aad) != pt:
        report.failures.append(f"{label}: open mismatch")
    report.per_family["AEAD"] = report.per_family.get("AEAD", 0) + 1


def verify_fixtures(files=FIXTURE_FILES) -> FixtureReport:
    report = FixtureReport()
    for filename in files:
        records = load_fixture_file(filename)
        for i, record in enumerate(records):
            alg = record.get("alg", "")
            if alg.startswith("ML-KEM"):
                _check_mlkem(record, filename, i, report)
            elif alg.startswith("ML-DSA"):
                _check_mldsa(record, filename, i, report)
            elif alg.startswith("TLS_"):
                _check_aead(record, filename, i, report)
            else:
                raise FixtureError(f"{filename} record {i}: unrecognized alg {alg!r}")
    for family, minimum in MANDATORY_MIN_VECTORS.items():
        if report.per_family.get(family, 0) < minimum:
            report.failures.append(
                f"missing fixtures: {family} has {report.per_family.get(family, 0)} "
                f"vectors, needs >= {minimum}")
    return report
