"""Compliance test registry: typed verdicts, group bookkeeping, citations.

Every test carries a citation to the normative source that justifies the
verdict. Adding a test means registering one pure function from the probe
input to a Verdict; the dispatcher never changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GROUP_NAMES = {
    "tls": "TLS Compliance",
    "5g": "5G SBI Compliance",
    "pq": "Post-Quantum Security",
    "nrf": "NRF OpenAPI Compliance",
    "hardening": "Security Hardening",
}

# Table-style alias: results listings use 5g_nf_identity_san while the test
# sheet spells it 5g_nf_id_san; the registry publishes both names.
TEST_ID_ALIASES = {"5g_nf_identity_san": "5g_nf_id_san"}

CRITICAL = "critical"
WARNING = "warning"
INFO = "info"


@dataclass
class Verdict:
    test_id: str
    passed: bool | None  # None = informational outcome
    severity: str
    details: str = ""
    expected: str = ""
    actual: str = ""
    citation: str = ""

    def to_json(self) -> dict:
        out = {"test_id": self.test_id,
               "passed": self.passed if self.passed is not None else "info",
               "severity": self.severity}
        for key in ("details", "expected", "actual", "citation"):
            value = getattr(self, key)
            if value:
                out[key] = value
        alias = TEST_ID_ALIASES.get(self.test_id)
        if alias:
            out["alias"] = alias
        return out


@dataclass(frozen=True)
class ComplianceTest:
    test_id: str
    group: str
    severity: str
    citation: str
    check: object  # callable(ProbeInput) -> Verdict
    probe_requirements: tuple[str, ...] = ()


REGISTRY: dict[str, ComplianceTest] = {}


def register(test_id: str, group: str, severity: str, citation: str,
             probe_requirements: tuple[str, ...] = ()):
    if test_id in REGISTRY:
        raise ValueError(f"duplicate test id {test_id}")

    def wrap(fn):
        REGISTRY[test_id] = ComplianceTest(test_id, group, severity, citation, fn,
                                           probe_requirements)
        return fn
    return wrap


def tests_for_groups(groups) -> list[ComplianceTest]:
    return [t for t in REGISTRY.values() if t.group in groups]


@dataclass
class GroupResult:
    name: str
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(1 for v in self.verdicts if v.passed is True)

    @property
    def failed(self) -> int:
        return sum(1 for v in self.verdicts if v.passed is False)

    @property
    def info(self) -> int:
        return sum(1 for v in self.verdicts if v.passed is None)

    @property
    def total(self) -> int:
        return len(self.verdicts)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "failed": self.failed,
                "info": self.info, "total": self.total,
                "tests": [v.to_json() for v in self.verdicts]}


@dataclass
class ValidationResult:
    id: str
    target: str
    nf_type: str
    duration_ms: int
    groups: dict[str, GroupResult]
    evidence: dict | None
    security_level: str
    grade: str

    @property
    def total_tests(self) -> int:
        return sum(g.total for g in self.groups.values())

    @property
    def passed_tests(self) -> int:
        return sum(g.passed for g in self.groups.values())

    @property
    def failed_tests(self) -> int:
        return sum(g.failed for g in self.groups.values())

    @property
    def info_tests(self) -> int:
        return sum(g.info for g in self.groups.values())

    @property
    def warnings(self) -> int:
        return sum(1 for g in self.groups.values()
                   for v in g.verdicts if v.passed is False and v.severity == WARNING)

    def critical_failures(self) -> list[Verdict]:
        return [v for g in self.groups.values()
                for v in g.verdicts if v.passed is False and v.severity == CRITICAL]

    def all_verdicts(self) -> list[Verdict]:
        return [v for g in self.groups.values() for v in g.verdicts]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "nf_type": self.nf_type,
            "result": {
                "test_id": self.id,
                "target": self.target,
                "duration_ms": self.duration_ms,
                "security_level": self.security_level,
                "grade": self.grade,
                "groups": {key: g.to_json() for key, g in self.groups.items()},
                "total_tests": self.total_tests,
                "passed_tests": self.passed_tests,
                "failed_tests": self.failed_tests,
                "info_tests": self.info_tests,
                "warnings": self.warnings,
                "pq_evidence": self.evidence,
            },
        }
