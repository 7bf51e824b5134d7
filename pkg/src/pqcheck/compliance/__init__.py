"""Compliance suite: registry, checks, probe planner, HTTP/2 client."""

from . import checks, h2, registry, runner  # noqa: F401
from .registry import ComplianceTest, GroupResult, ValidationResult, Verdict  # noqa: F401
from .runner import ComplianceTarget, SuiteConfig, run_suite  # noqa: F401
