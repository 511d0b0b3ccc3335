"""Structured pass/fail reports for verification and experiment runs."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

SCHEMA_VERSION = "v1"


@dataclass
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    runtime_s: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name}: statistic={self.statistic:.6g} "
                f"threshold={self.threshold:.6g} ({self.runtime_s:.2f}s)")


@dataclass
class Report:
    seed: int
    schema: str = SCHEMA_VERSION
    created: float = field(default_factory=time.time)
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, check: CheckResult) -> None:
        if any(c.name == check.name for c in self.checks):
            raise ValueError(f"duplicate check name {check.name!r}")
        self.checks.append(check)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "seed": self.seed,
            "created": self.created,
            "all_passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "statistic": c.statistic,
                    "threshold": c.threshold,
                    "passed": c.passed,
                    "runtime_s": c.runtime_s,
                    "details": c.details,
                }
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def render(self) -> str:
        lines = [c.line() for c in self.checks]
        verdict = "ALL CHECKS PASSED" if self.all_passed else "SOME CHECKS FAILED"
        lines.append(verdict)
        return "\n".join(lines)


def load_report(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {data.get('schema')!r}")
    return data


def comparable_dict(report: Report) -> dict:
    """Report content with the timestamp removed, for determinism checks."""
    data = report.to_dict()
    data.pop("created", None)
    return data
