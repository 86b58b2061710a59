"""Verification reports: named residual checks against explicit tolerances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": float(self.residual),
                "tol": float(self.tol), "pass": self.passed}


@dataclass
class VerificationReport:
    """Outcome of a verification run.

    ``passed`` holds iff every check's residual is within its tolerance.
    ``details`` carries auxiliary numbers (seeds, chosen epsilons, per-trial
    residual lists) that are reported but do not affect the verdict.
    """

    checks: list[Check] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def add(self, name: str, residual: float, tol: float) -> Check:
        check = Check(name, float(residual), float(tol))
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"pass": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "details": self.details}

    def __str__(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: residual={c.residual:.3e} tol={c.tol:.1e}"
                 for c in self.checks]
        return "\n".join(lines)
