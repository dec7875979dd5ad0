"""Gain-condition reports.

Gain checks warn instead of raising: simulations with out-of-theory gains
are legitimate experiments (and sometimes still converge), so validation
never aborts a run.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class GainCheck:
    name: str
    status: str  # "pass" | "warn" | "skip"
    margin: float | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[GainCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.status != "warn" for c in self.checks)

    @property
    def warnings(self) -> tuple[GainCheck, ...]:
        return tuple(c for c in self.checks if c.status == "warn")

    def format(self) -> str:
        lines = []
        for c in self.checks:
            margin = "" if c.margin is None else f" (margin {c.margin:+.4g})"
            lines.append(f"[{c.status.upper():4s}] {c.name}{margin}: {c.detail}")
        return "\n".join(lines)


def check(name: str, ok: bool, margin: float | None, detail: str) -> GainCheck:
    return GainCheck(name, "pass" if ok else "warn", margin, detail)


def skipped(name: str, detail: str) -> GainCheck:
    return GainCheck(name, "skip", None, detail)
