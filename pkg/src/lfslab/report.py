"""Structured verification records."""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PASS = "pass"
FAIL = "fail"
PRECONDITION_FAILED = "precondition-failed"


@dataclass
class Check:
    """One named residual compared against its tolerance.

    ``kind`` is ``"check"`` for entries that enter the overall verdict,
    ``"precondition"`` for sampled hypotheses, and ``"measurement"`` for
    recorded quantities whose comparison is informative only.
    """

    name: str
    residual: float
    tolerance: float
    passed: bool
    note: str = ""
    kind: str = "check"
    comparison: str = "<="

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "residual": _jsonable(self.residual),
            "tolerance": _jsonable(self.tolerance),
            "comparison": self.comparison,
            "verdict": PASS if self.passed else FAIL,
            "note": self.note,
        }


@dataclass
class ScenarioReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    data: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    gated: bool = False
    started: float = field(default_factory=time.perf_counter)
    wall_clock: float | None = None

    def add(self, name, residual, tolerance, *, note="", kind="check", comparison="<="):
        """Record ``residual`` against ``tolerance``.

        With ``comparison="<="`` the check passes when residual <= tolerance;
        with ``">="`` it passes when residual >= tolerance (used for margins).
        NaN never passes.
        """
        residual = float(residual)
        if comparison == "<=":
            passed = residual <= tolerance
        elif comparison == ">=":
            passed = residual >= tolerance
        else:
            raise ValueError(f"unknown comparison {comparison!r}")
        check = Check(name, residual, float(tolerance), bool(passed), note, kind, comparison)
        self.checks.append(check)
        return check

    def add_flag(self, name, ok, *, note="", kind="check"):
        return self.add(name, 0.0 if ok else 1.0, 0.5, note=note, kind=kind)

    def check(self, name) -> Check:
        matches = [c for c in self.checks if c.name == name]
        if len(matches) != 1:
            raise KeyError(f"{name!r} appears {len(matches)} times in report {self.name!r}")
        return matches[0]

    @property
    def verdict_checks(self) -> list[Check]:
        return [c for c in self.checks if c.kind == "check"]

    @property
    def preconditions(self) -> list[Check]:
        return [c for c in self.checks if c.kind == "precondition"]

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.verdict_checks if not c.passed]

    @property
    def status(self) -> str:
        if self.gated:
            return PRECONDITION_FAILED
        return PASS if all(c.passed for c in self.verdict_checks) else FAIL

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def finish(self):
        self.wall_clock = time.perf_counter() - self.started
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "config": {k: _jsonable(v) for k, v in self.config.items()},
            "checks": [c.to_dict() for c in self.checks],
            "notes": list(self.notes),
            "data": {k: _jsonable(v) for k, v in self.data.items()},
            "wall_clock_s": self.wall_clock,
            "versions": versions(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_text(self) -> str:
        lines = [f"report: {self.name}", f"status: {self.status}"]
        for key, value in self.config.items():
            lines.append(f"config.{key}: {value}")
        for c in self.checks:
            verdict = PASS if c.passed else FAIL
            lines.append(
                f"{c.kind}.{c.name}: {verdict} residual={c.residual:.6e} "
                f"{c.comparison} {c.tolerance:.3e}" + (f" ({c.note})" if c.note else "")
            )
        for note in self.notes:
            lines.append(f"note: {note}")
        if self.wall_clock is not None:
            lines.append(f"wall_clock_s: {self.wall_clock:.3f}")
        return "\n".join(lines) + "\n"


def versions() -> dict[str, str]:
    import scipy

    from . import __version__

    return {
        "lfslab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value
