"""Machine-readable run reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

TIMING_KEYS = ("wall_time_ms",)


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if hasattr(value, "item"):
        return _clean(value.item())
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    return value


@dataclass
class RunReport:
    """Command, echoed config, seed, metrics, and checks with their tolerances.

    Each metric is stored as ``{"value": ..., "tolerance": ..., "passed": ...}``;
    ``tolerance`` and ``passed`` are ``None`` for informational metrics.
    """

    command: str
    config: dict
    seed: int | None = None
    metrics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def record(self, name: str, value, tolerance=None, passed: bool | None = None) -> None:
        self.metrics[name] = {"value": _clean(value), "tolerance": _clean(tolerance), "passed": passed}

    def check_le(self, name: str, value, tolerance) -> bool:
        ok = bool(value <= tolerance)
        self.record(name, value, tolerance, ok)
        return ok

    def check_ge(self, name: str, value, tolerance) -> bool:
        ok = bool(value >= tolerance)
        self.record(name, value, tolerance, ok)
        return ok

    @property
    def passed(self) -> bool:
        return all(m["passed"] is not False for m in self.metrics.values())

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": _clean(self.config),
            "seed": self.seed,
            "metrics": self.metrics,
            "warnings": list(self.warnings),
            "verdict": "pass" if self.passed else "fail",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def without_timing(report: dict) -> dict:
    """Copy of a report dict with wall-clock metrics removed."""
    out = dict(report)
    out["metrics"] = {k: v for k, v in report.get("metrics", {}).items() if k not in TIMING_KEYS}
    return out
