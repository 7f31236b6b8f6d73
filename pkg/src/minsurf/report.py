"""Structured diagnostics record shared by reconstruction and diagnostics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class Flag:
    metric: str
    tolerance: float
    passed: bool
    relation: str = "<"


@dataclass
class DiagnosticsReport:
    name: str
    metrics: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    def add(self, key, value):
        self.metrics[key] = float(value)
        return value

    def check(self, flag_name, metric, tolerance, relation="<"):
        """Record a pass/fail flag comparing a stored metric against a tolerance."""
        if metric not in self.metrics:
            raise KeyError(f"metric {metric!r} not recorded")
        value = self.metrics[metric]
        ops = {"<": value < tolerance, "<=": value <= tolerance,
               ">": value > tolerance, ">=": value >= tolerance}
        passed = bool(ops[relation])
        self.flags[flag_name] = Flag(metric, float(tolerance), passed, relation)
        return passed

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.flags.values())

    def merge(self, other: "DiagnosticsReport", prefix=None):
        prefix = prefix or other.name
        for k, v in other.metrics.items():
            self.metrics[f"{prefix}.{k}"] = v
        for k, f in other.flags.items():
            self.flags[f"{prefix}.{k}"] = Flag(f"{prefix}.{f.metric}", f.tolerance,
                                               f.passed, f.relation)
        return self

    def to_dict(self) -> dict:
        return _plain({
            "name": self.name,
            "passed": self.passed,
            "metrics": dict(sorted(self.metrics.items())),
            "flags": {k: {"metric": f.metric, "relation": f.relation,
                          "tolerance": f.tolerance, "passed": f.passed}
                      for k, f in sorted(self.flags.items())},
            "provenance": dict(sorted(self.provenance.items())),
            "series": dict(sorted(self.series.items())),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_lines(self):
        for k, f in sorted(self.flags.items()):
            status = "PASS" if f.passed else "FAIL"
            yield (f"{status} {k}: {f.metric} = {self.metrics[f.metric]:.6g} "
                   f"{f.relation} {f.tolerance:.3g}")


def config_hash(obj) -> str:
    text = json.dumps(_plain(obj), sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
