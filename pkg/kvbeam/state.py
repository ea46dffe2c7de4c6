from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


@dataclass
class SimulationResult:
    times: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    u: np.ndarray
    e: np.ndarray
    err_norm: np.ndarray
    # plant coordinates (alpha, alpha_dot) per recorded sample, when requested
    plant_state: Optional[np.ndarray] = None

    @property
    def samples(self) -> int:
        return self.times.size


@dataclass
class ErrorMetrics:
    peak_error: float
    terminal_error: float
    decay_rate: float
    fit_windows: int = 0

    def as_dict(self) -> Dict[str, float]:
        return {
            "peak_error": self.peak_error,
            "terminal_error": self.terminal_error,
            "decay_rate": self.decay_rate,
            "fit_windows": self.fit_windows,
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float = float("nan")
    tolerance: float = float("nan")
    detail: str = ""
    skipped: bool = False

    def as_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "passed": self.passed,
            "skipped": self.skipped,
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class VerifyReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.skipped for c in self.checks)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def get(self, name: str) -> Optional[CheckResult]:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def as_dict(self) -> Dict[str, object]:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}
