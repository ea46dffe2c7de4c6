"""Exception hierarchy. Each class carries the CLI exit status it maps to."""
from __future__ import annotations

from typing import Optional


class KvBeamError(Exception):
    exit_code = 1


class ConfigError(KvBeamError):
    exit_code = 2


class NumericalError(KvBeamError):
    exit_code = 3


class SolverError(NumericalError):
    """Matrix equation or eigensolver failure."""


class SynthesisError(NumericalError):
    """A controller design step missed its margin or zero-check requirement."""


class SimulationError(NumericalError):
    pass


class ArtifactError(KvBeamError):
    exit_code = 4

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
