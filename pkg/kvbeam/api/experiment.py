"""
Experiment configuration: INI text validated by pydantic.

    [beam]        E I d_kv d_v xi1 xi2 b1 b2 bd v0 v1    (profiles are expressions in x)
    [frequencies] base q q_low_gain                      (w_k = k * base)
    [design]      n alpha1 alpha2 r R1 R2 q0 q1 q2 zero_threshold eps eps_max eps_grid tune
    [reference]   type amplitude period a0 cos.K sin.K
    [disturbance] a0 cos.K sin.K
    [simulation]  n T h method perturb_E record_every
    [output]      dir

Vectors and matrices are whitespace- or comma-separated numbers; `bd` is a
`;`-separated list of expressions. Defaults reproduce the flagship run.
"""
from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Callable, Dict, List, Literal

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from kvbeam.config import settings
from kvbeam.engine.beam_galerkin import BeamParameters
from kvbeam.engine.controller_synthesis import SynthesisOptions
from kvbeam.errors import ArtifactError, ConfigError
from kvbeam.feeds.signals import ExogenousInput, TriangleWave, TrigSignal, eval_trig, fourier_truncate

_X = sympy.Symbol("x")
_HARMONIC = re.compile(r"^(cos|sin)\.(\d+)$")


def _numbers(v) -> List[float]:
    if isinstance(v, str):
        parts = [p for p in re.split(r"[\s,]+", v.strip()) if p]
        return [float(p) for p in parts]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(p) for p in v]


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def compile_profile(expr: str) -> Callable[[np.ndarray], np.ndarray]:
    """Expression in x -> vectorized numpy callable."""
    try:
        sym = sympy.sympify(expr, locals={"x": _X})
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ConfigError(f"cannot parse profile expression {expr!r}: {e}") from e
    extra = sym.free_symbols - {_X}
    if extra:
        raise ConfigError(f"profile {expr!r} uses unknown symbols {sorted(map(str, extra))}")
    return sympy.lambdify(_X, sym, modules="numpy")


def _constant(expr: str) -> float:
    try:
        val = sympy.sympify(expr)
        if val.free_symbols:
            raise ConfigError(f"{expr!r} must be a constant expression")
        return float(val)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise ConfigError(f"cannot parse constant {expr!r}: {e}") from e


def _check_expr(v: str) -> str:
    compile_profile(v)
    return v


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BeamSection(_Section):
    E: float = 10.0
    I: float = 1.0
    d_kv: float = 0.01
    d_v: float = 0.4
    xi1: float = -0.6
    xi2: float = 0.3
    b1: str = "(x+1)**2*(1-x)**6/3"
    b2: str = "(x+1)**6*(1-x)**2/3"
    bd: List[str] = Field(default_factory=lambda: ["(x+1)**2*(1-x)**2/3"])
    v0: str = "0"
    v1: str = "0"

    @field_validator("bd", mode="before")
    @classmethod
    def _split_bd(cls, v):
        if isinstance(v, str):
            return [p.strip() for p in v.split(";") if p.strip()]
        return v

    @field_validator("b1", "b2", "v0", "v1")
    @classmethod
    def _expr(cls, v: str) -> str:
        return _check_expr(v)

    @field_validator("bd")
    @classmethod
    def _exprs(cls, v: List[str]) -> List[str]:
        return [_check_expr(e) for e in v]

    @field_validator("E", "I")
    @classmethod
    def _positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("d_kv", "d_v")
    @classmethod
    def _nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be nonnegative")
        return v

    @field_validator("xi1", "xi2")
    @classmethod
    def _inside(cls, v: float) -> float:
        if not -1.0 < v < 1.0:
            raise ValueError("measurement point must lie in (-1, 1)")
        return v


class FrequencySection(_Section):
    base: str = "pi"
    q: int = Field(10, ge=0)
    q_low_gain: int = Field(5, ge=0)

    @field_validator("base")
    @classmethod
    def _base(cls, v: str) -> str:
        if _constant(v) <= 0:
            raise ValueError("base frequency must be positive")
        return v

    @property
    def base_value(self) -> float:
        return _constant(self.base)

    def freqs(self, q: int) -> tuple:
        return tuple(k * self.base_value for k in range(q + 1))


class DesignSection(_Section):
    n: int = Field(39, ge=5)
    alpha1: float = Field(2.0, ge=0)
    alpha2: float = Field(0.8, ge=0)
    r: int = Field(4, ge=0)
    R1: List[float] = Field(default_factory=lambda: [1.0])
    R2: List[float] = Field(default_factory=lambda: [1.0])
    q0: float = Field(1.0, gt=0)
    q1: float = Field(1.0, gt=0)
    q2: float = Field(1.0, gt=0)
    zero_threshold: float = Field(settings.ZERO_THRESHOLD, gt=0)
    eps: float = Field(0.076, ge=0)
    eps_max: float = Field(settings.EPS_MAX, gt=0)
    eps_grid: int = Field(settings.EPS_GRID, ge=3)
    tune: bool = False

    @field_validator("R1", "R2", mode="before")
    @classmethod
    def _vec(cls, v):
        return _numbers(v)

    @field_validator("R1", "R2")
    @classmethod
    def _shape(cls, v: List[float]) -> List[float]:
        if len(v) not in (1, 4):
            raise ValueError("give a scalar or 4 row-major entries")
        return v

    @staticmethod
    def matrix(v: List[float]) -> np.ndarray:
        return v[0] * np.eye(2) if len(v) == 1 else np.array(v).reshape(2, 2)


class _TrigSection(_Section):
    a0: List[float]
    cos: Dict[int, List[float]] = Field(default_factory=dict)
    sin: Dict[int, List[float]] = Field(default_factory=dict)

    @field_validator("a0", mode="before")
    @classmethod
    def _vec(cls, v):
        return _numbers(v)

    @field_validator("cos", "sin", mode="before")
    @classmethod
    def _harmonics(cls, v):
        return {int(k): _numbers(c) for k, c in dict(v).items()}

    def signal(self, base: float) -> TrigSignal:
        return TrigSignal.from_harmonics(base, self.a0, self.cos, self.sin)

    def max_harmonic(self) -> int:
        return max(list(self.cos) + list(self.sin), default=0)


class ReferenceSection(_TrigSection):
    type: Literal["triangle", "trig"] = "triangle"
    amplitude: float = 1.0
    period: float = Field(2.0, gt=0)
    a0: List[float] = Field(default_factory=lambda: [0.0, 0.0])


class DisturbanceSection(_TrigSection):
    a0: List[float] = Field(default_factory=lambda: [0.0])
    cos: Dict[int, List[float]] = Field(default_factory=lambda: {3: [0.4]})
    sin: Dict[int, List[float]] = Field(default_factory=lambda: {1: [1.0]})


class SimulationSection(_Section):
    n: int = Field(69, ge=5)
    T: float = Field(16.0, gt=0)
    h: float = Field(1e-3, gt=0)
    method: Literal["trapezoid", "foh"] = "trapezoid"
    perturb_E: float = Field(0.0, gt=-1.0)
    record_every: int = Field(1, ge=1)


class OutputSection(_Section):
    dir: str = settings.OUT_DIR


class ExperimentConfig(_Section):
    beam: BeamSection = Field(default_factory=BeamSection)
    frequencies: FrequencySection = Field(default_factory=FrequencySection)
    design: DesignSection = Field(default_factory=DesignSection)
    reference: ReferenceSection = Field(default_factory=ReferenceSection)
    disturbance: DisturbanceSection = Field(default_factory=DisturbanceSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if self.design.r > 2 * self.design.n:
            raise ValueError(f"design.r={self.design.r} exceeds the design state dimension {2 * self.design.n}")
        if self.simulation.T < self.simulation.h:
            raise ValueError("simulation.T must be at least simulation.h")
        ref, dist = self.reference, self.disturbance
        if len(ref.a0) != 2 or any(len(v) != 2 for v in list(ref.cos.values()) + list(ref.sin.values())):
            raise ValueError("reference vectors must have 2 components")
        nd = len(self.beam.bd)
        if len(dist.a0) != nd or any(len(v) != nd for v in list(dist.cos.values()) + list(dist.sin.values())):
            raise ValueError(f"disturbance vectors must have {nd} components (one per bd profile)")
        q = self.frequencies.q
        if ref.type == "trig" and ref.max_harmonic() > q:
            raise ValueError(f"reference harmonic {ref.max_harmonic()} is outside the internal model (q={q})")
        if dist.max_harmonic() > q:
            raise ValueError(f"disturbance harmonic {dist.max_harmonic()} is outside the internal model (q={q})")
        return self

    # --------------------------
    # Derived engine objects
    # --------------------------
    def beam_parameters(self, E_scale: float = 1.0) -> BeamParameters:
        b = self.beam
        v0 = None if b.v0.strip() == "0" else compile_profile(b.v0)
        v1 = None if b.v1.strip() == "0" else compile_profile(b.v1)
        return BeamParameters(
            E=b.E * E_scale, I_mom=b.I, d_kv=b.d_kv, d_v=b.d_v, xi1=b.xi1, xi2=b.xi2,
            b1=compile_profile(b.b1), b2=compile_profile(b.b2),
            b_d=tuple(compile_profile(e) for e in b.bd), v0=v0, v1=v1,
        )

    def simulation_parameters(self) -> BeamParameters:
        return self.beam_parameters(E_scale=1.0 + self.simulation.perturb_E)

    def synthesis_options(self) -> SynthesisOptions:
        d = self.design
        return SynthesisOptions(
            alpha1=d.alpha1, alpha2=d.alpha2,
            R1=DesignSection.matrix(d.R1), R2=DesignSection.matrix(d.R2),
            q0=d.q0, q1=d.q1, q2=d.q2,
            r=d.r, n=d.n, freqs=self.frequencies.freqs(self.frequencies.q),
            zero_threshold=d.zero_threshold,
        )

    def low_gain_freqs(self) -> tuple:
        return self.frequencies.freqs(self.frequencies.q_low_gain)

    def reference_signal(self):
        ref = self.reference
        if ref.type == "triangle":
            return TriangleWave(amplitude=ref.amplitude, period=ref.period)
        return ref.signal(self.frequencies.base_value)

    def exogenous(self) -> ExogenousInput:
        return ExogenousInput(reference=self.reference_signal(), disturbance=self.disturbance.signal(self.frequencies.base_value))

    def reference_period(self) -> float:
        if self.reference.type == "triangle":
            return self.reference.period
        return 2.0 * np.pi / self.frequencies.base_value

    def reference_amplitude(self) -> float:
        """Peak of |y_ref| used to scale regulation tolerances."""
        ref = self.reference_signal()
        if isinstance(ref, TriangleWave):
            return abs(ref.amplitude)
        t = np.linspace(0.0, self.reference_period(), 2001)
        return float(np.max(np.linalg.norm(eval_trig(ref, t), axis=1)))

    def truncated_reference(self) -> TrigSignal:
        """In-class part of the triangle seen by a q-frequency internal model."""
        if self.reference.type != "triangle":
            return self.reference_signal()
        return fourier_truncate(self.reference_signal(), self.frequencies.q)


# --------------------------
# INI text
# --------------------------
_SECTIONS = ("beam", "frequencies", "design", "reference", "disturbance", "simulation", "output")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    if parser.defaults():
        # DEFAULT keys would leak into every section
        raise ConfigError(f"{source}: [DEFAULT] section is not supported (keys: {', '.join(parser.defaults())})")

    raw: Dict[str, Dict[str, object]] = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]")
        items: Dict[str, object] = {}
        harmonics: Dict[str, Dict[int, str]] = {"cos": {}, "sin": {}}
        for key, value in parser.items(name):
            m = _HARMONIC.match(key)
            if m and name in ("reference", "disturbance"):
                harmonics[m.group(1)][int(m.group(2))] = value
            else:
                items[key] = value
        if name in ("reference", "disturbance"):
            # a section that is present lists all of its harmonics
            items.update(harmonics)
        raw[name] = items
    return ExperimentConfig.model_validate(raw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot read config: {e.strerror}", path=str(p)) from e
    return parse_config(text, source=str(p))


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text; parse_config(dump_config(c)) == c."""
    lines: List[str] = []
    data = cfg.model_dump()
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        for key, value in data[name].items():
            if key in ("cos", "sin"):
                for k in sorted(value):
                    lines.append(f"{key}.{k} = {_fmt(value[k])}")
            elif key == "bd":
                lines.append(f"bd = {'; '.join(value)}")
            elif isinstance(value, list):
                lines.append(f"{key} = {_fmt(value)}")
            elif isinstance(value, bool):
                lines.append(f"{key} = {'true' if value else 'false'}")
            elif isinstance(value, float):
                lines.append(f"{key} = {value!r}")
            else:
                lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
