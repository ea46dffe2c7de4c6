"""
Exogenous signals of the regulation problem: finite trigonometric sums

    s(t) = a0 + sum_k (a_k cos(w_k t) + b_k sin(w_k t))

for y_ref and w_dist, and the triangle reference, which lies outside that
class and is tracked only through its truncated Fourier series.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from kvbeam.errors import ConfigError


@dataclass(frozen=True)
class TrigSignal:
    a0: np.ndarray
    freqs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cos: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    sin: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        a0 = np.atleast_1d(np.asarray(self.a0, dtype=float))
        w = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        p, q = a0.size, w.size
        a = np.asarray(self.cos, dtype=float).reshape(q, p) if q else np.zeros((0, p))
        b = np.asarray(self.sin, dtype=float).reshape(q, p) if q else np.zeros((0, p))
        if np.any(w <= 0):
            raise ConfigError(f"oscillation frequencies must be positive, got {w.tolist()}")
        for name, val in (("a0", a0), ("freqs", w), ("cos", a), ("sin", b)):
            object.__setattr__(self, name, val)

    @property
    def components(self) -> int:
        return self.a0.size

    @classmethod
    def zero(cls, components: int) -> "TrigSignal":
        return cls(a0=np.zeros(components))

    @classmethod
    def from_harmonics(
        cls,
        base: float,
        a0: Sequence[float],
        cos: Optional[Mapping[int, Sequence[float]]] = None,
        sin: Optional[Mapping[int, Sequence[float]]] = None,
    ) -> "TrigSignal":
        """Coefficients keyed by harmonic index k >= 1 of the base frequency."""
        cos, sin = dict(cos or {}), dict(sin or {})
        p = len(a0)
        ks = sorted(set(cos) | set(sin))
        if any(k < 1 for k in ks):
            raise ConfigError(f"harmonic indices must be >= 1, got {ks}")
        for k, v in list(cos.items()) + list(sin.items()):
            if len(v) != p:
                raise ConfigError(f"harmonic {k} has {len(v)} components, expected {p}")
        return cls(
            a0=np.asarray(a0, dtype=float),
            freqs=np.array([k * base for k in ks]),
            cos=np.array([cos.get(k, [0.0] * p) for k in ks]),
            sin=np.array([sin.get(k, [0.0] * p) for k in ks]),
        )


@dataclass(frozen=True)
class TriangleWave:
    amplitude: float = 1.0
    period: float = 2.0

    def __post_init__(self):
        if self.period <= 0:
            raise ConfigError(f"triangle period must be positive, got {self.period}")

    @property
    def base(self) -> float:
        return 2.0 * np.pi / self.period


def eval_trig(sig: TrigSignal, t):
    """Shape (p,) for scalar t, (len(t), p) for an array."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    arg = np.outer(tt, sig.freqs)
    out = sig.a0[None, :] + np.cos(arg) @ sig.cos + np.sin(arg) @ sig.sin
    return out[0] if np.ndim(t) == 0 else out


def eval_triangle(w: TriangleWave, t):
    # zero at t=0, +A at period/4, -A at 3 period/4
    phase = np.mod(np.asarray(t, dtype=float) / w.period - 0.25, 1.0)
    val = w.amplitude * (4.0 * np.abs(phase - 0.5) - 1.0)
    return float(val) if np.ndim(val) == 0 else val


def triangle_coefficient(w: TriangleWave, k: int) -> float:
    """Sine coefficient of harmonic k; cosine terms and even harmonics vanish."""
    if k % 2 == 0:
        return 0.0
    return 8.0 * w.amplitude / (np.pi**2 * k**2) * (-1.0) ** ((k - 1) // 2)


def fourier_truncate(w: TriangleWave, q: int, components: int = 2, channel: int = 0) -> TrigSignal:
    """Harmonics 1..q of the triangle in `channel`, zeros elsewhere."""
    if q < 0 or not 0 <= channel < components:
        raise ConfigError(f"bad truncation request q={q}, channel={channel}, components={components}")
    sin = {k: [triangle_coefficient(w, k) if c == channel else 0.0 for c in range(components)] for k in range(1, q + 1)}
    return TrigSignal.from_harmonics(w.base, [0.0] * components, sin=sin)


def truncation_error(w: TriangleWave, q: int) -> float:
    """sup_t |triangle - truncation|, attained at the peaks: (8A/pi^2) sum_{odd k > q} 1/k^2."""
    head = sum(1.0 / k**2 for k in range(1, q + 1, 2))
    return float(abs(w.amplitude) * (1.0 - 8.0 / np.pi**2 * head))


Reference = Union[TrigSignal, TriangleWave]


def eval_reference(ref: Reference, t, components: int = 2):
    """Vector reference; a triangle occupies the first component."""
    if isinstance(ref, TrigSignal):
        return eval_trig(ref, t)
    tri = np.atleast_1d(eval_triangle(ref, t))
    out = np.zeros((tri.size, components))
    out[:, 0] = tri
    return out[0] if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ExogenousInput:
    """s(t) = (w_dist(t), y_ref(t)) in the closed-loop input ordering."""

    reference: Reference
    disturbance: TrigSignal

    def __call__(self, t):
        w = np.atleast_2d(eval_trig(self.disturbance, np.atleast_1d(t)))
        r = np.atleast_2d(eval_reference(self.reference, np.atleast_1d(t)))
        out = np.hstack([w, r])
        return out[0] if np.ndim(t) == 0 else out

    @property
    def width(self) -> int:
        return self.disturbance.components + 2
