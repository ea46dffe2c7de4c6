from typing import Tuple

import numpy as np


def _windows(times: np.ndarray, width: float) -> np.ndarray:
    # window index per sample; the last partial window is merged into its predecessor
    idx = np.floor((times - times[0]) / width + 1e-9).astype(int)
    full = int(np.floor((times[-1] - times[0]) / width + 1e-9))
    return np.minimum(idx, max(full - 1, 0))


def window_envelope(times: np.ndarray, values: np.ndarray, width: float) -> Tuple[np.ndarray, np.ndarray]:
    """(time of the max, max) per consecutive window of length `width`."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        return np.empty(0), np.empty(0)
    idx = _windows(times, width)
    t_out, v_out = [], []
    for w in np.unique(idx):
        sel = np.flatnonzero(idx == w)
        j = sel[np.argmax(values[sel])]
        t_out.append(times[j])
        v_out.append(values[j])
    return np.array(t_out), np.array(v_out)


def last_period_mean(times: np.ndarray, values: np.ndarray, period: float) -> float:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        return float("nan")
    sel = times >= times[-1] - period - 1e-12
    return float(np.mean(values[sel]))


def fit_decay_rate(times: np.ndarray, values: np.ndarray, width: float, floor: float) -> Tuple[float, int]:
    """
    Exponential decay rate of a nonnegative signal from a least-squares line
    through log(window max) over windows whose max exceeds `floor`.

    Returns (rate, windows used). rate is +inf for an identically zero
    signal and nan when fewer than two windows qualify.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(values > 0):
        return float("inf"), 0
    t_env, v_env = window_envelope(times, values, width)
    keep = (v_env > floor) & (v_env > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan"), int(np.count_nonzero(keep))
    slope, _ = np.polyfit(t_env[keep], np.log(v_env[keep]), 1)
    return float(-slope), int(np.count_nonzero(keep))
