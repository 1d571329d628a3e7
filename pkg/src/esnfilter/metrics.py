"""Recovery-quality measures for filtered signals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

__all__ = [
    "RecoveryReport",
    "nrmse",
    "symbol_recovery_rate",
    "boundary_mask",
    "psnr",
    "PSNR_CAP_DB",
]

PSNR_CAP_DB = 300.0


def _data(s) -> np.ndarray:
    return np.asarray(getattr(s, "data", s), dtype=np.float64)


def nrmse(pred, target) -> float:
    """RMS error divided by the standard deviation of ``target``, pooled over all entries."""
    p, t = _data(pred), _data(target)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    std = float(np.std(t))
    if std == 0 or t.size == 0:
        raise ValueError("target has zero variance; NRMSE is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)) / std)


def boundary_mask(target) -> np.ndarray:
    """True where a sample and both neighbours carry the same symbol."""
    t = _data(target).reshape(-1)
    keep = np.ones(t.shape[0], dtype=bool)
    change = t[1:] != t[:-1]
    keep[1:] &= ~change
    keep[:-1] &= ~change
    return keep


def _lag_order(max_lag: int):
    yield 0
    for k in range(1, max_lag + 1):
        yield k
        yield -k


def symbol_recovery_rate(
    pred,
    target,
    max_lag: int = 5,
    eval_washout: int = 0,
    mask: Optional[np.ndarray] = None,
) -> tuple[float, int]:
    """Best fraction of correctly recovered +/-1 symbols over a lag window.

    ``pred`` is thresholded at 0. Lag ``k`` compares ``pred[t + k]`` with
    ``target[t]``, so a filter whose output trails the target by one sample
    scores at ``k = 1``. Only positions at or after ``eval_washout`` (for both
    indices) count; ``mask`` optionally removes target samples. Ties go to the
    lag closest to 0, positive before negative.
    """
    p = _data(pred).reshape(-1)
    t = _data(target).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    if max_lag < 0 or eval_washout < 0:
        raise ValueError("max_lag and eval_washout must be nonnegative")
    T = t.shape[0]
    if T <= eval_washout + max_lag:
        raise ValueError(
            f"series of length {T} too short for eval_washout={eval_washout} "
            f"and max_lag={max_lag}"
        )
    symbols = np.where(p > 0, 1.0, -1.0)
    keep = np.ones(T, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    best_rate, best_lag = -1.0, 0
    for lag in _lag_order(max_lag):
        lo = eval_washout + max(0, -lag)
        hi = T - max(0, lag)
        sel = keep[lo:hi]
        hits = symbols[lo + lag : hi + lag][sel] == t[lo:hi][sel]
        if hits.size == 0:
            continue
        rate = float(np.mean(hits))
        if rate > best_rate:
            best_rate, best_lag = rate, lag
    if best_rate < 0:
        raise ValueError("no samples left to score after masking")
    return best_rate, best_lag


def psnr(pred_frame, target_frame, peak: float = 2.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP_DB`` for exact matches."""
    p, t = _data(pred_frame), _data(target_frame)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((p - t) ** 2))
    if mse == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


@dataclass(frozen=True)
class RecoveryReport:
    """Scores for one filtered test segment.

    ``recovery_rate`` excludes the first ``eval_washout`` samples;
    ``recovery_rate_all`` scores every sample; ``recovery_rate_interior``
    additionally drops samples adjacent to a symbol change. The PSNR fields
    are filled for video only (means over scored frames), the recovery fields
    for scalar signals only.
    """

    seed: int
    nrmse: float
    eval_washout: int
    training_nrmse: float = math.nan
    recovery_rate: float = math.nan
    recovery_rate_all: float = math.nan
    recovery_rate_interior: float = math.nan
    best_lag: int = 0
    psnr_filtered_db: Optional[float] = None
    psnr_distorted_db: Optional[float] = None
    mse_reduction: Optional[float] = None

    @property
    def psnr_gain_db(self) -> Optional[float]:
        if self.psnr_filtered_db is None or self.psnr_distorted_db is None:
            return None
        return self.psnr_filtered_db - self.psnr_distorted_db

    def as_dict(self) -> dict:
        return asdict(self)
