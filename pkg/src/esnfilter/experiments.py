"""End-to-end filtering experiments over several seeds.

Every experiment seed ``s`` derives three streams: the reservoir is sampled
with seed ``s``, the clean signal with ``s + 1`` and the distortion noise with
``s + 2``. The first ``train_len`` samples train the readout; the following
``test_len`` samples are filtered from a rest state and scored.
"""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .distortion import Distortion1DSpec, Distortion2DSpec, distort_1d, distort_2d
from .metrics import RecoveryReport, boundary_mask, nrmse, psnr, symbol_recovery_rate
from .readout import TrainedModel, TrainingSet, default_washout, predict, train
from .reservoir import ReservoirConfig
from .signals import SignalSeries, builtin_glyphs, gen_bitstream, gen_glyph_video

__all__ = [
    "Experiment1DSpec",
    "Experiment2DSpec",
    "ExperimentResult",
    "Aggregate",
    "HARD_DISTORTION_1D",
    "HARD_SYMBOL_HOLD",
    "seed_list",
    "worker_count",
    "make_data_1d",
    "make_data_2d",
    "score_1d",
    "score_2d",
    "run_seed_1d",
    "run_seed_2d",
    "run_experiment_1d",
    "run_experiment_2d",
]

THREADS_ENV = "ESN_FILTER_THREADS"
SEED_STRIDE = 10

# A distortion whose inverse needs more than a 10-node reservoir: the
# quadratic term folds the sign of the filtered symbol, so the network must
# recover it from the weak linear part and the tap memory.
HARD_DISTORTION_1D = Distortion1DSpec(a=(0.3, 1.0), b=(0.6, 0.4), c=(0.1, 0.0))
HARD_SYMBOL_HOLD = 2


def seed_list(count: int, base: int = 0) -> tuple[int, ...]:
    """``count`` experiment seeds, spaced so their derived streams never collide."""
    if count < 1:
        raise ValueError(f"need at least one seed, got {count}")
    return tuple(base + SEED_STRIDE * i for i in range(count))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _map_seeds(fn: Callable, seeds: Sequence[int]) -> list:
    # BLAS pinned to one thread so results cannot depend on the worker count;
    # parallelism comes from running seeds side by side.
    workers = min(worker_count(), len(seeds))
    with threadpool_limits(limits=1):
        if workers <= 1:
            return [fn(s) for s in seeds]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, seeds))


@dataclass(frozen=True)
class Aggregate:
    mean: float
    median: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Aggregate":
        values = [float(v) for v in values]
        return cls(
            math.fsum(values) / len(values),
            statistics.median(values),
            min(values),
            max(values),
        )


@dataclass(frozen=True)
class ExperimentResult:
    reports: tuple[RecoveryReport, ...]
    aggregate: Aggregate
    metric: str

    @property
    def values(self) -> list[float]:
        return [_metric_value(r, self.metric) for r in self.reports]


def _metric_value(report: RecoveryReport, metric: str) -> float:
    if metric == "psnr_gain_db":
        return report.psnr_gain_db
    return getattr(report, metric)


@dataclass(frozen=True)
class _ReservoirParams:
    rho: float = 0.9
    gamma: float = 0.5
    kappa: float = 0.5
    dt: float = 1.0
    connectivity: float = 0.1
    fb_scale: float = 0.0


@dataclass(frozen=True)
class Experiment1DSpec(_ReservoirParams):
    """Bitstream recovery through the 1-D distortion."""

    n: int = 20
    train_len: int = 2000
    test_len: int = 2000
    distortion: Distortion1DSpec = field(default_factory=Distortion1DSpec)
    lam: float = 1e-6
    washout: Optional[int] = None
    eval_washout: Optional[int] = None
    seeds: tuple[int, ...] = seed_list(10)
    symbol_hold: int = 4
    max_lag: int = 5
    in_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.train_len <= self.resolved_washout:
            raise ValueError(
                f"train_len ({self.train_len}) must exceed washout ({self.resolved_washout})"
            )
        if self.test_len <= self.resolved_eval_washout + self.max_lag:
            raise ValueError(
                f"test_len ({self.test_len}) must exceed eval_washout + max_lag "
                f"({self.resolved_eval_washout} + {self.max_lag})"
            )

    @property
    def resolved_washout(self) -> int:
        return default_washout(self.train_len) if self.washout is None else self.washout

    @property
    def resolved_eval_washout(self) -> int:
        if self.eval_washout is not None:
            return self.eval_washout
        return min(self.resolved_washout, default_washout(self.test_len))

    def reservoir_config(self, seed: int) -> ReservoirConfig:
        return ReservoirConfig(
            n=self.n, gamma=self.gamma, kappa=self.kappa, dt=self.dt,
            rho_target=self.rho, connectivity=self.connectivity,
            in_scale=self.in_scale, fb_scale=self.fb_scale,
            in_dim=1, out_dim=1, seed=seed,
        )


@dataclass(frozen=True)
class Experiment2DSpec(_ReservoirParams):
    """Glyph-video denoising through the gain-plus-noise distortion.

    ``in_scale=None`` resolves to ``1 / sqrt(L * W)`` so the summed input drive
    per node stays O(1) whatever the frame size.
    """

    n: int = 200
    frame_shape: tuple[int, int] = (8, 8)
    train_frames: int = 500
    test_frames: int = 200
    distortion: Distortion2DSpec = field(default_factory=Distortion2DSpec)
    lam: float = 1.0
    washout: Optional[int] = None
    eval_washout: Optional[int] = None
    seeds: tuple[int, ...] = seed_list(5)
    hold: int = 5
    in_scale: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "frame_shape", tuple(int(v) for v in self.frame_shape))
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.train_frames <= self.resolved_washout:
            raise ValueError(
                f"train_frames ({self.train_frames}) must exceed washout "
                f"({self.resolved_washout})"
            )
        if self.test_frames <= self.resolved_eval_washout:
            raise ValueError(
                f"test_frames ({self.test_frames}) must exceed eval_washout "
                f"({self.resolved_eval_washout})"
            )

    @property
    def dim(self) -> int:
        return self.frame_shape[0] * self.frame_shape[1]

    @property
    def resolved_washout(self) -> int:
        return default_washout(self.train_frames) if self.washout is None else self.washout

    @property
    def resolved_eval_washout(self) -> int:
        if self.eval_washout is not None:
            return self.eval_washout
        return min(self.resolved_washout, default_washout(self.test_frames))

    @property
    def resolved_in_scale(self) -> float:
        return 1.0 / math.sqrt(self.dim) if self.in_scale is None else self.in_scale

    def reservoir_config(self, seed: int) -> ReservoirConfig:
        return ReservoirConfig(
            n=self.n, gamma=self.gamma, kappa=self.kappa, dt=self.dt,
            rho_target=self.rho, connectivity=self.connectivity,
            in_scale=self.resolved_in_scale, fb_scale=self.fb_scale,
            in_dim=self.dim, out_dim=self.dim, seed=seed,
        )


def make_data_1d(spec: Experiment1DSpec, seed: int) -> tuple[SignalSeries, SignalSeries]:
    """Clean bitstream and its distorted version for one experiment seed."""
    clean = gen_bitstream(spec.train_len + spec.test_len, spec.symbol_hold, seed + 1)
    distorted = distort_1d(clean, replace(spec.distortion, noise_seed=seed + 2))
    return clean, distorted


def make_data_2d(spec: Experiment2DSpec, seed: int) -> tuple[SignalSeries, SignalSeries]:
    glyphs = builtin_glyphs(spec.frame_shape)
    clean = gen_glyph_video(glyphs, spec.train_frames + spec.test_frames, spec.hold, seed + 1)
    distorted = distort_2d(clean, replace(spec.distortion, noise_seed=seed + 2))
    return clean, distorted


def score_1d(
    pred: SignalSeries,
    target: SignalSeries,
    seed: int,
    max_lag: int,
    eval_washout: int,
    training_nrmse: float = math.nan,
) -> RecoveryReport:
    rate, lag = symbol_recovery_rate(pred, target, max_lag, eval_washout)
    rate_all, _ = symbol_recovery_rate(pred, target, max_lag, 0)
    interior, _ = symbol_recovery_rate(
        pred, target, max_lag, eval_washout, mask=boundary_mask(target)
    )
    return RecoveryReport(
        seed=seed,
        nrmse=nrmse(pred.data[eval_washout:], target.data[eval_washout:]),
        eval_washout=eval_washout,
        training_nrmse=training_nrmse,
        recovery_rate=rate,
        recovery_rate_all=rate_all,
        recovery_rate_interior=interior,
        best_lag=lag,
    )


def score_2d(
    filtered: SignalSeries,
    distorted: SignalSeries,
    clean: SignalSeries,
    seed: int,
    eval_washout: int,
    training_nrmse: float = math.nan,
) -> RecoveryReport:
    """Mean per-frame PSNR of filtered and distorted video against the clean one."""
    if filtered.frame_shape is None:
        filtered = clean.like(filtered.data)
    y = filtered.frames()[eval_washout:]
    u = distorted.frames()[eval_washout:]
    d = clean.frames()[eval_washout:]
    psnr_f = math.fsum(psnr(a, b) for a, b in zip(y, d)) / len(d)
    psnr_d = math.fsum(psnr(a, b) for a, b in zip(u, d)) / len(d)
    mse_f = float(np.mean((y - d) ** 2))
    mse_d = float(np.mean((u - d) ** 2))
    return RecoveryReport(
        seed=seed,
        nrmse=nrmse(y, d),
        eval_washout=eval_washout,
        training_nrmse=training_nrmse,
        psnr_filtered_db=psnr_f,
        psnr_distorted_db=psnr_d,
        mse_reduction=mse_d / mse_f if mse_f > 0 else math.inf,
    )


def fit_1d(spec: Experiment1DSpec, seed: int, clean, distorted) -> TrainedModel:
    L = spec.train_len
    ts = TrainingSet(distorted.slice(0, L), clean.slice(0, L), spec.resolved_washout)
    return train(spec.reservoir_config(seed), ts, spec.lam)


def run_seed_1d(spec: Experiment1DSpec, seed: int) -> RecoveryReport:
    clean, distorted = make_data_1d(spec, seed)
    model = fit_1d(spec, seed, clean, distorted)
    L = spec.train_len
    pred = predict(model, distorted.slice(L))
    return score_1d(
        pred, clean.slice(L), seed, spec.max_lag, spec.resolved_eval_washout,
        model.training_nrmse,
    )


def fit_2d(spec: Experiment2DSpec, seed: int, clean, distorted) -> TrainedModel:
    L = spec.train_frames
    ts = TrainingSet(distorted.slice(0, L), clean.slice(0, L), spec.resolved_washout)
    return train(spec.reservoir_config(seed), ts, spec.lam)


def run_seed_2d(
    spec: Experiment2DSpec, seed: int, frames_dir: Optional[Path] = None, n_samples: int = 4
) -> RecoveryReport:
    clean, distorted = make_data_2d(spec, seed)
    model = fit_2d(spec, seed, clean, distorted)
    L = spec.train_frames
    test_clean, test_distorted = clean.slice(L), distorted.slice(L)
    filtered = predict(model, test_distorted)
    if frames_dir is not None:
        from .formats import write_triptychs

        write_triptychs(
            Path(frames_dir), seed, test_clean, test_distorted, filtered,
            start=spec.resolved_eval_washout, count=n_samples,
        )
    return score_2d(
        filtered, test_distorted, test_clean, seed, spec.resolved_eval_washout,
        model.training_nrmse,
    )


def run_experiment_1d(spec: Experiment1DSpec) -> ExperimentResult:
    reports = _map_seeds(lambda s: run_seed_1d(spec, s), spec.seeds)
    return ExperimentResult(
        tuple(reports), Aggregate.of([r.recovery_rate for r in reports]), "recovery_rate"
    )


def run_experiment_2d(
    spec: Experiment2DSpec, frames_dir: Optional[Path] = None, n_samples: int = 4
) -> ExperimentResult:
    reports = _map_seeds(lambda s: run_seed_2d(spec, s, frames_dir, n_samples), spec.seeds)
    return ExperimentResult(
        tuple(reports), Aggregate.of([r.psnr_gain_db for r in reports]), "psnr_gain_db"
    )
