"""Teacher-forced state harvesting and ridge-regression readout training."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg

from . import reservoir
from .metrics import nrmse
from .reservoir import ReservoirConfig, WeightSet
from .signals import SignalSeries

__all__ = [
    "TrainingSet",
    "TrainedModel",
    "SingularSystemError",
    "default_washout",
    "harvest_states",
    "ridge_solve",
    "train",
    "predict",
]

DEFAULT_LAMBDA = 1e-6


class SingularSystemError(np.linalg.LinAlgError):
    pass


def default_washout(T: int) -> int:
    """100 steps, or a quarter of the series when it is shorter than 400."""
    return 100 if T >= 400 else T // 4


@dataclass(frozen=True)
class TrainingSet:
    """Distorted inputs ``u`` paired with the clean teacher ``d``."""

    u: SignalSeries
    d: SignalSeries
    washout: int

    def __post_init__(self):
        if len(self.u) != len(self.d):
            raise ValueError(
                f"inputs and teacher differ in length: {len(self.u)} vs {len(self.d)}"
            )
        if self.washout < 0:
            raise ValueError(f"washout must be nonnegative, got {self.washout}")
        if self.washout >= len(self.u):
            raise ValueError(
                f"washout ({self.washout}) must be shorter than the series ({len(self.u)})"
            )


@dataclass(frozen=True)
class TrainedModel:
    config: ReservoirConfig
    weights: WeightSet
    lam: float
    training_nrmse: float

    def __post_init__(self):
        if self.weights.w_out.shape != (self.config.out_dim, self.config.n):
            raise ValueError("readout shape does not match the configuration")


def harvest_states(
    w: WeightSet, cfg: ReservoirConfig, ts: TrainingSet
) -> tuple[np.ndarray, np.ndarray]:
    """Run teacher-forced and return (X, D): n x M states and out_dim x M targets."""
    states = reservoir.run(w, cfg, ts.u, feedback=ts.d)
    X = np.ascontiguousarray(states[ts.washout :].T)
    D = np.ascontiguousarray(ts.d.data[ts.washout :].T)
    return X, D


def ridge_solve(X: np.ndarray, D: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Solve ``W (X X^T + lam I) = D X^T`` for the readout ``W``.

    Uses a Cholesky factorisation of the regularised Gram matrix; ``lam = 0``
    gives the plain least-squares (Wiener-Hopf) solution and requires X to
    have full row rank.
    """
    X = np.asarray(X, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if X.ndim != 2 or D.ndim != 2 or X.shape[1] != D.shape[1]:
        raise ValueError(f"X ({X.shape}) and D ({D.shape}) must share the column count")
    if X.shape[1] < 1:
        raise ValueError("need at least one sample")
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    n = X.shape[0]
    gram = X @ X.T
    if lam:
        gram[np.diag_indices(n)] += lam
    rhs = X @ D.T
    if lam == 0 and np.linalg.matrix_rank(X) < n:
        raise SingularSystemError(
            "X X^T is singular; use a positive lambda (Tikhonov regularisation)"
        )
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"regularised Gram matrix is not positive definite (lambda={lam}); "
            "increase lambda"
        ) from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False).T


def train(
    cfg: ReservoirConfig, ts: TrainingSet, lam: float = DEFAULT_LAMBDA
) -> TrainedModel:
    """Build the reservoir for ``cfg`` and fit its readout to ``ts``."""
    if ts.u.dim != cfg.in_dim or ts.d.dim != cfg.out_dim:
        raise ValueError(
            f"training data dims ({ts.u.dim}, {ts.d.dim}) do not match config "
            f"({cfg.in_dim}, {cfg.out_dim})"
        )
    weights = reservoir.build_reservoir(cfg)
    X, D = harvest_states(weights, cfg, ts)
    w_out = ridge_solve(X, D, lam)
    fit = nrmse(w_out @ X, D)
    return TrainedModel(cfg, weights.with_readout(w_out), float(lam), fit)


def predict(
    model: TrainedModel, inputs: SignalSeries, x0: Optional[reservoir.ReservoirState] = None
) -> SignalSeries:
    """Filter ``inputs`` from a rest state, emitting ``y = W_out x`` at every step."""
    if inputs.dim != model.config.in_dim:
        raise ValueError(
            f"input dim {inputs.dim} does not match model in_dim {model.config.in_dim}"
        )
    states = reservoir.run(model.weights, model.config, inputs, feedback=None, x0=x0)
    y = states @ model.weights.w_out.T
    frame_shape = inputs.frame_shape if inputs.dim == model.config.out_dim else None
    return SignalSeries(y.reshape(len(inputs), model.config.out_dim), frame_shape)


def with_readout(model: TrainedModel, w_out: np.ndarray) -> TrainedModel:
    return replace(model, weights=model.weights.with_readout(w_out))
