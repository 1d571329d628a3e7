"""Random recurrent reservoirs and their leaky-integrator dynamics.

The state obeys

    dx/dt = -gamma * x + kappa * tanh(W_self x + W_in u + W_fb y)

and is integrated with forward Euler at step ``dt``. With ``dt * gamma <= 1``
every update is a convex combination of the previous state and a saturated
drive, so ``|x_i|`` never leaves ``[0, kappa / gamma]`` once it starts there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "ReservoirConfig",
    "WeightSet",
    "ReservoirState",
    "SpectralEstimate",
    "ReservoirError",
    "build_reservoir",
    "estimate_spectral_radius",
    "scale_to_spectral_radius",
    "step",
    "run",
]

MAX_RESAMPLES = 8
_UINT64_MAX = 2**64 - 1


class ReservoirError(ValueError):
    """Invalid reservoir configuration, shapes or construction failure."""


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameters of the reservoir dynamics and of its random construction.

    Attributes:
        n: Number of reservoir nodes.
        gamma: Leak rate of each node (1/time).
        kappa: Gain of the saturating drive.
        dt: Forward-Euler step.
        rho_target: Spectral radius that ``w_self`` is rescaled to.
        connectivity: Probability of an entry of ``w_self`` being nonzero.
        in_scale: Half-width of the uniform distribution of ``w_in`` entries.
        fb_scale: Half-width for ``w_fb``; 0 switches output feedback off.
        in_dim: Input dimension.
        out_dim: Output dimension.
        seed: Seed of the weight sampler.
    """

    n: int = 20
    gamma: float = 0.5
    kappa: float = 0.5
    dt: float = 1.0
    rho_target: float = 0.9
    connectivity: float = 0.1
    in_scale: float = 1.0
    fb_scale: float = 0.0
    in_dim: int = 1
    out_dim: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ReservoirError(f"n must be a positive integer, got {self.n!r}")
        for name in ("in_dim", "out_dim"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ReservoirError(f"{name} must be a positive integer, got {v!r}")
        for name in ("gamma", "kappa", "dt"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ReservoirError(f"{name} must be positive and finite, got {v!r}")
        if self.dt * self.gamma > 1:
            raise ReservoirError(
                f"dt*gamma must be <= 1 for bounded dynamics, got {self.dt * self.gamma!r}"
            )
        if not 0 < self.rho_target < 1:
            raise ReservoirError(
                f"rho_target must lie in (0, 1), got {self.rho_target!r}"
            )
        if not 0 < self.connectivity <= 1:
            raise ReservoirError(
                f"connectivity must lie in (0, 1], got {self.connectivity!r}"
            )
        for name in ("in_scale", "fb_scale"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ReservoirError(f"{name} must be nonnegative, got {v!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= _UINT64_MAX:
            raise ReservoirError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def state_bound(self) -> float:
        return self.kappa / self.gamma


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightSet:
    """The four synaptic matrices of a reservoir computer.

    Arrays are stored read-only so one instance can be shared between
    simulations.
    """

    w_self: np.ndarray
    w_in: np.ndarray
    w_fb: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        for name in ("w_self", "w_in", "w_fb", "w_out"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.w_self.shape[0]
        if self.w_self.shape != (n, n):
            raise ReservoirError(f"w_self must be square, got {self.w_self.shape}")
        if self.w_in.ndim != 2 or self.w_in.shape[0] != n:
            raise ReservoirError(f"w_in must be {n} x in_dim, got {self.w_in.shape}")
        if self.w_fb.ndim != 2 or self.w_fb.shape[0] != n:
            raise ReservoirError(f"w_fb must be {n} x out_dim, got {self.w_fb.shape}")
        if self.w_out.shape != (self.w_fb.shape[1], n):
            raise ReservoirError(
                f"w_out must be {self.w_fb.shape[1]} x {n}, got {self.w_out.shape}"
            )

    @property
    def n(self) -> int:
        return self.w_self.shape[0]

    @property
    def in_dim(self) -> int:
        return self.w_in.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w_out.shape[0]

    def with_readout(self, w_out: np.ndarray) -> "WeightSet":
        return WeightSet(self.w_self, self.w_in, self.w_fb, w_out)

    def equals(self, other: "WeightSet") -> bool:
        """Bitwise equality of all four matrices."""
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("w_self", "w_in", "w_fb", "w_out")
        )


@dataclass
class ReservoirState:
    x: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "ReservoirState":
        return cls(np.zeros(n))


class SpectralEstimate(NamedTuple):
    radius: float
    converged: bool
    iterations: int


def estimate_spectral_radius(
    m: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 10_000,
    seed: int = 0,
    block: int = 8,
    window: int = 10,
) -> SpectralEstimate:
    """Estimate the largest eigenvalue magnitude of ``m`` by power iteration.

    A block of ``min(n, block)`` seeded random vectors is iterated and
    re-orthonormalised each step; the Ritz values of the projected matrix give
    the current estimate. Iterating a block rather than one vector handles
    complex-conjugate and other equal-magnitude leading eigenvalues, which make
    a single-vector Rayleigh quotient oscillate. Convergence is declared when
    the last ``window`` successive estimates agree to ``tol`` relative; one
    small step alone is not trusted because Ritz values of a non-normal
    matrix approach the limit non-monotonically.

    Directions that collapse to zero (nilpotent parts) are dropped from the
    block; a block that empties entirely means the spectral radius is 0. At
    least ``n + 1`` products are taken before convergence is accepted, so a
    structurally nilpotent matrix (acyclic sparsity graph) always collapses
    exactly instead of reporting round-off Ritz values.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ReservoirError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ReservoirError("matrix has non-finite entries")
    n = m.shape[0]
    if n == 0 or not np.any(m):
        return SpectralEstimate(0.0, True, 0)

    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, min(n, block))))
    scale = np.abs(m).sum(axis=1).max()
    history = []
    est = 0.0
    for it in range(1, max_iter + 1):
        z = m @ q
        q, r = np.linalg.qr(z)
        diag = np.abs(np.diag(r))
        keep = diag > 1e-13 * scale
        if not np.any(keep):
            return SpectralEstimate(0.0, True, it)
        if not np.all(keep):
            # re-orthonormalise the surviving directions only
            q, _ = np.linalg.qr(z[:, keep])
        ritz = np.linalg.eigvals(q.T @ m @ q)
        est = float(np.max(np.abs(ritz)))
        history.append(est)
        recent = history[-window:]
        if (
            it > n
            and len(recent) == window
            and max(recent) - min(recent) <= tol * max(est, np.finfo(float).tiny)
        ):
            return SpectralEstimate(est, True, it)
    return SpectralEstimate(est, False, max_iter)


def scale_to_spectral_radius(m: np.ndarray, target: float, **kwargs) -> np.ndarray:
    """Return ``m`` multiplied so that its spectral radius equals ``target``."""
    if not target > 0:
        raise ReservoirError(f"target must be positive, got {target!r}")
    est = estimate_spectral_radius(m, **kwargs)
    if not est.converged:
        raise ReservoirError(
            f"spectral radius estimate did not converge ({est.radius!r} after "
            f"{est.iterations} iterations)"
        )
    if est.radius == 0:
        raise ReservoirError("matrix has spectral radius 0 and cannot be rescaled")
    return np.asarray(m, dtype=np.float64) * (target / est.radius)


def build_reservoir(config: ReservoirConfig) -> WeightSet:
    """Sample a reservoir for ``config``.

    ``w_self`` is sparse with uniform [-1, 1] entries, rescaled to
    ``config.rho_target``; ``w_in`` and ``w_fb`` are dense uniform; ``w_out``
    starts at zero. Draws whose recurrent matrix is nilpotent are retried
    with the seed incremented, up to ``MAX_RESAMPLES`` times.
    """
    for attempt in range(MAX_RESAMPLES + 1):
        seed = (config.seed + attempt) & _UINT64_MAX
        rng = np.random.default_rng(seed)
        n = config.n
        mask = rng.random((n, n)) < config.connectivity
        w_self = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
        w_in = rng.uniform(-1.0, 1.0, (n, config.in_dim)) * config.in_scale
        w_fb = rng.uniform(-1.0, 1.0, (n, config.out_dim)) * config.fb_scale
        try:
            w_self = scale_to_spectral_radius(w_self, config.rho_target)
        except ReservoirError:
            continue
        return WeightSet(w_self, w_in, w_fb, np.zeros((config.out_dim, n)))
    raise ReservoirError(
        f"could not sample a reservoir with nonzero spectral radius after "
        f"{MAX_RESAMPLES} reseeds (seed={config.seed}, n={config.n}, "
        f"connectivity={config.connectivity})"
    )


def _vector(v, dim: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != dim:
        raise ReservoirError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ReservoirError(f"{name} has non-finite entries")
    return v


def step(
    state: ReservoirState,
    u,
    y_fb,
    w: WeightSet,
    cfg: ReservoirConfig,
) -> ReservoirState:
    """Advance the state by one Euler step."""
    x = _vector(state.x, w.n, "state")
    u = _vector(u, w.in_dim, "u")
    y_fb = _vector(y_fb, w.out_dim, "y_fb")
    drive = np.tanh(w.w_self @ x + w.w_in @ u + w.w_fb @ y_fb)
    return ReservoirState(x + cfg.dt * (-cfg.gamma * x + cfg.kappa * drive), state.t + 1)


def _series(data, dim: int, name: str) -> np.ndarray:
    a = np.asarray(getattr(data, "data", data), dtype=np.float64)
    if a.ndim == 1 and (dim == 1 or a.size == 0):
        a = a.reshape(-1, dim)
    if a.ndim != 2 or a.shape[1] != dim:
        raise ReservoirError(f"{name} must be T x {dim}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ReservoirError(f"{name} has non-finite entries")
    return a


def run(
    w: WeightSet,
    cfg: ReservoirConfig,
    inputs,
    feedback=None,
    x0: Optional[ReservoirState] = None,
) -> np.ndarray:
    """Drive the reservoir with ``inputs`` and return the T x n state trajectory.

    With ``feedback`` given, the feedback term is teacher-forced: step ``t``
    sees ``feedback[t]``. Without it the loop is closed through the current
    readout, ``y_fb = w_out @ x`` of the state entering the step.
    """
    u = _series(inputs, w.in_dim, "inputs")
    T = u.shape[0]
    x = np.zeros(w.n) if x0 is None else _vector(x0.x, w.n, "x0").copy()
    states = np.empty((T, w.n))
    if T == 0:
        return states

    dt, gamma, kappa = cfg.dt, cfg.gamma, cfg.kappa
    w_self = w.w_self
    if feedback is not None:
        fb = _series(feedback, w.out_dim, "feedback")
        if fb.shape[0] != T:
            raise ReservoirError(
                f"feedback has length {fb.shape[0]}, inputs have length {T}"
            )
        pre = u @ w.w_in.T + fb @ w.w_fb.T
        for t in range(T):
            x = x + dt * (-gamma * x + kappa * np.tanh(w_self @ x + pre[t]))
            states[t] = x
        return states

    pre = u @ w.w_in.T
    closed = bool(np.any(w.w_fb)) and bool(np.any(w.w_out))
    for t in range(T):
        a = w_self @ x + pre[t]
        if closed:
            a = a + w.w_fb @ (w.w_out @ x)
        x = x + dt * (-gamma * x + kappa * np.tanh(a))
        states[t] = x
    return states
