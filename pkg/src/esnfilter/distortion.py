"""Media response functionals that corrupt clean signals.

1-D: a polynomial of a causal FIR filter plus Gaussian noise,

    u(t) = sum_k a_k * (sum_l b_l * d(t - l)) ** k + sum_k c_k * r_k(t)

with k = 1..K, l = 0..L and zero history before t = 0.

2-D: per-pixel gain plus noise, ``u(z, t) = a_t * d(z, t) + c_t * r(z, t)``.

Noise comes from :class:`NoiseSource`, a counter-based SplitMix64 stream fed
through Box-Muller, so draws are reproducible from (seed, counter) alone and
portable across implementations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import SignalSeries

__all__ = [
    "NoiseSource",
    "Distortion1DSpec",
    "Distortion2DSpec",
    "gaussian_draws",
    "distort_1d",
    "distort_2d",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """The ``counters``-th outputs (0-based) of a SplitMix64 stream."""
    z = np.uint64(seed) + (counters.astype(np.uint64) + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@dataclass
class NoiseSource:
    """Standard-normal stream keyed by ``seed``.

    Normal draw ``i`` uses uniforms ``2*(i//2)`` and ``2*(i//2)+1`` of the
    SplitMix64 stream: ``u1 = (h1 >> 11 + 1) / 2**53`` in (0, 1] and
    ``u2 = (h2 >> 11) / 2**53``; even ``i`` takes the cosine branch and odd
    ``i`` the sine branch of Box-Muller.
    """

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"noise seed must be an unsigned 64-bit integer, got {self.seed}")

    def draw(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError(f"count must be nonnegative, got {count}")
        idx = np.arange(self.counter, self.counter + count, dtype=np.uint64)
        self.counter += count
        pair = idx // np.uint64(2)
        with np.errstate(over="ignore"):
            h1 = splitmix64(self.seed, pair * np.uint64(2))
            h2 = splitmix64(self.seed, pair * np.uint64(2) + np.uint64(1))
        u1 = ((h1 >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
        u2 = (h2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        odd = (idx % np.uint64(2)).astype(bool)
        return radius * np.where(odd, np.sin(angle), np.cos(angle))


def gaussian_draws(src: NoiseSource, count: int) -> np.ndarray:
    return src.draw(count)


def _coeffs(v, name: str) -> tuple[float, ...]:
    v = tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=np.float64)))
    if not all(np.isfinite(v)):
        raise ValueError(f"{name} coefficients must be finite")
    return v


@dataclass(frozen=True)
class Distortion1DSpec:
    """Coefficients of the 1-D distortion.

    ``a[k-1]`` multiplies the k-th power, ``b[l]`` is the weight of the
    l-sample delay, ``c[k-1]`` the amplitude of the k-th noise term.
    """

    a: tuple[float, ...] = (1.0, 0.3)
    b: tuple[float, ...] = (0.7, 0.3)
    c: tuple[float, ...] = (0.15, 0.0)
    noise_seed: int = 0

    def __post_init__(self):
        a = _coeffs(self.a, "a")
        b = _coeffs(self.b, "b")
        c = _coeffs(self.c, "c")
        if len(a) < 1:
            raise ValueError("need at least one polynomial coefficient")
        if len(b) < 1:
            raise ValueError("need at least one delay tap")
        if len(c) != len(a):
            raise ValueError(f"c must have one entry per power (K={len(a)}), got {len(c)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        NoiseSource(self.noise_seed)

    @property
    def K(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class Distortion2DSpec:
    gain: float = 0.7
    noise_amp: float = 0.5
    noise_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("gain must be finite")
        if not np.isfinite(self.noise_amp) or self.noise_amp < 0:
            raise ValueError(f"noise_amp must be nonnegative, got {self.noise_amp}")
        NoiseSource(self.noise_seed)


def distort_1d(d: SignalSeries, spec: Distortion1DSpec) -> SignalSeries:
    """Apply the polynomial-of-delays distortion to a scalar series.

    One independent draw is taken per (time, power) pair, in time-major order.
    """
    if d.dim != 1:
        raise ValueError(f"distort_1d needs a scalar series, got dim {d.dim}")
    x = d.data[:, 0]
    T = x.shape[0]
    filtered = np.zeros(T)
    for lag, b in enumerate(spec.b):
        if lag < T:
            filtered[lag:] += b * x[: T - lag]
    u = np.zeros(T)
    power = np.ones(T)
    for a in spec.a:
        power = power * filtered
        u += a * power
    noise = NoiseSource(spec.noise_seed).draw(T * spec.K).reshape(T, spec.K)
    if any(spec.c):
        u += noise @ np.asarray(spec.c)
    return SignalSeries(u.reshape(T, 1))


def distort_2d(video: SignalSeries, spec: Distortion2DSpec) -> SignalSeries:
    """Scale every pixel by the gain and add independent per-pixel noise."""
    T, dim = video.data.shape
    noise = NoiseSource(spec.noise_seed).draw(T * dim).reshape(T, dim)
    return video.like(spec.gain * video.data + spec.noise_amp * noise)
