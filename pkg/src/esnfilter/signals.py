"""Clean source signals: held binary bitstreams and glyph videos."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SignalSeries",
    "GlyphSet",
    "GLYPH_NAMES",
    "gen_bitstream",
    "builtin_glyphs",
    "gen_glyph_video",
]


@dataclass(frozen=True)
class SignalSeries:
    """A T x dim real time series, one row per time step.

    Video is stored flattened row-major (x fastest) with ``frame_shape``
    recording ``(L, W)``.
    """

    data: np.ndarray
    frame_shape: Optional[tuple[int, int]] = None

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64, order="C")
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2:
            raise ValueError(f"signal data must be 2-D (T x dim), got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("signal data has non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)
        if self.frame_shape is not None:
            L, W = (int(v) for v in self.frame_shape)
            if L * W != a.shape[1]:
                raise ValueError(
                    f"frame_shape {L}x{W} does not match dim {a.shape[1]}"
                )
            object.__setattr__(self, "frame_shape", (L, W))

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.data.shape[0]

    def frames(self) -> np.ndarray:
        """Return the T x L x W view of a video series."""
        if self.frame_shape is None:
            raise ValueError("series has no frame_shape")
        return self.data.reshape(len(self), *self.frame_shape)

    @classmethod
    def from_frames(cls, frames) -> "SignalSeries":
        frames = np.asarray(frames, dtype=np.float64)
        T, L, W = frames.shape
        return cls(frames.reshape(T, L * W), (L, W))

    def slice(self, start: int, stop: Optional[int] = None) -> "SignalSeries":
        return SignalSeries(self.data[start:stop], self.frame_shape)

    def like(self, data) -> "SignalSeries":
        """New series with ``data`` and this series' frame shape."""
        return SignalSeries(data, self.frame_shape)

    def equals(self, other: "SignalSeries") -> bool:
        return self.frame_shape == other.frame_shape and np.array_equal(
            self.data, other.data
        )


def gen_bitstream(T: int, symbol_hold: int = 4, seed: int = 0) -> SignalSeries:
    """I.i.d. equiprobable +/-1 symbols, each held for ``symbol_hold`` samples."""
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if symbol_hold < 1:
        raise ValueError(f"symbol_hold must be positive, got {symbol_hold}")
    rng = np.random.default_rng(seed)
    n_symbols = -(-T // symbol_hold)
    symbols = np.where(rng.integers(0, 2, n_symbols) == 1, 1.0, -1.0)
    return SignalSeries(np.repeat(symbols, symbol_hold)[:T].reshape(T, 1))


@dataclass(frozen=True)
class GlyphSet:
    glyphs: tuple[np.ndarray, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.glyphs) != len(self.names):
            raise ValueError("one name per glyph is required")
        shapes = {g.shape for g in self.glyphs}
        if len(shapes) > 1:
            raise ValueError(f"glyphs must share one shape, got {sorted(shapes)}")
        for g in self.glyphs:
            if not np.all(np.abs(g) == 1):
                raise ValueError("glyph pixels must be -1 or +1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.glyphs[0].shape

    def __len__(self) -> int:
        return len(self.glyphs)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.glyphs[self.names.index(name)]


GLYPH_NAMES = (
    "cross", "square", "ring", "diagonal", "tee", "ell", "dots", "checker",
)


def _raster(L: int, W: int) -> dict[str, np.ndarray]:
    # Doubled centred coordinates: integers symmetric about the frame centre,
    # so 180-degree symmetric shapes stay exactly symmetric at any size.
    cy = (2 * np.arange(L) + 1 - L)[:, None] * np.ones((1, W), dtype=int)
    cx = np.ones((L, 1), dtype=int) * (2 * np.arange(W) + 1 - W)[None, :]
    i = np.arange(L)[:, None] * np.ones((1, W), dtype=int)
    j = np.ones((L, 1), dtype=int) * np.arange(W)[None, :]
    # normalised coordinates in (-1, 1)
    y = cy / L
    x = cx / W
    r = np.hypot(x, y)
    t_row = max(1, L // 8)
    t_col = max(1, W // 8)
    cell_y = max(1, L // 4)
    cell_x = max(1, W // 4)
    return {
        "cross": (np.abs(cy) * 3 <= L) | (np.abs(cx) * 3 <= W),
        "square": (
            ((i >= t_row) & (i < 2 * t_row)) | ((i >= L - 2 * t_row) & (i < L - t_row))
        ) & (j >= t_col) & (j < W - t_col)
        | (((j >= t_col) & (j < 2 * t_col)) | ((j >= W - 2 * t_col) & (j < W - t_col)))
        & (i >= t_row) & (i < L - t_row),
        "ring": (r >= 0.35) & (r <= 0.75),
        "diagonal": np.abs(x - y) <= 0.3,
        "tee": (i < max(2, L // 4)) | ((np.abs(cx) * 4 <= W) & (i >= max(2, L // 4))),
        "ell": (j < max(2, W // 4)) | (i >= L - max(2, L // 4)),
        "dots": ((i % 4) == 1) & ((j % 4) == 1) | ((i % 4) == 2) & ((j % 4) == 2),
        "checker": ((i // cell_y) + (j // cell_x)) % 2 == 0,
    }


def builtin_glyphs(size: tuple[int, int] = (8, 8)) -> GlyphSet:
    """The eight fixed binary glyphs used as video content.

    Shapes are drawn in relative coordinates so they rescale with the frame:
    a plus-sign ``cross``, a hollow ``square`` outline, a ``ring``, a thick
    main ``diagonal``, a ``tee``, an ``ell``, a sparse ``dots`` grid and a
    4x4-cell ``checker``. Foreground is +1, background -1.
    """
    L, W = (int(v) for v in size)
    if L < 8 or W < 8:
        raise ValueError(f"glyphs need frames of at least 8x8, got {L}x{W}")
    masks = _raster(L, W)
    glyphs = tuple(np.where(masks[name], 1.0, -1.0) for name in GLYPH_NAMES)
    return GlyphSet(glyphs, GLYPH_NAMES)


def gen_glyph_video(
    gs: GlyphSet, n_frames: int, hold: int = 5, seed: int = 0
) -> SignalSeries:
    """Stack glyphs into a video; each uniformly drawn glyph is held ``hold`` frames."""
    if len(gs) == 0:
        raise ValueError("glyph set is empty")
    if n_frames < 0:
        raise ValueError(f"n_frames must be nonnegative, got {n_frames}")
    if hold < 1:
        raise ValueError(f"hold must be positive, got {hold}")
    L, W = gs.shape
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(gs), -(-n_frames // hold))
    index = np.repeat(picks, hold)[:n_frames]
    stack = np.stack([g.reshape(-1) for g in gs.glyphs])
    return SignalSeries(stack[index].reshape(n_frames, L * W), (L, W))


def flatten_frame(frame: Sequence) -> np.ndarray:
    return np.asarray(frame, dtype=np.float64).reshape(-1)


def unflatten_frame(row, frame_shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(row, dtype=np.float64).reshape(frame_shape)
