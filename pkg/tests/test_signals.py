import itertools
import math

import numpy as np
import pytest

from esnfilter.signals import (
    GLYPH_NAMES,
    GlyphSet,
    SignalSeries,
    builtin_glyphs,
    gen_bitstream,
    gen_glyph_video,
)
from esnfilter.signals import flatten_frame, unflatten_frame


def test_bitstream_empty():
    assert len(gen_bitstream(0, 4, 0)) == 0


def test_bitstream_structure():
    s = gen_bitstream(8, 4, 3).data[:, 0]
    assert set(np.unique(s)) <= {-1.0, 1.0}
    assert np.all(s[:4] == s[0]) and np.all(s[4:] == s[4])


def test_bitstream_partial_last_symbol():
    s = gen_bitstream(10, 4, 1).data[:, 0]
    assert len(s) == 10
    assert np.all(s[8:] == s[8])


def test_bitstream_balance():
    s = gen_bitstream(10_000, 1, 0).data[:, 0]
    # binomial 3 sigma is 0.015 around 0.5
    assert 0.45 <= np.mean(s > 0) <= 0.55


def test_bitstream_deterministic():
    assert gen_bitstream(100, 4, 7).equals(gen_bitstream(100, 4, 7))
    assert not gen_bitstream(100, 4, 7).equals(gen_bitstream(100, 4, 8))


def test_glyphs_construction():
    gs = builtin_glyphs((16, 16))
    assert len(gs) == 8 and gs.names == GLYPH_NAMES
    for g in gs.glyphs:
        assert g.shape == (16, 16)
        assert set(np.unique(g)) == {-1.0, 1.0}


def test_cross_is_point_symmetric():
    for shape in [(16, 16), (8, 8), (9, 13), (11, 8)]:
        c = builtin_glyphs(shape)["cross"]
        assert np.array_equal(c, c[::-1, ::-1])


@pytest.mark.parametrize("shape", [(8, 8), (9, 9), (8, 12), (12, 8), (16, 16), (17, 23), (32, 32)])
def test_glyphs_pairwise_distinct(shape):
    gs = builtin_glyphs(shape)
    L, W = shape
    for a, b in itertools.combinations(gs.glyphs, 2):
        assert np.sum(a != b) >= L * W / 8


def test_glyph_size_too_small():
    with pytest.raises(ValueError):
        builtin_glyphs((7, 8))


def test_glyphset_validation():
    with pytest.raises(ValueError):
        GlyphSet((np.ones((2, 2)), np.ones((3, 3))), ("a", "b"))
    with pytest.raises(ValueError):
        GlyphSet((np.zeros((2, 2)),), ("a",))


def test_video_basics():
    gs = builtin_glyphs((8, 8))
    assert len(gen_glyph_video(gs, 0, 3, 0)) == 0
    v = gen_glyph_video(gs, 12, 12, 5)
    assert v.frame_shape == (8, 8) and v.dim == 64
    frames = v.frames()
    assert all(np.array_equal(f, frames[0]) for f in frames)
    assert any(np.array_equal(frames[0], g) for g in gs.glyphs)


def test_video_hold_and_determinism():
    gs = builtin_glyphs((8, 8))
    v = gen_glyph_video(gs, 30, 5, 2)
    assert v.equals(gen_glyph_video(gs, 30, 5, 2))
    f = v.frames()
    for start in range(0, 30, 5):
        assert all(np.array_equal(f[start], f[k]) for k in range(start, start + 5))
    assert set(np.unique(v.data)) == {-1.0, 1.0}


def test_video_empty_glyphset():
    with pytest.raises(ValueError):
        gen_glyph_video(GlyphSet((), ()), 5, 1, 0)


def test_flatten_round_trip_row_major():
    for g in builtin_glyphs((9, 12)).glyphs:
        flat = flatten_frame(g)
        assert flat[1] == g[0, 1]  # x fastest
        assert np.array_equal(unflatten_frame(flat, (9, 12)), g)
    v = SignalSeries.from_frames(np.stack(builtin_glyphs((8, 8)).glyphs))
    assert np.array_equal(v.frames(), np.stack(builtin_glyphs((8, 8)).glyphs))


def test_series_validation():
    with pytest.raises(ValueError):
        SignalSeries(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        SignalSeries(np.zeros((3, 5)), (2, 2))
