import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcam.frame import (
    COMPOSED_OUTPUT_ORDINAL,
    Frame,
    OutOfBoundsError,
    Rect,
    Resolution,
    blank_frame,
    blit,
    scale_nearest,
)


def test_resolution_validation():
    assert Resolution(640, 480).pixel_count == 307200
    assert str(Resolution(854, 640)) == "854x640"
    for w, h in [(0, 1), (1, 0), (-2, 5)]:
        with pytest.raises(ValueError):
            Resolution(w, h)


def test_rect_validation():
    r = Rect(3, 4, 10, 20)
    assert r.size == Resolution(10, 20)
    with pytest.raises(ValueError):
        Rect(-1, 0, 5, 5)
    with pytest.raises(ValueError):
        Rect(0, 0, 0, 5)


def test_blank_frame_is_solid_and_tagged():
    f = blank_frame(Resolution(4, 3), (10, 20, 30), source_ordinal=2, seq=7, timestamp_us=11)
    assert f.pixels.shape == (3, 4, 3)
    assert f.pixel(0, 0) == (10, 20, 30)
    assert f.pixel(3, 2) == (10, 20, 30)
    assert (f.source_ordinal, f.seq, f.timestamp_us) == (2, 7, 11)
    assert f.byte_length == 4 * 3 * 3
    assert COMPOSED_OUTPUT_ORDINAL == 0


def test_frame_rejects_wrong_buffer_shape():
    with pytest.raises(ValueError):
        Frame(Resolution(4, 3), np.zeros((4, 3, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        Frame(Resolution(4, 3), np.zeros((3, 4, 3), dtype=np.int32))


def test_blit_places_source_and_keeps_dst_metadata():
    dst = blank_frame(Resolution(6, 5), seq=9, timestamp_us=100)
    src = blank_frame(Resolution(2, 2), (255, 0, 0), source_ordinal=3)
    out = blit(dst, src, (4, 3))
    assert out.pixel(4, 3) == (255, 0, 0)
    assert out.pixel(5, 4) == (255, 0, 0)
    assert out.pixel(3, 3) == (0, 0, 0)
    assert (out.seq, out.timestamp_us, out.source_ordinal) == (9, 100, 0)
    # inputs untouched
    assert dst.pixel(4, 3) == (0, 0, 0)


def test_blit_out_of_bounds():
    dst = blank_frame(Resolution(6, 5))
    src = blank_frame(Resolution(2, 2))
    for origin in [(5, 0), (0, 4), (-1, 0), (6, 5)]:
        with pytest.raises(OutOfBoundsError):
            blit(dst, src, origin)


def test_scale_nearest_floor_mapping():
    # 5x3 -> 3x2 picks source columns [0,1,3] and rows [0,1] (x*sw//tw map).
    pixels = np.zeros((3, 5, 3), dtype=np.uint8)
    for y in range(3):
        for x in range(5):
            pixels[y, x] = (x, y, 0)
    src = Frame(Resolution(5, 3), pixels)
    out = scale_nearest(src, Resolution(3, 2))
    got = [[tuple(int(v) for v in out.pixels[y, x]) for x in range(3)] for y in range(2)]
    assert got == [
        [(0, 0, 0), (1, 0, 0), (3, 0, 0)],
        [(0, 1, 0), (1, 1, 0), (3, 1, 0)],
    ]


def test_scale_nearest_upscale_replicates():
    pixels = np.array([[[1, 1, 1], [2, 2, 2]]], dtype=np.uint8)
    src = Frame(Resolution(2, 1), pixels)
    out = scale_nearest(src, Resolution(4, 2))
    # x map for 2->4: [0,0,1,1]
    assert [int(out.pixels[0, x, 0]) for x in range(4)] == [1, 1, 2, 2]
    assert (out.pixels[0] == out.pixels[1]).all()


def test_scale_same_resolution_copies():
    src = blank_frame(Resolution(3, 3), (5, 5, 5), seq=2)
    out = scale_nearest(src, Resolution(3, 3))
    assert out is not src
    assert out.seq == 2
    assert (out.pixels == src.pixels).all()


resolutions = st.builds(
    Resolution,
    st.integers(min_value=1, max_value=24),
    st.integers(min_value=1, max_value=24),
)


@given(src=resolutions, target=resolutions, seed=st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_scale_output_pixels_come_from_source(src, target, seed):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(src.height, src.width, 3), dtype=np.uint8)
    frame = Frame(src, pixels)
    out = scale_nearest(frame, target)
    assert out.resolution == target
    palette = {tuple(int(v) for v in px) for row in pixels for px in row}
    got = {tuple(int(v) for v in px) for row in out.pixels for px in row}
    assert got <= palette


@given(
    dst=resolutions,
    src=resolutions,
    ox=st.integers(0, 30),
    oy=st.integers(0, 30),
)
@settings(max_examples=60, deadline=None)
def test_blit_outside_region_unchanged(dst, src, ox, oy):
    if ox + src.width > dst.width or oy + src.height > dst.height:
        with pytest.raises(OutOfBoundsError):
            blit(blank_frame(dst), blank_frame(src), (ox, oy))
        return
    base = blank_frame(dst, (9, 9, 9))
    patch = blank_frame(src, (200, 0, 0))
    out = blit(base, patch, (ox, oy))
    mask = np.ones((dst.height, dst.width), dtype=bool)
    mask[oy : oy + src.height, ox : ox + src.width] = False
    assert (out.pixels[mask] == 9).all()
    assert (out.pixels[~mask][:, 0] == 200).all()
