"""Composition of camera frames onto a fixed-size output canvas.

Two arrangements: an equal-cell tiled grid of every camera, and a primary
view showing one camera full size with optional thumbnails of the others.
The canvas never changes size mid-run; remote software only ever negotiates
the stream format once.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .frame import COMPOSED_OUTPUT_ORDINAL, Frame, Rect, Resolution, scale_nearest

THUMB_HEIGHT_DIVISOR = 5
THUMB_MARGIN_PX = 8
THUMB_GAP_PX = 8


class UnknownPrimaryError(Exception):
    """Requested primary ordinal is not among the frames to compose."""


def canvas_for_target_height(target_height: int) -> Resolution:
    """Default canvas: twice the nearest integer to target_height*2/3, by
    target_height.  640 yields the 854x640 canvas used throughout."""
    if target_height < 1:
        raise ValueError("target height must be positive")
    return Resolution(2 * ((2 * target_height + 1) // 3), target_height)


def tile_layout(n: int, canvas: Resolution) -> list[Rect]:
    """Row-major grid of n cells: ceil(sqrt(n)) columns, remainder pixels
    folded into the last row and column."""
    if n < 1:
        raise ValueError("tile layout needs at least one cell")
    cols = math.isqrt(n - 1) + 1
    rows = (n + cols - 1) // cols
    base_w = canvas.width // cols
    base_h = canvas.height // rows
    if base_w < 1 or base_h < 1:
        raise ValueError(f"canvas {canvas} too small for {n} tiles")
    rects = []
    for idx in range(n):
        r, c = divmod(idx, cols)
        x = c * base_w
        y = r * base_h
        w = base_w if c < cols - 1 else canvas.width - x
        h = base_h if r < rows - 1 else canvas.height - y
        rects.append(Rect(x, y, w, h))
    return rects


def fit_within(src: Resolution, box: Resolution) -> Resolution:
    """Largest aspect-preserving size (floor division) that fits in box."""
    if src.width * box.height >= src.height * box.width:
        return Resolution(box.width, max(1, src.height * box.width // src.width))
    return Resolution(max(1, src.width * box.height // src.height), box.height)


def center_origin(inner: Resolution, outer: Resolution) -> tuple[int, int]:
    return (outer.width - inner.width) // 2, (outer.height - inner.height) // 2


def primary_placement(src: Resolution, canvas: Resolution) -> Rect:
    """Where a primary frame of the given size lands: unscaled and centered
    when it fits, otherwise scaled down to fit and centered."""
    size = src if (src.width <= canvas.width and src.height <= canvas.height) else fit_within(src, canvas)
    x, y = center_origin(size, canvas)
    return Rect(x, y, size.width, size.height)


def tile_placement(src: Resolution, cell: Rect) -> Rect:
    """Where a frame of the given size lands inside its grid cell."""
    size = fit_within(src, cell.size)
    ox, oy = center_origin(size, cell.size)
    return Rect(cell.x + ox, cell.y + oy, size.width, size.height)


def thumbnail_size(src: Resolution, canvas: Resolution) -> Resolution:
    h = max(1, canvas.height // THUMB_HEIGHT_DIVISOR)
    return Resolution(max(1, src.width * h // src.height), h)


def _require_ordered(frames: Sequence[tuple[int, Frame]]) -> None:
    ordinals = [o for o, _ in frames]
    if not ordinals:
        raise ValueError("nothing to compose")
    if any(o < 1 for o in ordinals) or sorted(set(ordinals)) != ordinals:
        raise ValueError(f"frames must be in strictly ascending ordinal order, got {ordinals}")


def _paste(out: np.ndarray, frame: Frame, rect: Rect) -> None:
    scaled = frame if frame.resolution == rect.size else scale_nearest(frame, rect.size)
    out[rect.y : rect.y + rect.height, rect.x : rect.x + rect.width] = scaled.pixels


def compose_tiled(
    frames: Sequence[tuple[int, Frame]],
    canvas: Resolution,
    *,
    seq: int = 0,
    timestamp_us: int = 0,
) -> Frame:
    """All cameras side by side on a black canvas, one grid cell each."""
    _require_ordered(frames)
    out = np.zeros((canvas.height, canvas.width, 3), dtype=np.uint8)
    cells = tile_layout(len(frames), canvas)
    for (_, frame), cell in zip(frames, cells):
        _paste(out, frame, tile_placement(frame.resolution, cell))
    return Frame(canvas, out, source_ordinal=COMPOSED_OUTPUT_ORDINAL, seq=seq, timestamp_us=timestamp_us)


def compose_primary(
    frames: Sequence[tuple[int, Frame]],
    primary: int,
    canvas: Resolution,
    thumbnails_enabled: bool = True,
    *,
    seq: int = 0,
    timestamp_us: int = 0,
) -> Frame:
    """One camera full size (black border when smaller than the canvas),
    the rest as a bottom-left thumbnail strip drawn over it."""
    _require_ordered(frames)
    by_ordinal = dict(frames)
    if primary not in by_ordinal:
        raise UnknownPrimaryError(f"ordinal {primary} not among {sorted(by_ordinal)}")
    out = np.zeros((canvas.height, canvas.width, 3), dtype=np.uint8)
    _paste(out, by_ordinal[primary], primary_placement(by_ordinal[primary].resolution, canvas))
    if thumbnails_enabled:
        x = THUMB_MARGIN_PX
        for ordinal, frame in frames:
            if ordinal == primary:
                continue
            size = thumbnail_size(frame.resolution, canvas)
            if x + size.width > canvas.width:
                break
            y = canvas.height - THUMB_MARGIN_PX - size.height
            if y < 0:
                break
            _paste(out, frame, Rect(x, y, size.width, size.height))
            x += size.width + THUMB_GAP_PX
    return Frame(canvas, out, source_ordinal=COMPOSED_OUTPUT_ORDINAL, seq=seq, timestamp_us=timestamp_us)
