"""RGB24 raster primitives shared by every pipeline stage.

Frames are packed row-major RGB24 held as numpy arrays of shape
(height, width, 3).  All operations return new frames; pixel buffers are
never mutated in place once wrapped in a Frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

COMPOSED_OUTPUT_ORDINAL = 0


class OutOfBoundsError(Exception):
    """Blit target rectangle does not fit inside the destination frame."""


@dataclass(frozen=True)
class Resolution:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"resolution must be at least 1x1, got {self.width}x{self.height}")

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def __str__(self) -> str:
        return f"{self.width}x{self.height}"


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect origin must be non-negative, got ({self.x}, {self.y})")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"rect must be at least 1x1, got {self.width}x{self.height}")

    @property
    def size(self) -> Resolution:
        return Resolution(self.width, self.height)


# eq=False: frames compare by identity; compare content via to_bytes().
@dataclass(frozen=True, eq=False)
class Frame:
    resolution: Resolution
    pixels: np.ndarray
    source_ordinal: int = COMPOSED_OUTPUT_ORDINAL
    seq: int = 0
    timestamp_us: int = 0

    def __post_init__(self) -> None:
        expected = (self.resolution.height, self.resolution.width, 3)
        if self.pixels.shape != expected or self.pixels.dtype != np.uint8:
            raise ValueError(
                f"pixel buffer must be uint8 with shape {expected}, "
                f"got {self.pixels.dtype} {self.pixels.shape}"
            )
        if self.source_ordinal < 0:
            raise ValueError("source_ordinal must be non-negative")
        if self.seq < 0 or self.timestamp_us < 0:
            raise ValueError("seq and timestamp_us must be non-negative")

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        r, g, b = self.pixels[y, x]
        return int(r), int(g), int(b)

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    @property
    def byte_length(self) -> int:
        return self.resolution.pixel_count * 3


def blank_frame(
    resolution: Resolution,
    color: tuple[int, int, int] = (0, 0, 0),
    *,
    source_ordinal: int = COMPOSED_OUTPUT_ORDINAL,
    seq: int = 0,
    timestamp_us: int = 0,
) -> Frame:
    """Solid-color frame of the given size."""
    pixels = np.empty((resolution.height, resolution.width, 3), dtype=np.uint8)
    pixels[:, :] = np.asarray(color, dtype=np.uint8)
    return Frame(resolution, pixels, source_ordinal=source_ordinal, seq=seq, timestamp_us=timestamp_us)


def blit(dst: Frame, src: Frame, origin: tuple[int, int]) -> Frame:
    """Copy src onto dst with src's top-left at origin; dst metadata is kept."""
    ox, oy = origin
    sw, sh = src.resolution.width, src.resolution.height
    dw, dh = dst.resolution.width, dst.resolution.height
    if ox < 0 or oy < 0 or ox + sw > dw or oy + sh > dh:
        raise OutOfBoundsError(
            f"{sw}x{sh} at ({ox}, {oy}) does not fit inside {dst.resolution}"
        )
    pixels = dst.pixels.copy()
    pixels[oy : oy + sh, ox : ox + sw] = src.pixels
    return replace(dst, pixels=pixels)


def scale_nearest(src: Frame, target: Resolution) -> Frame:
    """Nearest-neighbor resample: out(x, y) = src(floor(x*sw/tw), floor(y*sh/th)).

    Integer floor indexing keeps pixel provenance exact, so tests can trace
    any output pixel back to a unique input pixel.
    """
    if target == src.resolution:
        return replace(src, pixels=src.pixels.copy())
    sw, sh = src.resolution.width, src.resolution.height
    xs = np.arange(target.width, dtype=np.int64) * sw // target.width
    ys = np.arange(target.height, dtype=np.int64) * sh // target.height
    pixels = src.pixels[np.ix_(ys, xs)]
    return replace(src, resolution=target, pixels=np.ascontiguousarray(pixels))
