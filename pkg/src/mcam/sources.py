"""Synthetic camera sources, capability selection, and the camera registry.

A registry assigns contiguous ordinals 1..N to the usable cameras in their
declared order.  Ordinal 0 is reserved for composed output frames.  Synthetic
frames carry their provenance in pixel (0, 0) as (ordinal, seq mod 256, 255),
so any downstream pixel can be traced to the camera and frame it came from.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .config import ConfigError, load_mapping
from .frame import Frame, Resolution, blank_frame

DEFAULT_TARGET_HEIGHT = 640
PREFERRED_FPS = 30.0


class NoUsableCamerasError(Exception):
    """Every configured camera was excluded from the registry."""


class PixelFormat(Enum):
    RGB24 = "rgb24"
    OTHER = "other"


@dataclass(frozen=True)
class Capability:
    """One (resolution, format, rate) mode a camera can be opened in."""

    resolution: Resolution
    format: PixelFormat = PixelFormat.RGB24
    fps: float = PREFERRED_FPS

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")


@dataclass(frozen=True)
class CameraSpec:
    name: str
    capabilities: tuple[Capability, ...]
    warm_up_ms: float = 0.0
    latency_ms: float = 0.0
    is_virtual: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("camera name must be non-empty")
        if not self.capabilities:
            raise ValueError(f"camera {self.name!r} declares no capabilities")
        if self.warm_up_ms < 0 or self.latency_ms < 0:
            raise ValueError(f"camera {self.name!r} has negative timing parameters")


@dataclass(frozen=True)
class RegistryEntry:
    ordinal: int
    spec: CameraSpec
    selected: Capability


@dataclass(frozen=True)
class Registry:
    entries: tuple[RegistryEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entry(self, ordinal: int) -> RegistryEntry:
        if not 1 <= ordinal <= len(self.entries):
            raise KeyError(f"no camera with ordinal {ordinal}")
        return self.entries[ordinal - 1]

    @property
    def ordinals(self) -> tuple[int, ...]:
        return tuple(e.ordinal for e in self.entries)


def _preference_key(cap: Capability) -> tuple[bool, bool, float]:
    # RGB24 before converted formats, exact 30 fps before anything else,
    # then higher rates; declared order breaks full ties (min() is stable).
    return (cap.format is not PixelFormat.RGB24, cap.fps != PREFERRED_FPS, -cap.fps)


def select_capability(
    capabilities: Sequence[Capability], target_height: int = DEFAULT_TARGET_HEIGHT
) -> Capability:
    """Pick the capability used to open a camera for a given display height.

    The largest mode that still fits the target height wins; if nothing
    fits, fall back to the smallest mode available.
    """
    if not capabilities:
        raise ValueError("cannot select from an empty capability list")
    fitting = [c for c in capabilities if c.resolution.height <= target_height]
    if fitting:
        best = max(c.resolution.height for c in fitting)
        pool = [c for c in fitting if c.resolution.height == best]
    else:
        low = min(c.resolution.height for c in capabilities)
        pool = [c for c in capabilities if c.resolution.height == low]
    return min(pool, key=_preference_key)


def build_registry(
    specs: Sequence[CameraSpec],
    target_height: int = DEFAULT_TARGET_HEIGHT,
    virtual_whitelist: Iterable[str] = (),
) -> Registry:
    """Number the usable cameras 1..N in declared order.

    Virtual cameras are excluded unless whitelisted by name, which keeps a
    composing filter from capturing its own output.
    """
    allowed = set(virtual_whitelist)
    usable = [s for s in specs if not s.is_virtual or s.name in allowed]
    if not usable:
        raise NoUsableCamerasError("no usable cameras after exclusions")
    entries = tuple(
        RegistryEntry(i, spec, select_capability(spec.capabilities, target_height))
        for i, spec in enumerate(usable, start=1)
    )
    return Registry(entries)


def enumerate_capabilities(spec: CameraSpec) -> tuple[Capability, ...]:
    """All modes a camera offers, in its declared order."""
    return spec.capabilities


def palette_color(ordinal: int) -> tuple[int, int, int]:
    """Fixed background color for a camera ordinal (hue = ordinal*75 mod 256)."""
    hue = (ordinal * 75) % 256
    r, g, b = colorsys.hsv_to_rgb(hue / 256.0, 1.0, 1.0)
    return round(r * 255), round(g * 255), round(b * 255)


def frame_timestamp_us(seq: int, fps: float) -> int:
    if fps == int(fps):
        return seq * 1_000_000 // int(fps)
    return math.floor(seq * 1_000_000 / fps)


def synth_frame(ordinal: int, cap: Capability, seq: int) -> Frame:
    """Deterministic test-pattern frame: solid palette color plus the
    provenance marker (ordinal, seq mod 256, 255) at pixel (0, 0)."""
    if ordinal < 1 or ordinal > 255:
        raise ValueError(f"source ordinal must be in 1..255, got {ordinal}")
    if seq < 0:
        raise ValueError(f"seq must be non-negative, got {seq}")
    frame = blank_frame(
        cap.resolution,
        palette_color(ordinal),
        source_ordinal=ordinal,
        seq=seq,
        timestamp_us=frame_timestamp_us(seq, cap.fps),
    )
    frame.pixels[0, 0] = (ordinal, seq % 256, 255)
    return frame


_FORMATS = {"rgb24": PixelFormat.RGB24, "other": PixelFormat.OTHER}


def camera_specs_from_data(data: object) -> list[CameraSpec]:
    """Parse the camera list of a config mapping (see configs/ for the schema)."""
    if isinstance(data, dict):
        data = data.get("cameras")
    if not isinstance(data, list) or not data:
        raise ConfigError("config must provide a non-empty 'cameras' list")
    specs = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise ConfigError(f"cameras[{i}] must be a mapping")
        try:
            caps = tuple(_capability_from_data(c, i) for c in item.get("capabilities", []))
            spec = CameraSpec(
                name=str(item.get("name", "")),
                capabilities=caps,
                warm_up_ms=float(item.get("warm_up_ms", 0.0)),
                latency_ms=float(item.get("latency_ms", 0.0)),
                is_virtual=bool(item.get("is_virtual", False)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cameras[{i}]: {exc}") from exc
        specs.append(spec)
    return specs


def _capability_from_data(item: object, index: int) -> Capability:
    if not isinstance(item, dict):
        raise ConfigError(f"cameras[{index}] capability entries must be mappings")
    fmt = str(item.get("format", "rgb24")).lower()
    if fmt not in _FORMATS:
        raise ConfigError(f"cameras[{index}]: unknown pixel format {fmt!r}")
    try:
        return Capability(
            resolution=Resolution(int(item["width"]), int(item["height"])),
            format=_FORMATS[fmt],
            fps=float(item.get("fps", PREFERRED_FPS)),
        )
    except KeyError as exc:
        raise ConfigError(f"cameras[{index}]: capability missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cameras[{index}]: {exc}") from exc


def load_camera_specs(path: str | Path) -> list[CameraSpec]:
    return camera_specs_from_data(load_mapping(path))
