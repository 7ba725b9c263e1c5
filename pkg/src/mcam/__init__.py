"""Simulator and protocol suite for multi-camera video chat sessions."""

from .config import ConfigError
from .frame import Frame, OutOfBoundsError, Rect, Resolution
from .sources import CameraSpec, Capability, NoUsableCamerasError, PixelFormat, Registry
from .switching import Pipeline, SwitchStrategy, ViewMode, ViewState

__version__ = "0.1.0"

__all__ = [
    "CameraSpec",
    "Capability",
    "ConfigError",
    "Frame",
    "NoUsableCamerasError",
    "OutOfBoundsError",
    "Pipeline",
    "PixelFormat",
    "Rect",
    "Registry",
    "Resolution",
    "SwitchStrategy",
    "ViewMode",
    "ViewState",
    "__version__",
]
