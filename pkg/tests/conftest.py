import json
from pathlib import Path

import pytest

from mcam.frame import Resolution
from mcam.sources import CameraSpec, Capability

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def golden():
    with open(DATA_DIR / "golden_vectors.json", encoding="utf-8") as fh:
        return json.load(fh)


def make_cams(n, *, width=320, height=240, fps=30.0, warm_up_ms=0, latency_ms=0):
    """n simple single-capability cameras named cam1..camN."""
    return tuple(
        CameraSpec(
            f"cam{i}",
            (Capability(Resolution(width, height), fps=fps),),
            warm_up_ms=warm_up_ms,
            latency_ms=latency_ms,
        )
        for i in range(1, n + 1)
    )
