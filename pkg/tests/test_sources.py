import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcam.config import ConfigError
from mcam.frame import Resolution
from mcam.sources import (
    CameraSpec,
    Capability,
    NoUsableCamerasError,
    PixelFormat,
    build_registry,
    camera_specs_from_data,
    frame_timestamp_us,
    palette_color,
    select_capability,
    synth_frame,
)

R = Resolution


def cap(w, h, fps=30.0, fmt=PixelFormat.RGB24):
    return Capability(R(w, h), format=fmt, fps=fps)


def test_capability_validation():
    with pytest.raises(ValueError):
        Capability(R(640, 480), fps=0)
    with pytest.raises(ValueError):
        CameraSpec("x", ())
    with pytest.raises(ValueError):
        CameraSpec("x", (cap(640, 480),), warm_up_ms=-1)


def test_registry_ordinals_contiguous_and_ordered():
    specs = [
        CameraSpec("one", (cap(640, 480),)),
        CameraSpec("two", (cap(320, 240),)),
        CameraSpec("three", (cap(1280, 720),)),
    ]
    reg = build_registry(specs)
    assert reg.ordinals == (1, 2, 3)
    assert [reg.entry(i).spec.name for i in (1, 2, 3)] == ["one", "two", "three"]
    with pytest.raises(KeyError):
        reg.entry(0)
    with pytest.raises(KeyError):
        reg.entry(4)


def test_virtual_cameras_excluded_unless_whitelisted():
    specs = [
        CameraSpec("real", (cap(640, 480),)),
        CameraSpec("screencap", (cap(640, 480),), is_virtual=True),
    ]
    reg = build_registry(specs)
    assert [e.spec.name for e in reg] == ["real"]
    reg2 = build_registry(specs, virtual_whitelist=("screencap",))
    assert [e.spec.name for e in reg2] == ["real", "screencap"]


def test_empty_registry_rejected():
    with pytest.raises(NoUsableCamerasError):
        build_registry([])
    only_virtual = [CameraSpec("v", (cap(640, 480),), is_virtual=True)]
    with pytest.raises(NoUsableCamerasError):
        build_registry(only_virtual)


class TestSelectCapability:
    def test_picks_largest_fitting_height(self):
        caps = (cap(320, 240), cap(640, 480), cap(1920, 1080))
        assert select_capability(caps).resolution == R(640, 480)

    def test_exact_target_wins(self):
        caps = (cap(854, 640), cap(640, 480))
        assert select_capability(caps).resolution == R(854, 640)

    def test_no_fit_takes_minimal_height(self):
        caps = (cap(1920, 1080), cap(1280, 720))
        assert select_capability(caps).resolution == R(1280, 720)

    def test_prefers_rgb24_then_30fps(self):
        caps = (
            cap(640, 480, fps=60, fmt=PixelFormat.OTHER),
            cap(640, 480, fps=60),
            cap(640, 480, fps=30),
        )
        chosen = select_capability(caps)
        assert chosen.format is PixelFormat.RGB24
        assert chosen.fps == 30

    def test_higher_fps_breaks_remaining_ties(self):
        caps = (cap(640, 480, fps=15), cap(640, 480, fps=24))
        assert select_capability(caps).fps == 24

    def test_first_declared_on_full_tie(self):
        a = cap(640, 480, fps=15)
        b = cap(640, 481 - 1, fps=15)  # identical key, different object
        assert select_capability((a, b)) is a


@given(
    items=st.lists(
        st.tuples(
            st.integers(1, 4).map(lambda k: 120 * k),
            st.sampled_from([15.0, 24.0, 30.0, 60.0]),
            st.sampled_from([PixelFormat.RGB24, PixelFormat.OTHER]),
        ),
        min_size=1,
        max_size=6,
        unique=True,
    ),
    seed=st.randoms(use_true_random=False),
)
@settings(max_examples=80, deadline=None)
def test_select_capability_permutation_invariant(items, seed):
    caps = tuple(cap(h * 4 // 3, h, fps=f, fmt=fmt) for h, f, fmt in items)
    shuffled = list(caps)
    seed.shuffle(shuffled)
    assert select_capability(caps) == select_capability(tuple(shuffled))


def test_palette_colors_frozen():
    # hue = (ordinal*75) % 256 through the standard HSV wheel at full
    # saturation/value; values below were computed with the piecewise
    # formula by hand.
    assert palette_color(1) == (62, 255, 0)
    assert palette_color(2) == (0, 124, 255)
    assert palette_color(3) == (255, 0, 185)
    assert palette_color(4) == (247, 255, 0)
    assert palette_color(5) == (0, 255, 201)
    assert palette_color(8) == (0, 255, 16)


def test_synth_frame_provenance_and_timestamp():
    f = synth_frame(3, cap(64, 48), 7)
    assert f.source_ordinal == 3
    assert f.seq == 7
    assert f.timestamp_us == 233333  # floor(7e6/30)
    assert f.pixel(0, 0) == (3, 7, 255)
    assert f.pixel(5, 5) == palette_color(3)
    f2 = synth_frame(3, cap(64, 48, fps=15.0), 3)
    assert f2.timestamp_us == 200000


def test_synth_frame_seq_wraps_in_marker_only():
    f = synth_frame(1, cap(8, 8), 300)
    assert f.seq == 300
    assert f.pixel(0, 0) == (1, 300 % 256, 255)


@given(st.integers(1, 255), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_timestamps_nondecreasing_within_source(ordinal, seq):
    fps = 30.0
    assert frame_timestamp_us(seq + 1, fps) >= frame_timestamp_us(seq, fps)


def test_camera_specs_from_data_shapes():
    data = {
        "cameras": [
            {
                "name": "integrated",
                "capabilities": [{"width": 640, "height": 480, "fps": 30}],
                "warm_up_ms": 120,
            },
            {
                "name": "usb",
                "capabilities": [
                    {"width": 1920, "height": 1080},
                    {"width": 640, "height": 480, "format": "other"},
                ],
                "latency_ms": 40,
                "is_virtual": True,
            },
        ]
    }
    specs = camera_specs_from_data(data)
    assert specs[0].name == "integrated"
    assert specs[0].warm_up_ms == 120
    assert specs[1].is_virtual
    assert specs[1].capabilities[1].format is PixelFormat.OTHER

    with pytest.raises(ConfigError):
        camera_specs_from_data({"cameras": [{"name": "x"}]})
    with pytest.raises(ConfigError):
        camera_specs_from_data({"cameras": [{"capabilities": [{"width": 1, "height": 1}]}]})
