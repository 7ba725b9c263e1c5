"""Measurement harness: bandwidth, frame rate, switch latency, display latency.

Every measurement runs against the deterministic virtual-clock pipeline and
models the screen-capture instrumentation a bench operator would point at
the output window: the capture samples the composed view at a fixed cadence
(22 ms by default), so measured times inherit that quantization, exactly as
a capture-based measurement would.
"""

from __future__ import annotations

import csv
import itertools
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .compositor import (
    canvas_for_target_height,
    primary_placement,
    tile_layout,
    tile_placement,
)
from .config import ConfigError, load_mapping
from .frame import Frame, Rect, Resolution
from .sources import (
    CameraSpec,
    Capability,
    DEFAULT_TARGET_HEIGHT,
    NoUsableCamerasError,
    PixelFormat,
    build_registry,
    camera_specs_from_data,
    palette_color,
)
from .switching import Pipeline, SwitchStrategy, ViewState

MB = 1 << 20


class NoSwitchObservedError(Exception):
    """The output never showed the requested view within the time budget."""


class MeasurementTimeoutError(Exception):
    """The pipeline stalled or never settled while measuring."""


@dataclass(frozen=True)
class CaptureModel:
    """Sampling cadence of the simulated screen-capture instrument."""

    sampling_period_ms: float = 22.0

    def __post_init__(self) -> None:
        if self.sampling_period_ms <= 0:
            raise ValueError("sampling period must be positive")

    @property
    def period_us(self) -> int:
        return max(1, int(round(self.sampling_period_ms * 1000)))


def _stream_bytes_per_s(cap: Capability) -> float:
    return cap.resolution.pixel_count * 3 * cap.fps


def bandwidth_estimate(cap: Capability) -> float:
    """Uncompressed delivery rate of one camera in bytes per second:
    width * height * 3 * fps."""
    if cap.format is not PixelFormat.RGB24:
        raise ValueError("bandwidth is defined for uncompressed RGB24 modes")
    return _stream_bytes_per_s(cap)


def _ceil_to_grid(t_us: int, step_us: int, phase_us: int) -> int:
    """Smallest grid instant phase + k*step at or after t (k >= 0)."""
    if t_us <= phase_us:
        return phase_us
    return phase_us - ((phase_us - t_us) // step_us) * step_us


class ViewClassifier:
    """Decode which view a composed frame shows from its provenance pixels.

    Each candidate view implies exact positions where camera top-left
    provenance markers (ordinal, seq, 255) and solid palette interiors must
    land; a frame is classified as the first candidate whose positions all
    check out.  This works for a single camera too, where the primary and
    tiled arrangements differ only in geometry.
    """

    def __init__(
        self,
        resolutions: dict[int, Resolution],
        canvas: Resolution,
        tiled_enabled: bool = True,
    ) -> None:
        if not resolutions:
            raise ValueError("classifier needs at least one source resolution")
        self._canvas = canvas
        self._candidates: list[tuple[ViewState, list[tuple[Rect, int]]]] = []
        ordinals = sorted(resolutions)
        for ordinal in ordinals:
            placement = primary_placement(resolutions[ordinal], canvas)
            self._candidates.append((ViewState.primary(ordinal), [(placement, ordinal)]))
        if tiled_enabled:
            cells = tile_layout(len(ordinals), canvas)
            placements = [
                (tile_placement(resolutions[o], cell), o) for o, cell in zip(ordinals, cells)
            ]
            self._candidates.append((ViewState.tiled(), placements))

    @classmethod
    def for_pipeline(cls, pipeline: Pipeline) -> "ViewClassifier":
        return cls(
            {e.ordinal: e.selected.resolution for e in pipeline.registry},
            pipeline.canvas,
            pipeline.tiled_enabled,
        )

    def classify(self, frame: Frame) -> ViewState | None:
        if frame.resolution != self._canvas:
            return None
        for state, placements in self._candidates:
            if all(self._matches(frame, rect, ordinal) for rect, ordinal in placements):
                return state
        return None

    @staticmethod
    def _matches(frame: Frame, rect: Rect, ordinal: int) -> bool:
        r, _, b = frame.pixel(rect.x, rect.y)
        if r != ordinal or b != 255:
            return False
        px, py = rect.x + rect.width // 2, rect.y + rect.height // 2
        if (px, py) == (rect.x, rect.y):
            return True
        return frame.pixel(px, py) == palette_color(ordinal)


def _run_to_next_output(pipeline: Pipeline) -> list[Frame]:
    nb = pipeline.next_output_time()
    if nb is None:
        raise MeasurementTimeoutError("pipeline is not running")
    return pipeline.tick_to(nb)


def measure_frame_rate(
    pipeline: Pipeline, n_frames: int = 250, *, burn_in_s: float = 1.0
) -> float:
    """Average composed output rate over a window of consecutive frames:
    (n-1) / (t_last - t_first), frames counted only after the burn-in."""
    if n_frames < 2:
        raise ValueError("need at least two frames to estimate a rate")
    cutoff = pipeline.clock_us + int(round(burn_in_s * 1_000_000))
    stall_budget_us = 5_000_000
    last_progress = pipeline.clock_us
    times: list[int] = []
    while len(times) < n_frames:
        frames = _run_to_next_output(pipeline)
        now = pipeline.clock_us
        if frames:
            last_progress = now
            for f in frames:
                at = pipeline.start_us + f.timestamp_us
                if at >= cutoff:
                    times.append(at)
        elif now - last_progress > stall_budget_us:
            raise MeasurementTimeoutError(
                f"no composed frames for {stall_budget_us // 1_000_000} simulated seconds"
            )
    return (n_frames - 1) * 1_000_000 / (times[n_frames - 1] - times[0])


def _settle(pipeline: Pipeline, classifier: ViewClassifier, budget_us: int) -> None:
    deadline = pipeline.clock_us + budget_us
    while True:
        f = pipeline.last_frame
        if f is not None and classifier.classify(f) == pipeline.state:
            return
        if pipeline.clock_us > deadline:
            raise MeasurementTimeoutError("pipeline never reached a steady recognizable view")
        _run_to_next_output(pipeline)


def measure_switch_latency(
    pipeline: Pipeline,
    capture: CaptureModel = CaptureModel(),
    *,
    rng: random.Random | None = None,
    timeout_s: float = 5.0,
) -> float:
    """Issue one advance and time it the way a capture recording would: the
    difference between the first sample at or after the request (where the
    click is visible) and the first sample whose frame provenance shows the
    new view.  Quantization error is bounded by one capture period on each
    side.  Returns milliseconds."""
    rng = rng or random.Random(0)
    classifier = ViewClassifier.for_pipeline(pipeline)
    cap_us = capture.period_us
    _settle(pipeline, classifier, budget_us=int(timeout_s * 2_000_000))

    period_us = max(1, int(round(1_000_000 / pipeline.compositor_fps)))
    before = pipeline.state
    t_req = pipeline.clock_us + rng.randrange(period_us)
    pipeline.tick_to(t_req)
    outcome = pipeline.request_advance(t_req)

    grid_phase = t_req - cap_us + 1 + rng.randrange(cap_us)
    request_sample = _ceil_to_grid(t_req, cap_us, grid_phase)
    deadline = t_req + int(timeout_s * 1_000_000)
    sample = request_sample
    while sample <= deadline:
        pipeline.tick_to(sample)
        f = pipeline.last_frame
        if f is not None and outcome.new_state != before and classifier.classify(f) == outcome.new_state:
            return (sample - request_sample) / 1000.0
        sample += cap_us
    raise NoSwitchObservedError(
        f"view never changed to {outcome.new_state} within {timeout_s} s"
    )


def measure_display_latency(
    pipeline: Pipeline,
    iterations: int = 3,
    events: int = 10,
    capture: CaptureModel = CaptureModel(),
    *,
    event_period_s: float = 1.0,
    rng: random.Random | None = None,
) -> tuple[float, float]:
    """Feedback-loop estimate of a camera's capture-to-display latency.

    The camera watches a display showing its own output next to a counter
    that increments once per event period.  After passing through the loop
    `iterations` times the counter image lags `iterations * latency` behind
    the directly displayed counter; dividing the observed lag by the number
    of iterations divides the sampling quantization error as well.  Returns
    (mean_ms, stdev_ms) over the events.
    """
    if iterations < 1:
        raise ValueError("need at least one loop iteration")
    if events < 1:
        raise ValueError("need at least one counter event")
    ordinal = pipeline.state.primary_ordinal or 1
    entry = pipeline.registry.entry(ordinal)
    latency_us = int(round(entry.spec.latency_ms * 1000))
    rng = rng or random.Random(0)
    cap_us = capture.period_us
    period_us = max(1, int(round(1_000_000 / pipeline.compositor_fps)))
    event_period_us = max(1, int(round(event_period_s * 1_000_000)))
    grid_phase = rng.randrange(cap_us)

    estimates = []
    base = pipeline.clock_us
    for e in range(events):
        t_event = base + e * event_period_us + rng.randrange(period_us + cap_us)
        direct = _ceil_to_grid(t_event, cap_us, grid_phase)
        through_loop = pipeline.boundary_at_or_after(t_event + iterations * latency_us)
        looped = _ceil_to_grid(through_loop, cap_us, grid_phase)
        estimates.append((looped - direct) / iterations / 1000.0)
    mean = statistics.fmean(estimates)
    std = statistics.stdev(estimates) if len(estimates) > 1 else 0.0
    return mean, std


# -- suite runner -------------------------------------------------------------

@dataclass(frozen=True)
class BenchConfig:
    cameras: tuple[CameraSpec, ...]
    scenario: str = "bench"
    strategy: SwitchStrategy = SwitchStrategy.ALL_AT_ONCE
    target_height: int = DEFAULT_TARGET_HEIGHT
    compositor_fps: float | None = None
    frame_window: int = 250
    burn_in_s: float = 1.0
    capture: CaptureModel = field(default_factory=CaptureModel)
    iterations: int = 3
    events: int = 10
    subsets: str = "all"
    seed: int = 0
    clock: str = "virtual"


@dataclass(frozen=True)
class BenchRun:
    cameras: tuple[str, ...]
    n_cams: int
    strategy: str
    fps_measured: float
    switch_latency_ms: float | None
    display_latency_ms: float
    display_latency_std_ms: float
    bandwidth_bytes_per_s: float


@dataclass(frozen=True)
class BenchReport:
    scenario: str
    clock: str
    strategy: str
    runs: tuple[BenchRun, ...]


def _camera_subsets(cameras: tuple[CameraSpec, ...], mode: str) -> list[tuple[CameraSpec, ...]]:
    if mode == "single":
        return [cameras]
    subsets = []
    for k in range(1, len(cameras) + 1):
        subsets.extend(itertools.combinations(cameras, k))
    return subsets


def run_suite(config: BenchConfig) -> BenchReport:
    """Measure every camera subset under the configured strategy.

    With four cameras and subsets="all" this is the classic 15-combination
    sweep; "single" measures just the full camera set.
    """
    if not config.cameras:
        raise ConfigError("bench config needs at least one camera")
    if config.clock != "virtual":
        raise ConfigError("the bench suite only runs on the virtual clock")
    if config.subsets not in ("all", "single"):
        raise ConfigError(f"subsets must be 'all' or 'single', got {config.subsets!r}")
    if config.frame_window < 2:
        raise ConfigError("frame_window must be at least 2")

    canvas = canvas_for_target_height(config.target_height)
    runs = []
    for idx, subset in enumerate(_camera_subsets(config.cameras, config.subsets)):
        try:
            registry = build_registry(list(subset), config.target_height)
        except NoUsableCamerasError as exc:
            raise ConfigError(f"subset {[s.name for s in subset]}: {exc}") from exc
        pipeline = Pipeline(
            registry,
            config.strategy,
            canvas=canvas,
            compositor_fps=config.compositor_fps,
        )
        pipeline.start(0)
        fps = measure_frame_rate(pipeline, config.frame_window, burn_in_s=config.burn_in_s)
        rng = random.Random(config.seed * 100003 + idx)
        if config.strategy is SwitchStrategy.ONE_AT_A_TIME and len(registry) == 1:
            # advancing with one camera and no tiled stop changes nothing
            switch_ms = None
        else:
            try:
                switch_ms = measure_switch_latency(pipeline, config.capture, rng=rng)
            except NoSwitchObservedError:
                # a lone camera whose tile fills the canvas renders the tiled
                # and primary arrangements identically; nothing to time
                switch_ms = None
        disp_mean, disp_std = measure_display_latency(
            pipeline, config.iterations, config.events, config.capture, rng=rng
        )
        runs.append(
            BenchRun(
                cameras=tuple(s.name for s in subset),
                n_cams=len(subset),
                strategy=config.strategy.value,
                fps_measured=fps,
                switch_latency_ms=switch_ms,
                display_latency_ms=disp_mean,
                display_latency_std_ms=disp_std,
                bandwidth_bytes_per_s=sum(_stream_bytes_per_s(e.selected) for e in registry),
            )
        )
    return BenchReport(config.scenario, config.clock, config.strategy.value, tuple(runs))


CSV_FIELDS = [
    "scenario",
    "cameras",
    "n_cams",
    "strategy",
    "clock",
    "fps_measured",
    "switch_latency_ms",
    "display_latency_ms",
    "display_latency_std_ms",
    "bandwidth_bytes_per_s",
]


def write_csv(report: BenchReport, path: str | Path) -> None:
    """One row per run; empty cell where a measurement does not apply."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for run in report.runs:
            writer.writerow(
                {
                    "scenario": report.scenario,
                    "cameras": "+".join(run.cameras),
                    "n_cams": run.n_cams,
                    "strategy": run.strategy,
                    "clock": report.clock,
                    "fps_measured": f"{run.fps_measured:.4f}",
                    "switch_latency_ms": "" if run.switch_latency_ms is None else f"{run.switch_latency_ms:.3f}",
                    "display_latency_ms": f"{run.display_latency_ms:.3f}",
                    "display_latency_std_ms": f"{run.display_latency_std_ms:.3f}",
                    "bandwidth_bytes_per_s": f"{run.bandwidth_bytes_per_s:.0f}",
                }
            )


def format_text(report: BenchReport) -> str:
    """Human-readable summary table."""
    lines = [
        f"scenario: {report.scenario}",
        f"clock: {report.clock}",
        f"strategy: {report.strategy}",
        f"runs: {len(report.runs)}",
        "",
        f"{'cameras':<28} {'fps':>8} {'switch ms':>10} {'display ms':>11} {'MB/s':>8}",
    ]
    for run in report.runs:
        switch = f"{run.switch_latency_ms:.1f}" if run.switch_latency_ms is not None else "n/a"
        lines.append(
            f"{'+'.join(run.cameras):<28} {run.fps_measured:>8.2f} {switch:>10} "
            f"{run.display_latency_ms:>11.1f} {run.bandwidth_bytes_per_s / MB:>8.1f}"
        )
    return "\n".join(lines) + "\n"


def bench_config_from_data(data: dict) -> BenchConfig:
    from .session import strategy_from_name

    try:
        cameras = tuple(camera_specs_from_data(data))
        fps = data.get("compositor_fps")
        display = data.get("display_latency") or {}
        if not isinstance(display, dict):
            raise ConfigError("'display_latency' must be a mapping")
        return BenchConfig(
            cameras=cameras,
            scenario=str(data.get("scenario", "bench")),
            strategy=strategy_from_name(str(data.get("strategy", "all-at-once"))),
            target_height=int(data.get("target_height", DEFAULT_TARGET_HEIGHT)),
            compositor_fps=float(fps) if fps is not None else None,
            frame_window=int(data.get("frame_window", 250)),
            burn_in_s=float(data.get("burn_in_s", 1.0)),
            capture=CaptureModel(float(data.get("capture_period_ms", 22.0))),
            iterations=int(display.get("iterations", 3)),
            events=int(display.get("events", 10)),
            subsets=str(data.get("subsets", "all")),
            seed=int(data.get("seed", 0)),
            clock=str(data.get("clock", "virtual")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_bench_config(path: str | Path) -> BenchConfig:
    return bench_config_from_data(load_mapping(path))
