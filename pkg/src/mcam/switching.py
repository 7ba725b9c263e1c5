"""View-switching state machine and the deterministic multiplexing pipeline.

Everything runs on a virtual microsecond clock so tests and benchmarks are
exactly reproducible.  The timing model:

- composed output instants sit on the grid start + floor(j * 1e6 / fps)
- each running source delivers frames into a single-slot latest-wins
  mailbox at its own cadence; an unread frame that gets overwritten is
  dropped on the floor, a stale frame is reused at the next output instant
- all-at-once: every registered source runs continuously; advancing the
  view changes only which mailboxes feed the canvas, effective at the next
  output instant
- one-at-a-time: exactly one source is scheduled at a time; advancing stops
  the current source, swaps in the next, and pays stop + start costs plus
  the incoming camera's warm-up before any frame can be composed again

Advance requests that arrive while a one-at-a-time swap is still in
progress queue up and run back to back in arrival order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .compositor import canvas_for_target_height, compose_primary, compose_tiled
from .frame import Frame, Resolution
from .sources import DEFAULT_TARGET_HEIGHT, PixelFormat, Registry, synth_frame

DEFAULT_STOP_COST_MS = 25.0
DEFAULT_START_COST_MS = 25.0


class ViewMode(Enum):
    PRIMARY = "primary"
    TILED = "tiled"


@dataclass(frozen=True)
class ViewState:
    """Either one camera full size or all cameras tiled."""

    mode: ViewMode
    primary_ordinal: int = 0

    def __post_init__(self) -> None:
        if self.mode is ViewMode.PRIMARY and self.primary_ordinal < 1:
            raise ValueError("primary view needs a camera ordinal >= 1")
        if self.mode is ViewMode.TILED and self.primary_ordinal != 0:
            raise ValueError("tiled view carries no primary ordinal")

    @classmethod
    def primary(cls, ordinal: int) -> "ViewState":
        return cls(ViewMode.PRIMARY, ordinal)

    @classmethod
    def tiled(cls) -> "ViewState":
        return cls(ViewMode.TILED)


class SwitchStrategy(Enum):
    ALL_AT_ONCE = "all-at-once"
    ONE_AT_A_TIME = "one-at-a-time"


@dataclass(frozen=True)
class SwitchOutcome:
    new_state: ViewState
    effective_at_us: int


def advance(state: ViewState, num_cams: int, tiled_enabled: bool = True) -> ViewState:
    """One press of the advance control: 1 -> 2 -> ... -> N -> tiled -> 1,
    skipping the tiled stop when it is disabled."""
    if num_cams < 1:
        raise ValueError("advance needs at least one camera")
    if state.mode is ViewMode.TILED:
        return ViewState.primary(1)
    if state.primary_ordinal > num_cams:
        raise ValueError(f"state {state} invalid for {num_cams} cameras")
    if state.primary_ordinal < num_cams:
        return ViewState.primary(state.primary_ordinal + 1)
    return ViewState.tiled() if tiled_enabled else ViewState.primary(1)


class _SourceSim:
    """Delivery schedule of one synthetic camera.

    While scheduled, the k-th frame of the current stint lands in the
    mailbox at stint_start + warm_up + floor(k * 1e6 / fps) + latency.
    The seq counter survives restarts so per-source seq stays monotone.
    """

    def __init__(self, entry, conversion_latency_us: int) -> None:
        self.entry = entry
        self.fps = entry.selected.fps
        self.warm_up_us = int(round(entry.spec.warm_up_ms * 1000))
        self.latency_us = int(round(entry.spec.latency_ms * 1000))
        if entry.selected.format is not PixelFormat.RGB24:
            self.latency_us += conversion_latency_us
        self.running = False
        self.stint_start_us = 0
        self.stint_k = 0
        self.produced = 0

    def schedule(self, stint_start_us: int) -> None:
        self.running = True
        self.stint_start_us = stint_start_us
        self.stint_k = 0

    def halt(self) -> None:
        self.running = False

    def next_delivery_time(self) -> int | None:
        if not self.running:
            return None
        offset = math.floor(self.stint_k * 1_000_000 / self.fps)
        return self.stint_start_us + self.warm_up_us + offset + self.latency_us

    def make_frame(self) -> Frame:
        frame = synth_frame(self.entry.ordinal, self.entry.selected, self.produced)
        self.produced += 1
        self.stint_k += 1
        return frame


class Pipeline:
    """Deterministic single-machine capture/compose simulation."""

    def __init__(
        self,
        registry: Registry,
        strategy: SwitchStrategy = SwitchStrategy.ALL_AT_ONCE,
        *,
        canvas: Resolution | None = None,
        compositor_fps: float | None = None,
        thumbnails_enabled: bool = True,
        tiled_enabled: bool = True,
        initial_state: ViewState | None = None,
        stop_cost_ms: float = DEFAULT_STOP_COST_MS,
        start_cost_ms: float = DEFAULT_START_COST_MS,
        format_conversion_latency_ms: float = 0.0,
    ) -> None:
        if len(registry) < 1:
            raise ValueError("pipeline needs a non-empty registry")
        self.registry = registry
        self.strategy = strategy
        self.canvas = canvas or canvas_for_target_height(DEFAULT_TARGET_HEIGHT)
        self.compositor_fps = compositor_fps or max(e.selected.fps for e in registry)
        if self.compositor_fps <= 0:
            raise ValueError("compositor fps must be positive")
        self.thumbnails_enabled = thumbnails_enabled
        # A single running source can never show the tiled arrangement.
        self.tiled_enabled = tiled_enabled and strategy is SwitchStrategy.ALL_AT_ONCE
        self.stop_cost_us = int(round(stop_cost_ms * 1000))
        self.start_cost_us = int(round(start_cost_ms * 1000))
        conv_us = int(round(format_conversion_latency_ms * 1000))
        self._conversion_latency_us = conv_us

        state = initial_state or ViewState.primary(1)
        if state.mode is ViewMode.TILED and not self.tiled_enabled:
            raise ValueError(f"tiled initial state invalid under {strategy.value}")
        if state.mode is ViewMode.PRIMARY and state.primary_ordinal > len(registry):
            raise ValueError(f"initial state {state} invalid for {len(registry)} cameras")
        self._state = state
        self._state_log: list[tuple[int, ViewState, ViewState]] = []

        self._sources = {e.ordinal: _SourceSim(e, conv_us) for e in registry}
        self._mailbox: dict[int, Frame] = {}
        self._mailbox_fresh: dict[int, bool] = {}
        self.delivered_counts = {e.ordinal: 0 for e in registry}
        self.dropped_counts = {e.ordinal: 0 for e in registry}

        self._started = False
        self._start_us = 0
        self._clock = 0
        self._out_idx = 0
        self._out_seq = 0
        self._last_frame: Frame | None = None
        self.frames_emitted = 0
        self._pending_out: list[Frame] = []

        self._busy_until: int | None = None
        self._queued = deque()
        self._sched_state = state
        self._sched_tail = 0

    # -- clock and boundary arithmetic ------------------------------------

    @property
    def clock_us(self) -> int:
        return self._clock

    @property
    def start_us(self) -> int:
        return self._start_us

    @property
    def state(self) -> ViewState:
        return self._state

    @property
    def last_frame(self) -> Frame | None:
        return self._last_frame

    @property
    def running(self) -> bool:
        return self._started

    def output_boundary(self, index: int) -> int:
        return self._start_us + math.floor(index * 1_000_000 / self.compositor_fps)

    def boundary_at_or_after(self, t_us: int) -> int:
        j = max(0, math.ceil((t_us - self._start_us) * self.compositor_fps / 1_000_000) - 1)
        while self.output_boundary(j) < t_us:
            j += 1
        while j > 0 and self.output_boundary(j - 1) >= t_us:
            j -= 1
        return self.output_boundary(j)

    def next_output_time(self) -> int | None:
        return self.output_boundary(self._out_idx) if self._started else None

    # -- lifecycle ---------------------------------------------------------

    def start(self, at_us: int = 0) -> None:
        if self._started:
            raise RuntimeError("pipeline already started")
        self._started = True
        self._start_us = at_us
        self._clock = at_us
        self._out_idx = 0
        for ordinal in self._required_sources(self._state) if self.strategy is SwitchStrategy.ONE_AT_A_TIME else self._sources:
            self._sources[ordinal].schedule(at_us)
        self._sched_state = self._state
        self._sched_tail = at_us

    def stop(self, at_us: int | None = None) -> None:
        if at_us is not None:
            self.tick_to(at_us)
        for sim in self._sources.values():
            sim.halt()
        self._mailbox.clear()
        self._mailbox_fresh.clear()
        self._busy_until = None
        self._queued.clear()
        self._started = False

    def reset(self, at_us: int, registry: Registry | None = None) -> None:
        """Stop everything, optionally swap the registry, and restart from
        the initial view.  Composed-output seq numbering continues."""
        self.stop(at_us)
        if registry is not None:
            if len(registry) < 1:
                raise ValueError("pipeline needs a non-empty registry")
            self.registry = registry
            self._sources = {
                e.ordinal: _SourceSim(e, self._conversion_latency_us) for e in registry
            }
            self.delivered_counts = {e.ordinal: 0 for e in registry}
            self.dropped_counts = {e.ordinal: 0 for e in registry}
        old_state = self._state
        self._state = ViewState.primary(1)
        if old_state != self._state:
            self._state_log.append((at_us, old_state, self._state))
        self._started = True
        self._start_us = at_us
        self._clock = at_us
        self._out_idx = 0
        for ordinal in self._required_sources(self._state) if self.strategy is SwitchStrategy.ONE_AT_A_TIME else self._sources:
            self._sources[ordinal].schedule(at_us)
        self._sched_state = self._state
        self._sched_tail = at_us

    # -- switching ---------------------------------------------------------

    def request_advance(self, at_us: int) -> SwitchOutcome:
        """Apply one advance at the given instant and predict when the first
        frame reflecting the new state will be composed."""
        if not self._started:
            raise RuntimeError("pipeline not started")
        if at_us < self._clock:
            raise ValueError(f"advance at {at_us} is in the pipeline's past ({self._clock})")
        self._pending_out.extend(self._drain_to(at_us))

        if self.strategy is SwitchStrategy.ALL_AT_ONCE:
            new = advance(self._state, len(self.registry), self.tiled_enabled)
            self._set_state(at_us, new)
            return SwitchOutcome(new, self._predict_all_at_once(new, at_us))

        busy = self._busy_until is not None and (at_us < self._busy_until or self._queued)
        new = advance(self._sched_state, len(self.registry), tiled_enabled=False)
        if busy:
            applied_at = self._sched_tail
            self._queued.append(new)
        else:
            applied_at = at_us
            self._begin_swap(at_us, new)
        incoming = self._sources[new.primary_ordinal]
        ready = (
            applied_at
            + self.stop_cost_us
            + self.start_cost_us
            + incoming.warm_up_us
            + incoming.latency_us
        )
        if busy:
            self._sched_state = new
            self._sched_tail = applied_at + self.stop_cost_us + self.start_cost_us
        return SwitchOutcome(new, self.boundary_at_or_after(ready))

    def drain_state_changes(self) -> list[tuple[int, ViewState, ViewState]]:
        log, self._state_log = self._state_log, []
        return log

    def _set_state(self, at_us: int, new: ViewState) -> None:
        if new != self._state:
            self._state_log.append((at_us, self._state, new))
        self._state = new
        if self.strategy is SwitchStrategy.ALL_AT_ONCE:
            self._sched_state = new

    def _begin_swap(self, at_us: int, new: ViewState) -> None:
        for ordinal, sim in self._sources.items():
            if sim.running:
                sim.halt()
                self._mailbox.pop(ordinal, None)
                self._mailbox_fresh.pop(ordinal, None)
        self._set_state(at_us, new)
        restart_at = at_us + self.stop_cost_us + self.start_cost_us
        self._sources[new.primary_ordinal].schedule(restart_at)
        self._busy_until = restart_at
        self._sched_state = new
        self._sched_tail = restart_at

    def _predict_all_at_once(self, new: ViewState, at_us: int) -> int:
        ready = at_us
        for ordinal in self._required_sources(new):
            if ordinal in self._mailbox:
                continue
            nd = self._sources[ordinal].next_delivery_time()
            if nd is not None:
                ready = max(ready, nd)
        eff = self.boundary_at_or_after(at_us + 1)
        return max(eff, self.boundary_at_or_after(ready))

    def _required_sources(self, state: ViewState) -> list[int]:
        if state.mode is ViewMode.TILED:
            return list(self._sources)
        return [state.primary_ordinal]

    # -- time stepping -----------------------------------------------------

    def tick_to(self, t_us: int) -> list[Frame]:
        """Advance the virtual clock, returning every frame composed on the
        way in emission order."""
        out, self._pending_out = self._pending_out, []
        out.extend(self._drain_to(t_us))
        return out

    def frame_tick(self, now_us: int) -> Frame | None:
        """Convenience single-step: the frame emitted exactly at now_us, if
        that instant is an output boundary with data to show."""
        frames = self.tick_to(now_us)
        if frames and self._start_us + frames[-1].timestamp_us == now_us:
            return frames[-1]
        return None

    def _drain_to(self, t_us: int) -> list[Frame]:
        if t_us < self._clock:
            raise ValueError(f"cannot tick backwards to {t_us} (clock {self._clock})")
        out: list[Frame] = []
        if not self._started:
            self._clock = t_us
            return out
        while True:
            when, what = self._next_event()
            if when is None or when > t_us:
                break
            self._clock = when
            if what == "deliver":
                self._deliver_due(when)
            elif what == "unqueue":
                self._busy_until = None
                if self._queued:
                    self._begin_swap(when, self._queued.popleft())
            else:
                self._emit(when, out)
                self._out_idx += 1
        self._clock = t_us
        return out

    def _next_event(self) -> tuple[int | None, str]:
        # Same-instant ordering: deliveries land before queued swaps run,
        # and both happen before the compositor samples the mailboxes.
        best: tuple[int, int, str] = (0, 0, "")
        found = False
        for sim in self._sources.values():
            nd = sim.next_delivery_time()
            if nd is not None and (not found or (nd, 0) < best[:2]):
                best, found = (nd, 0, "deliver"), True
        if self._busy_until is not None and (not found or (self._busy_until, 1) < best[:2]):
            best, found = (self._busy_until, 1, "unqueue"), True
        boundary = self.output_boundary(self._out_idx)
        if not found or (boundary, 2) < best[:2]:
            best, found = (boundary, 2, "emit"), True
        return (best[0], best[2]) if found else (None, "")

    def _deliver_due(self, now_us: int) -> None:
        for ordinal, sim in self._sources.items():
            while sim.next_delivery_time() == now_us:
                frame = sim.make_frame()
                if ordinal in self._mailbox and self._mailbox_fresh.get(ordinal):
                    self.dropped_counts[ordinal] += 1
                self._mailbox[ordinal] = frame
                self._mailbox_fresh[ordinal] = True
                self.delivered_counts[ordinal] += 1

    def _emit(self, now_us: int, out: list[Frame]) -> None:
        state = self._state
        required = self._required_sources(state)
        if any(o not in self._mailbox for o in required):
            return
        available = [(o, self._mailbox[o]) for o in sorted(self._mailbox)]
        ts = now_us - self._start_us
        if state.mode is ViewMode.TILED:
            frame = compose_tiled(available, self.canvas, seq=self._out_seq, timestamp_us=ts)
        else:
            frame = compose_primary(
                available,
                state.primary_ordinal,
                self.canvas,
                self.thumbnails_enabled,
                seq=self._out_seq,
                timestamp_us=ts,
            )
        for o, _ in available:
            self._mailbox_fresh[o] = False
        self._out_seq += 1
        self.frames_emitted += 1
        self._last_frame = frame
        out.append(frame)

    def camera_snapshots(self) -> dict[int, Frame]:
        """Latest frame delivered by each camera (for local preview UIs)."""
        return dict(self._mailbox)
