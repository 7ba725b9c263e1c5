"""Two-peer chat-session simulation over a delayed control link.

Each peer runs its own capture pipeline and, when the helper application
is installed, a filter/application endpoint pair wired through a local
message bus.  The link between the peers carries only control traffic
(wrapped app-to-app command lines and instant messages) with a fixed
one-way delay per direction; video never crosses the link, the remote
side of a real call would receive the composed stream out of band.

Everything is driven by one virtual microsecond clock, so a given config
always produces the same event log and the same frames.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .config import ConfigError, load_mapping
from .compositor import canvas_for_target_height
from .frame import Frame
from .protocol import (
    DEFAULT_CONNECTION_NAME,
    AppContext,
    Ap2ApMessage,
    Ap2FiltKind,
    Ap2FiltMessage,
    AttachState,
    BindState,
    ImSettings,
    Lifecycle,
    MessageBus,
    MalformedCommandError,
    MalformedMessageError,
    Received,
    Role,
    SendAp2Ap,
    SendAp2Filt,
    decode_ap2ap,
    encode_ap2ap,
    handle_ap2ap,
    handle_im,
    handshake_step,
    unwrap_host_command,
    wrap_host_command,
)
from .sources import CameraSpec, DEFAULT_TARGET_HEIGHT, NoUsableCamerasError, build_registry, camera_specs_from_data
from .switching import Pipeline, SwitchStrategy, ViewState

logger = logging.getLogger(__name__)

PEER_IDS = ("A", "B")
DEFAULT_LINK_DELAY_MS = 25.0


class NoFrameYetError(Exception):
    """The pipeline has not composed anything yet."""


class EventKind(Enum):
    MESSAGE_SENT = "message-sent"
    MESSAGE_DELIVERED = "message-delivered"
    STATE_CHANGED = "state-changed"
    FRAME_EMITTED = "frame-emitted"
    WARNING = "warning"


@dataclass(frozen=True)
class SessionEvent:
    t_us: int
    kind: EventKind
    peer: str
    detail: tuple[tuple[str, object], ...]

    def get(self, key: str, default=None):
        for k, v in self.detail:
            if k == key:
                return v
        return default


def _detail(**kwargs) -> tuple[tuple[str, object], ...]:
    return tuple(kwargs.items())


def view_label(state: ViewState) -> str:
    if state.primary_ordinal:
        return f"primary:{state.primary_ordinal}"
    return "tiled"


@dataclass(frozen=True)
class PeerConfig:
    cameras: tuple[CameraSpec, ...]
    strategy: SwitchStrategy = SwitchStrategy.ALL_AT_ONCE
    target_height: int = DEFAULT_TARGET_HEIGHT
    compositor_fps: float | None = None
    thumbnails_enabled: bool = True
    tiled_enabled: bool = True
    has_multicam_app: bool = True
    im_settings: ImSettings = ImSettings()
    virtual_whitelist: tuple[str, ...] = ()
    stop_cost_ms: float = 25.0
    start_cost_ms: float = 25.0
    format_conversion_latency_ms: float = 0.0


@dataclass(frozen=True)
class SessionConfig:
    peers: dict[str, PeerConfig]
    delay_a_to_b_ms: float = DEFAULT_LINK_DELAY_MS
    delay_b_to_a_ms: float = DEFAULT_LINK_DELAY_MS
    clock: str = "virtual"
    seed: int = 0


class _Link:
    """Two FIFO queues with a fixed one-way delay per direction."""

    def __init__(self, delay_us: dict[tuple[str, str], int]) -> None:
        self._delay_us = delay_us
        self._heap: list = []
        self._counter = itertools.count()

    def delay_us(self, sender: str, recipient: str) -> int:
        return self._delay_us[(sender, recipient)]

    def send(self, t_us: int, sender: str, recipient: str, kind: str, payload: str) -> int:
        deliver_at = t_us + self._delay_us[(sender, recipient)]
        heapq.heappush(self._heap, (deliver_at, next(self._counter), sender, recipient, kind, payload))
        return deliver_at

    def next_delivery_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop_due(self, t_us: int) -> list[tuple[str, str, str, str]]:
        due = []
        while self._heap and self._heap[0][0] <= t_us:
            _, _, sender, recipient, kind, payload = heapq.heappop(self._heap)
            due.append((sender, recipient, kind, payload))
        return due


class _PeerRuntime:
    def __init__(self, peer_id: str, config: PeerConfig, endpoint_base: int) -> None:
        self.id = peer_id
        self.config = config
        try:
            self.registry = build_registry(
                list(config.cameras), config.target_height, config.virtual_whitelist
            )
        except (NoUsableCamerasError, ValueError) as exc:
            raise ConfigError(f"peer {peer_id}: {exc}") from exc
        try:
            self.pipeline = Pipeline(
                self.registry,
                config.strategy,
                canvas=canvas_for_target_height(config.target_height),
                compositor_fps=config.compositor_fps,
                thumbnails_enabled=config.thumbnails_enabled,
                tiled_enabled=config.tiled_enabled,
                stop_cost_ms=config.stop_cost_ms,
                start_cost_ms=config.start_cost_ms,
                format_conversion_latency_ms=config.format_conversion_latency_ms,
            )
        except ValueError as exc:
            raise ConfigError(f"peer {peer_id}: {exc}") from exc
        self.has_app = config.has_multicam_app
        self.im_settings = config.im_settings
        self.bus = MessageBus()
        self.filter_ep = endpoint_base + 1
        self.app_ep = endpoint_base + 2
        self.attach = AttachState()
        self.bind = BindState()
        self.ctx = AppContext(filter_available=True, num_cams=len(self.registry))

    @property
    def stream_name(self) -> str:
        return f"{self.id.lower()}:1"


class Session:
    """Deterministic two-peer session; see create_session()."""

    def __init__(self, config: SessionConfig) -> None:
        if set(config.peers) != set(PEER_IDS):
            raise ConfigError(f"session needs exactly peers {PEER_IDS}, got {sorted(config.peers)}")
        if config.delay_a_to_b_ms < 0 or config.delay_b_to_a_ms < 0:
            raise ConfigError("link delays must be non-negative")
        if config.clock not in ("virtual", "wall"):
            raise ConfigError(f"unknown clock mode {config.clock!r}")
        self.config = config
        self._clock = 0
        self._events: list[SessionEvent] = []
        self._link = _Link(
            {
                ("A", "B"): int(round(config.delay_a_to_b_ms * 1000)),
                ("B", "A"): int(round(config.delay_b_to_a_ms * 1000)),
            }
        )
        self._peers = {
            pid: _PeerRuntime(pid, config.peers[pid], endpoint_base=100 * (i + 1))
            for i, pid in enumerate(PEER_IDS)
        }
        for prt in self._peers.values():
            prt.pipeline.start(0)
            if prt.has_app:
                self._wire_endpoints(prt)
        for prt in self._peers.values():
            if prt.has_app:
                self._run_local_handshake(prt)
        # Camera counts are announced as soon as the session is up, without
        # waiting to be asked.
        for prt in self._peers.values():
            if prt.has_app:
                self._send_ap2ap(prt.id, Ap2ApMessage.reply_num_cams(len(prt.registry)))
        # Compose the t=0 output instant now so step(0) is a true no-op.
        self._tick_pipelines(0)

    # -- protocol wiring ----------------------------------------------------

    def _wire_endpoints(self, prt: _PeerRuntime) -> None:
        def filter_handler(msg: Ap2FiltMessage, sender: int) -> None:
            if msg.kind is Ap2FiltKind.ADVANCE_CAMERA:
                prt.pipeline.request_advance(self._clock)
                self._collect_pipeline_events(prt)
                return
            if msg.kind is Ap2FiltKind.RESET:
                try:
                    registry = build_registry(
                        list(prt.config.cameras),
                        prt.config.target_height,
                        prt.config.virtual_whitelist,
                    )
                except NoUsableCamerasError as exc:
                    self._warn(prt.id, f"reset failed: {exc}")
                    return
                prt.registry = registry
                prt.ctx.num_cams = len(registry)
                prt.pipeline.reset(self._clock, registry)
                self._collect_pipeline_events(prt)
                _, emissions = handshake_step(
                    Role.FILTER,
                    prt.attach,
                    Lifecycle.FILTER_CREATED,
                    endpoint=prt.filter_ep,
                    num_cams=len(prt.registry),
                )
                for target, m in emissions:
                    prt.bus.send(target, m, sender=prt.filter_ep)
                return
            new_state, emissions = handshake_step(
                Role.FILTER,
                prt.attach,
                Received(msg, sender),
                endpoint=prt.filter_ep,
                num_cams=len(prt.registry),
            )
            prt.attach = new_state
            for target, m in emissions:
                prt.bus.send(target, m, sender=prt.filter_ep)

        def app_handler(msg: Ap2FiltMessage, sender: int) -> None:
            new_state, emissions = handshake_step(
                Role.APPLICATION, prt.bind, Received(msg, sender), endpoint=prt.app_ep
            )
            prt.bind = new_state
            for target, m in emissions:
                prt.bus.send(target, m, sender=prt.app_ep)

        prt.bus.register(prt.filter_ep, filter_handler)
        prt.bus.register(prt.app_ep, app_handler)

    def _run_local_handshake(self, prt: _PeerRuntime) -> None:
        _, emissions = handshake_step(
            Role.FILTER,
            prt.attach,
            Lifecycle.FILTER_CREATED,
            endpoint=prt.filter_ep,
            num_cams=len(prt.registry),
        )
        for target, m in emissions:
            prt.bus.send(target, m, sender=prt.filter_ep)
        _, emissions = handshake_step(
            Role.APPLICATION, prt.bind, Lifecycle.APP_STARTED, endpoint=prt.app_ep
        )
        for target, m in emissions:
            prt.bus.send(target, m, sender=prt.app_ep)

    # -- event plumbing -------------------------------------------------------

    @property
    def clock_us(self) -> int:
        return self._clock

    @property
    def events(self) -> list[SessionEvent]:
        return list(self._events)

    def peer_ids(self) -> tuple[str, ...]:
        return PEER_IDS

    def peer(self, peer_id: str) -> _PeerRuntime:
        try:
            return self._peers[peer_id]
        except KeyError:
            raise KeyError(f"unknown peer {peer_id!r}") from None

    def other(self, peer_id: str) -> str:
        self.peer(peer_id)
        return "B" if peer_id == "A" else "A"

    def _emit_event(self, t_us: int, kind: EventKind, peer: str, **detail) -> None:
        self._events.append(SessionEvent(t_us, kind, peer, _detail(**detail)))

    def _warn(self, peer: str, reason: str) -> None:
        logger.warning("peer %s: %s", peer, reason)
        self._emit_event(self._clock, EventKind.WARNING, peer, reason=reason)

    def _collect_pipeline_events(self, prt: _PeerRuntime) -> None:
        for t, old, new in prt.pipeline.drain_state_changes():
            self._emit_event(t, EventKind.STATE_CHANGED, prt.id, old=view_label(old), new=view_label(new))

    # -- time stepping ---------------------------------------------------------

    def step(self, dt_us: int) -> list[SessionEvent]:
        """Advance the whole session by dt microseconds, returning the events
        that happened, in order.  step(0) performs no work."""
        if dt_us < 0:
            raise ValueError("cannot step backwards")
        return self.step_to(self._clock + dt_us)

    def step_to(self, t_us: int) -> list[SessionEvent]:
        if t_us < self._clock:
            raise ValueError(f"cannot step back to {t_us} (clock {self._clock})")
        start = len(self._events)
        while True:
            nd = self._link.next_delivery_time()
            if nd is None or nd > t_us:
                break
            self._tick_pipelines(nd)
            self._clock = nd
            for sender, recipient, kind, payload in self._link.pop_due(nd):
                self._deliver(nd, sender, recipient, kind, payload)
        self._tick_pipelines(t_us)
        self._clock = t_us
        return self._events[start:]

    def _tick_pipelines(self, t_us: int) -> None:
        chunks = []
        for prt in self._peers.values():
            frames = prt.pipeline.tick_to(t_us)
            start_us = prt.pipeline.start_us
            for t, old, new in prt.pipeline.drain_state_changes():
                chunks.append((t, 0, EventKind.STATE_CHANGED, prt.id, _detail(old=view_label(old), new=view_label(new))))
            for f in frames:
                chunks.append((start_us + f.timestamp_us, 1, EventKind.FRAME_EMITTED, prt.id, _detail(seq=f.seq)))
        chunks.sort(key=lambda e: (e[0], e[1], e[3]))
        for t, _, kind, peer, detail in chunks:
            self._events.append(SessionEvent(t, kind, peer, detail))

    # -- control actions ---------------------------------------------------------

    def can_advance(self, actor: str, target: str) -> bool:
        prt = self.peer(actor)
        if target == "local":
            return prt.has_app and prt.im_settings.keystroke_switch_enabled
        if target == "remote":
            other = self._peers[self.other(actor)]
            return (prt.has_app and other.has_app) or other.im_settings.im_switch_enabled
        raise ValueError(f"target must be 'local' or 'remote', got {target!r}")

    def request_advance(self, actor: str, target: str) -> None:
        """Advance the actor's own view, or ask the other peer to advance.

        A remote advance goes over the app-to-app channel when both sides
        run the helper application, and falls back to the instant-message
        trick when the far side has no application but advances on IMs.
        """
        prt = self.peer(actor)
        if target == "local":
            if not self.can_advance(actor, "local"):
                self._warn(actor, "local advance unavailable: no application or keystroke switching disabled")
                return
            prt.bus.send(prt.filter_ep, Ap2FiltMessage.advance_camera(), sender=prt.app_ep)
            return
        if target != "remote":
            raise ValueError(f"target must be 'local' or 'remote', got {target!r}")
        other = self._peers[self.other(actor)]
        if prt.has_app and other.has_app:
            self._send_ap2ap(actor, Ap2ApMessage.advance_camera())
            return
        if other.im_settings.im_switch_enabled:
            self.deliver_im(actor, "")
            return
        self._warn(actor, f"remote advance unavailable: peer {other.id} has no control path")

    def _send_ap2ap(self, sender: str, msg: Ap2ApMessage) -> None:
        prt = self.peer(sender)
        recipient = self.other(sender)
        line = wrap_host_command(
            DEFAULT_CONNECTION_NAME, self._peers[recipient].stream_name, encode_ap2ap(msg)
        )
        deliver_at = self._link.send(self._clock, sender, recipient, "ap2ap", line)
        self._emit_event(
            self._clock,
            EventKind.MESSAGE_SENT,
            sender,
            direction=f"{sender}->{recipient}",
            channel="ap2ap",
            payload=line,
            deliver_at_us=deliver_at,
        )

    def deliver_im(self, sender: str, text: str) -> None:
        """Send a chat instant message from one peer to the other."""
        recipient = self.other(sender)
        deliver_at = self._link.send(self._clock, sender, recipient, "im", text)
        self._emit_event(
            self._clock,
            EventKind.MESSAGE_SENT,
            sender,
            direction=f"{sender}->{recipient}",
            channel="im",
            payload=text,
            deliver_at_us=deliver_at,
        )

    def _deliver(self, t_us: int, sender: str, recipient: str, kind: str, payload: str) -> None:
        prt = self._peers[recipient]
        handled = False
        if kind == "im":
            actions = handle_im(prt.im_settings, payload)
            handled = bool(actions)
            self._emit_event(
                t_us,
                EventKind.MESSAGE_DELIVERED,
                recipient,
                direction=f"{sender}->{recipient}",
                channel=kind,
                payload=payload,
                handled=handled,
            )
            for _ in actions:
                prt.pipeline.request_advance(t_us)
                self._collect_pipeline_events(prt)
            return
        if prt.has_app:
            try:
                _, _, inner = unwrap_host_command(payload)
                msg = decode_ap2ap(inner)
            except (MalformedCommandError, MalformedMessageError) as exc:
                self._emit_event(
                    t_us,
                    EventKind.MESSAGE_DELIVERED,
                    recipient,
                    direction=f"{sender}->{recipient}",
                    channel=kind,
                    payload=payload,
                    handled=False,
                )
                self._warn(recipient, f"dropped malformed control message: {exc}")
                return
            handled = True
        self._emit_event(
            t_us,
            EventKind.MESSAGE_DELIVERED,
            recipient,
            direction=f"{sender}->{recipient}",
            channel=kind,
            payload=payload,
            handled=handled,
        )
        if not handled:
            return
        for action in handle_ap2ap(msg, prt.ctx):
            if isinstance(action, SendAp2Ap):
                self._send_ap2ap(recipient, action.message)
            elif isinstance(action, SendAp2Filt):
                prt.bus.send(prt.filter_ep, action.message, sender=prt.app_ep)

    def request_reset(self, peer_id: str) -> None:
        """Ask a peer's application to reset its filter (rebuild the camera
        registry and restart the pipeline)."""
        prt = self.peer(peer_id)
        if not prt.has_app:
            self._warn(peer_id, "reset unavailable: no application")
            return
        prt.bus.send(prt.filter_ep, Ap2FiltMessage.reset(), sender=prt.app_ep)

    # -- state accessors -----------------------------------------------------------

    def state(self, peer_id: str) -> ViewState:
        return self.peer(peer_id).pipeline.state

    def current_view(self, peer_id: str) -> Frame:
        """Latest composed frame of the peer's pipeline (what its remote
        party would be watching)."""
        frame = self.peer(peer_id).pipeline.last_frame
        if frame is None:
            raise NoFrameYetError(f"peer {peer_id} has not composed a frame yet")
        return frame

    def camera_snapshots(self, peer_id: str) -> dict[int, Frame]:
        """Latest per-camera frames on a peer (local preview data)."""
        return self.peer(peer_id).pipeline.camera_snapshots()


_STRATEGIES = {
    "all-at-once": SwitchStrategy.ALL_AT_ONCE,
    "all": SwitchStrategy.ALL_AT_ONCE,
    "one-at-a-time": SwitchStrategy.ONE_AT_A_TIME,
    "one": SwitchStrategy.ONE_AT_A_TIME,
}


def strategy_from_name(name: str) -> SwitchStrategy:
    try:
        return _STRATEGIES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown strategy {name!r} (use all-at-once or one-at-a-time)") from None


def peer_config_from_data(data: object, peer_id: str) -> PeerConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"peer {peer_id} must be a mapping")
    try:
        cameras = tuple(camera_specs_from_data(data))
        fps = data.get("compositor_fps")
        return PeerConfig(
            cameras=cameras,
            strategy=strategy_from_name(str(data.get("strategy", "all-at-once"))),
            target_height=int(data.get("target_height", DEFAULT_TARGET_HEIGHT)),
            compositor_fps=float(fps) if fps is not None else None,
            thumbnails_enabled=bool(data.get("thumbnails_enabled", True)),
            tiled_enabled=bool(data.get("tiled_enabled", True)),
            has_multicam_app=bool(data.get("has_multicam_app", True)),
            im_settings=ImSettings(
                im_switch_enabled=bool(data.get("im_switch_enabled", True)),
                keystroke_switch_enabled=bool(data.get("keystroke_switch_enabled", True)),
            ),
            virtual_whitelist=tuple(data.get("virtual_whitelist", ()) or ()),
            stop_cost_ms=float(data.get("stop_cost_ms", 25.0)),
            start_cost_ms=float(data.get("start_cost_ms", 25.0)),
            format_conversion_latency_ms=float(data.get("format_conversion_latency_ms", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"peer {peer_id}: {exc}") from exc


def session_config_from_data(data: dict) -> SessionConfig:
    peers_data = data.get("peers")
    if not isinstance(peers_data, dict):
        raise ConfigError("session config needs a 'peers' mapping")
    peers = {pid: peer_config_from_data(pdata, pid) for pid, pdata in peers_data.items()}
    link = data.get("link") or {}
    if not isinstance(link, dict):
        raise ConfigError("'link' must be a mapping")
    try:
        return SessionConfig(
            peers=peers,
            delay_a_to_b_ms=float(link.get("a_to_b_ms", DEFAULT_LINK_DELAY_MS)),
            delay_b_to_a_ms=float(link.get("b_to_a_ms", DEFAULT_LINK_DELAY_MS)),
            clock=str(data.get("clock", "virtual")),
            seed=int(data.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_session_config(path: str | Path) -> SessionConfig:
    return session_config_from_data(load_mapping(path))


def create_session(config: SessionConfig) -> Session:
    """Build and start a two-peer session: pipelines running, filters
    attached to their applications, camera counts announced."""
    return Session(config)
