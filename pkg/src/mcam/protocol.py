"""Wire codecs and handshake logic for the two control protocols.

Two distinct channels keep the camera filter controllable:

- app-to-app: UTF-8 command strings relayed between the two peers'
  helper applications through the host chat client's application
  channel, each wrapped in a host command line for transport
- app-to-filter: locally registered broadcast messages between the
  helper application and the virtual-camera filter on one machine,
  carried as (registration name, param_a, param_b) records

Every encoding here is part of the external contract and must stay
byte-for-byte stable.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from enum import Enum

PROTOCOL_VERSION = "1.1"
APP_VERSION = "0.1.0.8"

DEFAULT_CONNECTION_NAME = "multicam"


class MalformedMessageError(Exception):
    """App-to-app payload does not match any known command shape."""


class MalformedCommandError(Exception):
    """Host command line is not a well-formed application write."""


class UnknownRegistrationNameError(Exception):
    """App-to-filter record uses a registration name we never registered."""


# -- app-to-app commands ---------------------------------------------------

class Ap2ApKind(Enum):
    PING = "AP2AP_PING"
    PONG = "AP2AP_PONG"
    ASK_NUMCAMS = "AP2AP_ASK_NUMCAMS"
    REPLY_NUMCAMS = "AP2AP_REPLY_NUMCAMS"
    ASK_VERSION = "AP2AP_ASK_VERSION"
    REPLY_VERSION = "AP2AP_REPLY_VERSION"
    ADVANCE_CAMERA = "AP2AP_ADVANCE_CAMERA"


_BARE_KINDS = frozenset(
    {
        Ap2ApKind.PING,
        Ap2ApKind.PONG,
        Ap2ApKind.ASK_NUMCAMS,
        Ap2ApKind.ASK_VERSION,
        Ap2ApKind.ADVANCE_CAMERA,
    }
)

_NUMCAMS_RE = re.compile(r"[0-9]+")
_VERSION2_RE = re.compile(r"[0-9]+\.[0-9]+")
_VERSION4_RE = re.compile(r"[0-9]+\.[0-9]+\.[0-9]+\.[0-9]+")


@dataclass(frozen=True)
class Ap2ApMessage:
    kind: Ap2ApKind
    num_cams: int | None = None
    protocol_version: str | None = None
    app_version: str | None = None

    def __post_init__(self) -> None:
        if self.kind is Ap2ApKind.REPLY_NUMCAMS:
            if self.num_cams is None or self.num_cams < 0:
                raise ValueError("REPLY_NUMCAMS carries a non-negative camera count")
        elif self.kind is Ap2ApKind.REPLY_VERSION:
            if self.protocol_version is None or not _VERSION2_RE.fullmatch(self.protocol_version):
                raise ValueError(f"bad protocol version {self.protocol_version!r}")
            if self.app_version is None or not _VERSION4_RE.fullmatch(self.app_version):
                raise ValueError(f"bad application version {self.app_version!r}")
        else:
            if self.num_cams is not None or self.protocol_version is not None or self.app_version is not None:
                raise ValueError(f"{self.kind.name} carries no payload")

    @classmethod
    def ping(cls) -> "Ap2ApMessage":
        return cls(Ap2ApKind.PING)

    @classmethod
    def pong(cls) -> "Ap2ApMessage":
        return cls(Ap2ApKind.PONG)

    @classmethod
    def ask_num_cams(cls) -> "Ap2ApMessage":
        return cls(Ap2ApKind.ASK_NUMCAMS)

    @classmethod
    def reply_num_cams(cls, n: int) -> "Ap2ApMessage":
        return cls(Ap2ApKind.REPLY_NUMCAMS, num_cams=n)

    @classmethod
    def ask_version(cls) -> "Ap2ApMessage":
        return cls(Ap2ApKind.ASK_VERSION)

    @classmethod
    def reply_version(
        cls, protocol: str = PROTOCOL_VERSION, app: str = APP_VERSION
    ) -> "Ap2ApMessage":
        return cls(Ap2ApKind.REPLY_VERSION, protocol_version=protocol, app_version=app)

    @classmethod
    def advance_camera(cls) -> "Ap2ApMessage":
        return cls(Ap2ApKind.ADVANCE_CAMERA)


def encode_ap2ap(msg: Ap2ApMessage) -> str:
    if msg.kind is Ap2ApKind.REPLY_NUMCAMS:
        return f"{msg.kind.value} {msg.num_cams}"
    if msg.kind is Ap2ApKind.REPLY_VERSION:
        return f"{msg.kind.value} {msg.protocol_version} {msg.app_version}"
    return msg.kind.value


def decode_ap2ap(payload: str) -> Ap2ApMessage:
    for kind in _BARE_KINDS:
        if payload == kind.value:
            return Ap2ApMessage(kind)
    head, sep, rest = payload.partition(" ")
    if head == Ap2ApKind.REPLY_NUMCAMS.value and sep:
        if not _NUMCAMS_RE.fullmatch(rest):
            raise MalformedMessageError(f"bad camera count in {payload!r}")
        return Ap2ApMessage.reply_num_cams(int(rest))
    if head == Ap2ApKind.REPLY_VERSION.value and sep:
        parts = rest.split(" ")
        if len(parts) != 2 or not _VERSION2_RE.fullmatch(parts[0]) or not _VERSION4_RE.fullmatch(parts[1]):
            raise MalformedMessageError(f"bad version payload in {payload!r}")
        return Ap2ApMessage.reply_version(parts[0], parts[1])
    raise MalformedMessageError(f"unrecognized app-to-app payload {payload!r}")


# -- host chat transport wrapper --------------------------------------------

def wrap_host_command(connection: str, stream: str, payload: str) -> str:
    """Host client command that writes a payload to an application stream."""
    if not connection or " " in connection:
        raise ValueError(f"bad connection name {connection!r}")
    if not stream or " " in stream:
        raise ValueError(f"bad stream name {stream!r}")
    return f"ALTER APPLICATION {connection} WRITE {stream} {payload}"


def unwrap_host_command(line: str) -> tuple[str, str, str]:
    """Split a host write command into (connection, stream, payload).

    The payload is the verbatim remainder after the fourth space-delimited
    field, so embedded spaces survive the round trip.
    """
    parts = line.split(" ", 5)
    if len(parts) != 6 or parts[0] != "ALTER" or parts[1] != "APPLICATION" or parts[3] != "WRITE":
        raise MalformedCommandError(f"not an application write: {line!r}")
    connection, stream, payload = parts[2], parts[4], parts[5]
    if not connection or not stream:
        raise MalformedCommandError(f"empty connection or stream in {line!r}")
    return connection, stream, payload


# -- app-to-filter records ---------------------------------------------------

class Ap2FiltKind(Enum):
    DISCOVER = "Discover"
    ATTACH = "Attach"
    ADVANCE_CAMERA = "Advance"
    KICK = "Kick"
    PING = "Ping"
    PONG = "Pong"
    RESET = "Reset"


REGISTRATION_GUID = "4AD2E57A-AF70-42AE-9A64-BC88F995B9C8"

REGISTRATION_NAMES: dict[Ap2FiltKind, str] = {
    kind: f"Multicam{kind.value}{REGISTRATION_GUID}" for kind in Ap2FiltKind
}

_KIND_BY_NAME = {name: kind for kind, name in REGISTRATION_NAMES.items()}

_PARAMETERIZED = frozenset({Ap2FiltKind.DISCOVER, Ap2FiltKind.ATTACH})


@dataclass(frozen=True)
class Ap2FiltMessage:
    """One registered-message record: Discover carries (filter endpoint,
    camera count), Attach carries (application endpoint, 0), the rest
    carry nothing."""

    kind: Ap2FiltKind
    param_a: int = 0
    param_b: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _PARAMETERIZED and (self.param_a or self.param_b):
            raise ValueError(f"{self.kind.name} carries no parameters")
        if self.kind is Ap2FiltKind.ATTACH and self.param_b:
            raise ValueError("ATTACH uses only param_a")

    @classmethod
    def discover(cls, filter_endpoint: int, num_cams: int) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.DISCOVER, filter_endpoint, num_cams)

    @classmethod
    def attach(cls, app_endpoint: int) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.ATTACH, app_endpoint)

    @classmethod
    def kick(cls) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.KICK)

    @classmethod
    def ping(cls) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.PING)

    @classmethod
    def pong(cls) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.PONG)

    @classmethod
    def advance_camera(cls) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.ADVANCE_CAMERA)

    @classmethod
    def reset(cls) -> "Ap2FiltMessage":
        return cls(Ap2FiltKind.RESET)

    @property
    def filter_endpoint(self) -> int:
        if self.kind is not Ap2FiltKind.DISCOVER:
            raise AttributeError("filter_endpoint only exists on DISCOVER")
        return self.param_a

    @property
    def num_cams(self) -> int:
        if self.kind is not Ap2FiltKind.DISCOVER:
            raise AttributeError("num_cams only exists on DISCOVER")
        return self.param_b

    @property
    def app_endpoint(self) -> int:
        if self.kind is not Ap2FiltKind.ATTACH:
            raise AttributeError("app_endpoint only exists on ATTACH")
        return self.param_a


def encode_ap2filt(msg: Ap2FiltMessage) -> tuple[str, int, int]:
    return REGISTRATION_NAMES[msg.kind], msg.param_a, msg.param_b


def decode_ap2filt(name: str, param_a: int = 0, param_b: int = 0) -> Ap2FiltMessage:
    kind = _KIND_BY_NAME.get(name)
    if kind is None:
        raise UnknownRegistrationNameError(f"unknown registration name {name!r}")
    if kind not in _PARAMETERIZED:
        # Senders may pass anything here; receivers never look at it.
        return Ap2FiltMessage(kind)
    if kind is Ap2FiltKind.ATTACH:
        return Ap2FiltMessage(kind, param_a)
    return Ap2FiltMessage(kind, param_a, param_b)


# -- attach handshake --------------------------------------------------------

BROADCAST = -1


class Role(Enum):
    FILTER = "filter"
    APPLICATION = "application"


class Lifecycle(Enum):
    FILTER_CREATED = "filter-created"
    APP_STARTED = "app-started"


@dataclass(frozen=True)
class Received:
    msg: Ap2FiltMessage
    sender: int = 0


@dataclass(frozen=True)
class AttachState:
    """Filter side: which application endpoint, if any, has claimed us."""

    app_endpoint: int | None = None

    @property
    def attached(self) -> bool:
        return self.app_endpoint is not None


@dataclass(frozen=True)
class BindState:
    """Application side: which filter endpoint, if any, we are driving."""

    filter_endpoint: int | None = None

    @property
    def bound(self) -> bool:
        return self.filter_endpoint is not None


Emission = tuple[int, Ap2FiltMessage]


def handshake_step(
    role: Role,
    state: AttachState | BindState,
    event: Lifecycle | Received,
    *,
    endpoint: int,
    num_cams: int = 0,
) -> tuple[AttachState | BindState, list[Emission]]:
    """One step of the discover/attach dance.

    Both lifecycle orders converge: a freshly created filter broadcasts
    Discover, a freshly started application broadcasts Kick (which makes
    every filter re-Discover), and a Discover is always answered with a
    direct Attach.  The last Attach a filter sees wins.
    """
    if role is Role.FILTER:
        assert isinstance(state, AttachState)
        if event is Lifecycle.FILTER_CREATED:
            return state, [(BROADCAST, Ap2FiltMessage.discover(endpoint, num_cams))]
        if isinstance(event, Received):
            msg = event.msg
            if msg.kind is Ap2FiltKind.KICK:
                return state, [(BROADCAST, Ap2FiltMessage.discover(endpoint, num_cams))]
            if msg.kind is Ap2FiltKind.ATTACH:
                return AttachState(msg.app_endpoint), []
            if msg.kind is Ap2FiltKind.PING:
                target = event.sender or state.app_endpoint
                return state, [(target, Ap2FiltMessage.pong())] if target else []
        return state, []

    assert isinstance(state, BindState)
    if event is Lifecycle.APP_STARTED:
        return state, [(BROADCAST, Ap2FiltMessage.kick())]
    if isinstance(event, Received) and event.msg.kind is Ap2FiltKind.DISCOVER:
        filter_ep = event.msg.filter_endpoint
        return BindState(filter_ep), [(filter_ep, Ap2FiltMessage.attach(endpoint))]
    return state, []


class MessageBus:
    """In-process stand-in for system-wide registered messages.

    Deliveries are serialized through one FIFO queue, so a handler that
    sends while handling never sees nested dispatch.
    """

    def __init__(self) -> None:
        self._handlers: dict[int, object] = {}
        self._queue: deque = deque()
        self._dispatching = False

    def register(self, endpoint: int, handler) -> None:
        if endpoint in self._handlers:
            raise ValueError(f"endpoint {endpoint} already registered")
        if endpoint == BROADCAST:
            raise ValueError("cannot register the broadcast address")
        self._handlers[endpoint] = handler

    def unregister(self, endpoint: int) -> None:
        self._handlers.pop(endpoint, None)

    def send(self, target: int, msg: Ap2FiltMessage, sender: int = 0) -> None:
        self._queue.append((target, msg, sender))
        self._dispatch()

    def broadcast(self, msg: Ap2FiltMessage, sender: int = 0) -> None:
        self.send(BROADCAST, msg, sender)

    def _dispatch(self) -> None:
        if self._dispatching:
            return
        self._dispatching = True
        try:
            while self._queue:
                target, msg, sender = self._queue.popleft()
                if target == BROADCAST:
                    targets = [e for e in list(self._handlers) if e != sender]
                else:
                    targets = [target] if target in self._handlers else []
                for endpoint in targets:
                    handler = self._handlers.get(endpoint)
                    if handler is not None:
                        handler(msg, sender)
        finally:
            self._dispatching = False


# -- instant-message switching ------------------------------------------------

@dataclass(frozen=True)
class ImSettings:
    im_switch_enabled: bool = True
    keystroke_switch_enabled: bool = True


@dataclass(frozen=True)
class AdvanceLocalCamera:
    """Side-effect marker: the receiving side should advance its own view."""


def handle_im(settings: ImSettings, im_text: str) -> list[AdvanceLocalCamera]:
    """Any received instant message, even an empty one, advances the local
    camera when the IM switch is enabled.  The text itself is never parsed."""
    if settings.im_switch_enabled:
        return [AdvanceLocalCamera()]
    return []


# -- application-side command handling ----------------------------------------

@dataclass
class AppContext:
    """Mutable per-application protocol state."""

    filter_available: bool = True
    num_cams: int = 0
    protocol_version: str = PROTOCOL_VERSION
    app_version: str = APP_VERSION
    remote_num_cams: int | None = None
    remote_protocol_version: str | None = None
    remote_app_version: str | None = None
    pongs_received: int = 0


@dataclass(frozen=True)
class SendAp2Ap:
    message: Ap2ApMessage


@dataclass(frozen=True)
class SendAp2Filt:
    message: Ap2FiltMessage


def handle_ap2ap(msg: Ap2ApMessage, ctx: AppContext) -> list[SendAp2Ap | SendAp2Filt]:
    """React to one app-to-app command: requests produce replies, replies
    are recorded, and a remote advance is forwarded to the local filter."""
    kind = msg.kind
    if kind is Ap2ApKind.PING:
        return [SendAp2Ap(Ap2ApMessage.pong())]
    if kind is Ap2ApKind.PONG:
        ctx.pongs_received += 1
        return []
    if kind is Ap2ApKind.ASK_NUMCAMS:
        n = ctx.num_cams if ctx.filter_available else 0
        return [SendAp2Ap(Ap2ApMessage.reply_num_cams(n))]
    if kind is Ap2ApKind.REPLY_NUMCAMS:
        ctx.remote_num_cams = msg.num_cams
        return []
    if kind is Ap2ApKind.ASK_VERSION:
        return [SendAp2Ap(Ap2ApMessage.reply_version(ctx.protocol_version, ctx.app_version))]
    if kind is Ap2ApKind.REPLY_VERSION:
        ctx.remote_protocol_version = msg.protocol_version
        ctx.remote_app_version = msg.app_version
        return []
    if kind is Ap2ApKind.ADVANCE_CAMERA:
        if ctx.filter_available:
            return [SendAp2Filt(Ap2FiltMessage.advance_camera())]
        return []
    return []
