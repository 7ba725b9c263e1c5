import hashlib

import pytest

from conftest import make_cams
from mcam.config import ConfigError
from mcam.protocol import ImSettings
from mcam.session import (
    EventKind,
    NoFrameYetError,
    PeerConfig,
    SessionConfig,
    create_session,
    session_config_from_data,
    strategy_from_name,
    view_label,
)
from mcam.switching import SwitchStrategy, ViewState


def small_peer(n, **kwargs):
    return PeerConfig(cameras=make_cams(n), target_height=120, **kwargs)


def session(a=2, b=3, **kwargs):
    peer_a = kwargs.pop("peer_a", None) or small_peer(a)
    peer_b = kwargs.pop("peer_b", None) or small_peer(b)
    return create_session(SessionConfig(peers={"A": peer_a, "B": peer_b}, **kwargs))


def frame_digest(frame) -> str:
    return hashlib.sha256(frame.to_bytes()).hexdigest()


class TestConstruction:
    def test_needs_both_peers(self):
        with pytest.raises(ConfigError):
            create_session(SessionConfig(peers={"A": small_peer(1)}))
        with pytest.raises(ConfigError):
            create_session(
                SessionConfig(peers={"A": small_peer(1), "X": small_peer(1)})
            )

    def test_rejects_bad_link_and_clock(self):
        peers = {"A": small_peer(1), "B": small_peer(1)}
        with pytest.raises(ConfigError):
            create_session(SessionConfig(peers=peers, delay_a_to_b_ms=-1))
        with pytest.raises(ConfigError):
            create_session(SessionConfig(peers=peers, clock="sundial"))

    def test_rejects_unusable_cameras(self):
        bad = PeerConfig(cameras=())
        with pytest.raises(ConfigError):
            create_session(SessionConfig(peers={"A": bad, "B": small_peer(1)}))

    def test_camera_counts_announced_unprompted(self):
        s = session(2, 3)
        sent = [e for e in s.events if e.kind is EventKind.MESSAGE_SENT]
        payloads = [e.get("payload") for e in sent]
        assert any("AP2AP_REPLY_NUMCAMS 2" in p for p in payloads)
        assert any("AP2AP_REPLY_NUMCAMS 3" in p for p in payloads)
        s.step(50_000)
        assert s.peer("A").ctx.remote_num_cams == 3
        assert s.peer("B").ctx.remote_num_cams == 2

    def test_handshake_attaches_locally(self):
        s = session(1, 1)
        for pid in ("A", "B"):
            prt = s.peer(pid)
            assert prt.attach.attached
            assert prt.bind.bound

    def test_wire_payloads_are_wrapped_commands(self):
        s = session(1, 1)
        payload = next(
            e.get("payload") for e in s.events if e.kind is EventKind.MESSAGE_SENT
        )
        assert payload.startswith("ALTER APPLICATION multicam WRITE ")


class TestStepping:
    def test_step_zero_is_noop(self):
        s = session()
        assert s.step(0) == []
        s.step(100_000)
        assert s.step(0) == []

    def test_step_backwards_rejected(self):
        s = session()
        s.step(10_000)
        with pytest.raises(ValueError):
            s.step_to(5_000)
        with pytest.raises(ValueError):
            s.step(-1)

    def test_event_timestamps_monotone(self):
        s = session()
        s.request_advance("A", "remote")
        s.step(300_000)
        s.request_advance("B", "local")
        s.step(300_000)
        times = [e.t_us for e in s.events]
        assert times == sorted(times)

    def test_frames_logged_at_cadence(self):
        s = session(1, 1)
        s.step(100_000)
        for pid in ("A", "B"):
            logged = [
                e.t_us
                for e in s.events
                if e.kind is EventKind.FRAME_EMITTED and e.peer == pid
            ]
            assert logged == [0, 33_333, 66_666, 100_000]

    def test_current_view_and_no_frame_yet(self):
        warm = PeerConfig(cameras=make_cams(1, warm_up_ms=100), target_height=120)
        s = session(peer_a=warm, peer_b=small_peer(1))
        with pytest.raises(NoFrameYetError):
            s.current_view("A")
        s.current_view("B")  # composed at t=0
        s.step(150_000)
        assert s.current_view("A").resolution.height == 120


class TestAdvances:
    def test_local_advance_applies_directly(self):
        s = session(3, 1)
        s.request_advance("A", "local")
        assert s.state("A") == ViewState.primary(2)
        assert s.state("B") == ViewState.primary(1)

    def test_remote_advance_crosses_link_once(self):
        s = session(2, 3)
        s.request_advance("A", "remote")
        assert s.state("B") == ViewState.primary(1)  # nothing until delivery
        s.step(24_999)
        assert s.state("B") == ViewState.primary(1)
        s.step(1)
        assert s.state("B") == ViewState.primary(2)
        assert s.state("A") == ViewState.primary(1)

    def test_remote_advance_state_change_logged_at_delivery(self):
        s = session(2, 3)
        s.request_advance("A", "remote")
        s.step(100_000)
        changes = [
            e for e in s.events if e.kind is EventKind.STATE_CHANGED and e.peer == "B"
        ]
        assert len(changes) == 1
        assert changes[0].t_us == 25_000
        assert changes[0].get("old") == "primary:1"
        assert changes[0].get("new") == "primary:2"

    def test_asymmetric_link_delays(self):
        s = session(2, 2, delay_a_to_b_ms=10.0, delay_b_to_a_ms=80.0)
        s.request_advance("A", "remote")
        s.request_advance("B", "remote")
        s.step(200_000)
        b_change = next(
            e for e in s.events if e.kind is EventKind.STATE_CHANGED and e.peer == "B"
        )
        a_change = next(
            e for e in s.events if e.kind is EventKind.STATE_CHANGED and e.peer == "A"
        )
        assert b_change.t_us == 10_000
        assert a_change.t_us == 80_000

    def test_im_advances_exactly_once_per_message(self):
        s = session(3, 3)
        s.deliver_im("A", "anything at all")
        s.deliver_im("A", "")
        s.step(200_000)
        changes = [
            e for e in s.events if e.kind is EventKind.STATE_CHANGED and e.peer == "B"
        ]
        assert [c.get("new") for c in changes] == ["primary:2", "primary:3"]

    def test_im_switching_can_be_disabled(self):
        quiet = small_peer(2, im_settings=ImSettings(im_switch_enabled=False))
        s = session(peer_a=small_peer(2), peer_b=quiet)
        s.deliver_im("A", "try to switch")
        s.step(100_000)
        assert s.state("B") == ViewState.primary(1)
        delivered = [e for e in s.events if e.kind is EventKind.MESSAGE_DELIVERED]
        assert delivered and all(e.get("handled") is False for e in delivered
                                 if e.get("channel") == "im")

    def test_remote_advance_falls_back_to_im(self):
        no_app = small_peer(2, has_multicam_app=False)
        s = session(peer_a=small_peer(2), peer_b=no_app)
        assert s.can_advance("A", "remote")
        s.request_advance("A", "remote")
        s.step(100_000)
        assert s.state("B") == ViewState.primary(2)
        im_sends = [
            e
            for e in s.events
            if e.kind is EventKind.MESSAGE_SENT and e.get("channel") == "im"
        ]
        assert len(im_sends) == 1

    def test_no_control_path_warns(self):
        dark = small_peer(
            2,
            has_multicam_app=False,
            im_settings=ImSettings(im_switch_enabled=False),
        )
        s = session(peer_a=small_peer(2), peer_b=dark)
        assert not s.can_advance("A", "remote")
        s.request_advance("A", "remote")
        s.step(100_000)
        assert s.state("B") == ViewState.primary(1)
        assert any(e.kind is EventKind.WARNING for e in s.events)

    def test_local_advance_without_app_warns(self):
        no_app = small_peer(2, has_multicam_app=False)
        s = session(peer_a=no_app, peer_b=small_peer(2))
        assert not s.can_advance("A", "local")
        s.request_advance("A", "local")
        assert s.state("A") == ViewState.primary(1)
        assert any(e.kind is EventKind.WARNING for e in s.events)

    def test_advance_queues_during_one_at_a_time_swap(self):
        slow = PeerConfig(
            cameras=make_cams(3, warm_up_ms=300),
            strategy=SwitchStrategy.ONE_AT_A_TIME,
            target_height=120,
        )
        s = session(peer_a=small_peer(1), peer_b=slow)
        s.request_advance("A", "remote")
        s.step(30_000)  # delivered at 25ms, swap to cam 2 under way
        s.request_advance("A", "remote")
        s.step(1_000_000)
        changes = [
            e.get("new")
            for e in s.events
            if e.kind is EventKind.STATE_CHANGED and e.peer == "B"
        ]
        assert changes == ["primary:2", "primary:3"]
        assert s.state("B") == ViewState.primary(3)


class TestDeterminism:
    def run_scripted(self):
        s = session(2, 3, seed=7)
        s.request_advance("A", "remote")
        s.step(40_000)
        s.request_advance("B", "local")
        s.deliver_im("B", "hi")
        s.step(500_000)
        log = [(e.t_us, e.kind.value, e.peer, e.detail) for e in s.events]
        digest = frame_digest(s.current_view("A")) + frame_digest(s.current_view("B"))
        return log, digest

    def test_identical_runs_identical_logs_and_frames(self):
        log1, d1 = self.run_scripted()
        log2, d2 = self.run_scripted()
        assert log1 == log2
        assert d1 == d2


class TestReset:
    def test_reset_restores_first_camera_and_reannounces(self):
        s = session(3, 1)
        s.request_advance("A", "local")
        s.step(100_000)
        assert s.state("A") == ViewState.primary(2)
        s.request_reset("A")
        assert s.state("A") == ViewState.primary(1)
        s.step(100_000)
        assert s.current_view("A").pixel(0, 0)[0] == 1


class TestConfigParsing:
    def test_strategy_names(self):
        assert strategy_from_name("all") is SwitchStrategy.ALL_AT_ONCE
        assert strategy_from_name("one-at-a-time") is SwitchStrategy.ONE_AT_A_TIME
        with pytest.raises(ConfigError):
            strategy_from_name("both")

    def test_session_config_from_data(self):
        data = {
            "peers": {
                "A": {
                    "cameras": [
                        {
                            "name": "cam",
                            "capabilities": [{"width": 160, "height": 120}],
                        }
                    ],
                    "strategy": "one",
                    "target_height": 120,
                },
                "B": {
                    "cameras": [
                        {
                            "name": "cam",
                            "capabilities": [{"width": 160, "height": 120}],
                        }
                    ],
                    "im_switch_enabled": False,
                },
            },
            "link": {"a_to_b_ms": 10, "b_to_a_ms": 20},
            "clock": "virtual",
            "seed": 3,
        }
        cfg = session_config_from_data(data)
        assert cfg.peers["A"].strategy is SwitchStrategy.ONE_AT_A_TIME
        assert not cfg.peers["B"].im_settings.im_switch_enabled
        assert cfg.delay_a_to_b_ms == 10
        assert cfg.seed == 3
        create_session(cfg)  # must construct cleanly

    def test_session_config_rejects_garbage(self):
        with pytest.raises(ConfigError):
            session_config_from_data({})
        with pytest.raises(ConfigError):
            session_config_from_data({"peers": {"A": 3, "B": 4}})


def test_view_label():
    assert view_label(ViewState.primary(2)) == "primary:2"
    assert view_label(ViewState.tiled()) == "tiled"
