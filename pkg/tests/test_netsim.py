import json

import numpy as np
import pytest

from fogcrypt import (
    AdversaryAction,
    ConfigurationError,
    FogCryptSession,
    ScenarioConfig,
    forgery_bound,
)
from fogcrypt.netsim import (
    Adversary,
    _window_checks,
    available_scenarios,
    bitflip_census,
    forgery_trial,
    format_report,
    load_scenario,
    run_scenario,
)


def make_scenario(message_count, schedule=None, **kwargs):
    kwargs.setdefault("name", "test")
    kwargs.setdefault("seed", 1)
    return ScenarioConfig(message_count=message_count, schedule=schedule, **kwargs)


class TestRunScenario:
    def test_all_pass(self):
        report = run_scenario(make_scenario(100))
        assert (report.presented, report.delivered, report.rejected) == (100, 100, 0)
        assert report.undetected_modifications == 0
        assert report.desync_events == 0
        assert report.resync_recoveries == 0
        assert report.stale_devices == []

    def test_replay_every_message(self):
        report = run_scenario(make_scenario(50, {"default": {"replay_back": 0}}))
        assert (report.presented, report.delivered) == (100, 50)
        assert report.rejected == report.replays_rejected == 50
        assert report.undetected_modifications == 0

    @pytest.mark.slow
    def test_replay_thousand_messages(self):
        report = run_scenario(make_scenario(1000, {"default": {"replay_back": 0}}))
        assert report.replays_rejected == 1000
        assert report.delivered == 1000

    def test_replay_of_older_message(self):
        schedule = {"default": "pass", "overrides": {"6": {"replay": 2}}}
        report = run_scenario(make_scenario(8, schedule))
        assert (report.presented, report.delivered, report.replays_rejected) == (9, 8, 1)

    def test_three_lost_messages(self):
        schedule = {"default": "pass", "overrides": {"3": "drop", "4": "drop", "5": "drop"}}
        report = run_scenario(make_scenario(10, schedule, topology={"window": 16}))
        assert (report.desync_events, report.resync_recoveries, report.max_skipped) == (1, 1, 3)
        assert report.delivered == 7
        assert report.rejected == 0

    def test_loss_beyond_window_is_permanent(self):
        schedule = ["drop"] * 5 + ["pass"] * 5
        scenario = make_scenario(10, schedule, topology={"window": 4, "staleness_threshold": 3})
        report = run_scenario(scenario)
        assert (report.delivered, report.rejected) == (0, 5)
        assert report.desync_events == 1
        assert report.resync_recoveries == 0
        assert report.stale_devices == ["0000000000000001"]

    def test_window_bounds_in_report(self):
        report = run_scenario(make_scenario(1, topology={"window": 16}))
        assert report.forgery_bound == forgery_bound(16)
        assert report.window_exposure_bytes == 16 * 64

    def test_deterministic(self):
        schedule = {"default": "pass", "overrides": {"2": {"bitflip": [20, 3]}, "4": "drop", "7": {"replay_back": 2}}}
        first = run_scenario(make_scenario(12, schedule, seed=42))
        second = run_scenario(make_scenario(12, schedule, seed=42))
        assert first.to_json() == second.to_json()

    def test_injected_garbage_is_rejected(self):
        zero_id = "00" * 72
        known_id = "0000000000000001" + "00" * 64
        short = "0000000000000001"
        schedule = [{"inject": zero_id}, {"inject": known_id}, {"inject": short}, "pass"]
        report = run_scenario(make_scenario(4, schedule))
        assert (report.presented, report.delivered, report.rejected) == (7, 4, 3)
        assert report.undetected_modifications == 0
        assert report.replays_rejected == 0

    def test_several_devices(self):
        report = run_scenario(make_scenario(40, topology={"devices": 4, "window": 8}))
        assert report.delivered == 40
        assert report.stale_devices == []

    def test_single_counter_mode(self):
        schedule = {"default": "pass", "overrides": {"1": "drop"}}
        report = run_scenario(make_scenario(5, schedule, topology={"mode": "single"}))
        assert (report.delivered, report.resync_recoveries, report.max_skipped) == (4, 1, 1)

    def test_modified_payload_counts_as_undetected(self):
        schedule = {"default": "pass", "overrides": {"0": {"bitflip": [8, 0]}}}
        report = run_scenario(make_scenario(2, schedule, payload={"kind": "fixed", "hex": "00ff"}))
        assert report.delivered == 2
        assert report.undetected_modifications == 1

    def test_report_carries_no_payload_bytes(self):
        scenario = make_scenario(6, payload={"kind": "fixed", "hex": "68656c6c6f"})
        report = run_scenario(scenario)
        assert "68656c6c6f" not in report.to_json()
        assert "hello" not in report.to_json()
        assert "68656c6c6f" not in format_report(report)

    def test_progress_bar_does_not_change_report(self):
        quiet = run_scenario(make_scenario(10, seed=3))
        loud = run_scenario(make_scenario(10, seed=3), showprogress=True)
        assert quiet.to_json() == loud.to_json()


BUNDLED = {
    "replay": dict(presented=200, delivered=100, rejected=100, replays_rejected=100, undetected_modifications=0,
                   desync_events=0, resync_recoveries=0, max_skipped=0, stale_devices=[]),
    "desync": dict(presented=7, delivered=7, rejected=0, undetected_modifications=0, desync_events=1,
                   resync_recoveries=1, max_skipped=3, stale_devices=[]),
    "modification": dict(presented=12, delivered=9, rejected=3, undetected_modifications=1, desync_events=3,
                         resync_recoveries=3, max_skipped=1, stale_devices=[]),
    "dos": dict(presented=60, delivered=40, rejected=20, undetected_modifications=0, desync_events=1,
                resync_recoveries=0, max_skipped=0, stale_devices=["0000000000000002"]),
    "reorder": dict(presented=20, delivered=19, rejected=1, undetected_modifications=0, desync_events=0,
                    resync_recoveries=1, max_skipped=1, stale_devices=[]),
}


class TestBundledScenarios:
    def test_available(self):
        assert available_scenarios() == sorted(BUNDLED)

    @pytest.mark.parametrize("name", sorted(BUNDLED))
    def test_expected_report(self, name):
        report = run_scenario(load_scenario(name))
        assert report.name == name
        for field, expected in BUNDLED[name].items():
            assert report[field] == expected, field

    def test_load_by_path(self, tmp_path):
        path = tmp_path / "mine.json"
        path.write_text(json.dumps({"name": "mine", "seed": 2, "message_count": 3}))
        scenario = load_scenario(path)
        assert (scenario.name, scenario.message_count) == ("mine", 3)
        assert run_scenario(scenario).delivered == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_scenario(tmp_path / "missing.json")

    def test_report_json(self):
        report = json.loads(run_scenario(load_scenario("dos")).to_json())
        assert report["stale_devices"] == ["0000000000000002"]
        assert report["window_exposure_bytes"] == 1024 * 64

    def test_format_report(self):
        text = format_report(run_scenario(load_scenario("dos")))
        assert "delivered" in text
        assert "0000000000000002" in text
        assert format_report(run_scenario(load_scenario("desync"))).splitlines()[-1].split()[-1] == "-"


class TestScenarioValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(message_count=-1),
            dict(message_count=3, seed=-5),
            dict(message_count=3, schedule=["pass", "pass"]),
            dict(message_count=3, schedule={"default": "pass", "overrides": {"3": "drop"}}),
            dict(message_count=3, schedule={"default": "pass", "extra": 1}),
            dict(message_count=3, schedule={"default": "explode"}),
            dict(message_count=3, schedule="pass"),
            dict(message_count=3, topology={"devices": 0}),
            dict(message_count=3, topology={"window": 5_000_001}),
            dict(message_count=3, topology={"mode": "triple"}),
            dict(message_count=3, topology={"latency": 3}),
            dict(message_count=3, payload={"kind": "random", "min_len": 10, "max_len": 5}),
            dict(message_count=3, payload={"kind": "fixed", "hex": "00" * 56}),
            dict(message_count=3, payload={"kind": "fixed", "hex": "xyz"}),
            dict(message_count=3, payload={"kind": "zipf"}),
            dict(message_count=3, messages_count=100),
        ],
    )
    def test_rejected_before_sending(self, kwargs):
        with pytest.raises(ConfigurationError):
            run_scenario(ScenarioConfig(name="bad", **kwargs))

    def test_misspelled_key_in_file(self, tmp_path):
        path = tmp_path / "typo.json"
        path.write_text(json.dumps({"name": "typo", "seed": 1, "messages_count": 100}))
        with pytest.raises(ConfigurationError, match="messages_count"):
            run_scenario(load_scenario(path))

    def test_malformed_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError):
            load_scenario(path)


class TestAdversaryAction:
    @pytest.mark.parametrize(
        "obj, expected",
        [
            ("pass", AdversaryAction.pass_()),
            ("drop", AdversaryAction.drop()),
            ({"bitflip": [71, 7]}, AdversaryAction.bitflip(71, 7)),
            ({"replay": 0}, AdversaryAction.replay(0)),
            ({"replay_back": 2}, AdversaryAction.replay(3)),
            ({"inject": "00ff"}, AdversaryAction.inject(b"\x00\xff")),
            ({"reorder": 4}, AdversaryAction.reorder(4)),
        ],
    )
    def test_parse(self, obj, expected):
        assert AdversaryAction.parse(obj, position=5) == expected

    @pytest.mark.parametrize(
        "obj",
        [
            "explode",
            {"bitflip": [72, 0]},
            {"bitflip": [0, 8]},
            {"bitflip": [1]},
            {"replay": 6},
            {"replay_back": 6},
            {"replay": -1},
            {"inject": "zz"},
            {"inject": "00" * 1025},
            {"reorder": 0},
            {"drop": 1, "pass": 1},
            {"teleport": 1},
            3,
        ],
    )
    def test_parse_errors(self, obj):
        with pytest.raises(ConfigurationError, match="message 5"):
            AdversaryAction.parse(obj, position=5)

    def test_to_json(self):
        assert AdversaryAction.replay(3).to_json() == {"replay": 3}
        assert AdversaryAction.parse(AdversaryAction.inject(b"\x01").to_json()) == AdversaryAction.inject(b"\x01")


class TestAdversary:
    def test_reorder_holds_until_due(self):
        adversary = Adversary()
        assert adversary.intercept(0, b"a", AdversaryAction.reorder(2)) == []
        assert adversary.is_holding(0)
        assert adversary.release(1) == []
        released = adversary.release(2)
        assert [(d.wire, d.kind, d.index) for d in released] == [(b"a", "legit", 0)]
        assert not adversary.is_holding(0)

    def test_flush_returns_everything_held(self):
        adversary = Adversary()
        adversary.intercept(0, b"a", AdversaryAction.reorder(10))
        adversary.intercept(1, b"b", AdversaryAction.reorder(10))
        assert [d.wire for d in adversary.flush()] == [b"a", b"b"]
        assert adversary.flush() == []

    def test_transcript_keeps_dropped_wires(self):
        adversary = Adversary()
        adversary.intercept(0, b"a", AdversaryAction.drop())
        deliveries = adversary.intercept(1, b"b", AdversaryAction.replay(0))
        assert adversary.transcript == [b"a", b"b"]
        assert [(d.wire, d.kind) for d in deliveries] == [(b"b", "legit"), (b"a", "replay")]

    def test_bitflip(self):
        deliveries = Adversary().intercept(0, bytes(72), AdversaryAction.bitflip(70, 1))
        assert deliveries[0].wire[70] == 2
        assert deliveries[0].kind == "modified"


class TestBitflipCensus:
    def test_check_region_always_detected(self, sk):
        census = bitflip_census(sk, b"hello")
        assert census.detected.shape == (512,)
        assert census.per_byte[56:].tolist() == [8] * 8
        assert census.per_byte[:55].tolist() == [0] * 55
        assert census.detected_bits(55) == [6, 7]
        assert census.detected_count == 66

    @pytest.mark.parametrize("length", [0, 5, 23, 54, 55])
    def test_length_byte(self, sk, length):
        census = bitflip_census(sk, bytes(length), ctr=3)
        expected = [b for b in range(8) if length ^ (1 << b) > 55]
        assert census.detected_bits(55) == expected
        assert census.detected_count == 64 + len(expected)

    def test_other_hash(self, sk):
        assert bitflip_census(sk, b"x", hash_name="sha3_256").per_byte[56:].tolist() == [8] * 8


class TestForgeryTrial:
    def test_no_trials(self, sk):
        assert forgery_trial(sk, 0) == 0

    def test_small_run(self, sk):
        assert forgery_trial(sk, 20_000, window=16, seed=4, batch_size=4096) == 0

    def test_window_checks_contain_legitimate_check(self, sk):
        sender = FogCryptSession(sk)
        sender.encrypt_next(b"lost")
        sender.encrypt_next(b"lost")
        enc = sender.encrypt_next(b"kept")
        receiver = FogCryptSession(sk, resync_window=3)
        checks = _window_checks(sk, receiver)
        assert len(checks) == 4
        assert np.frombuffer(enc[56:], dtype=np.uint64)[0] in checks

    @pytest.mark.slow
    @pytest.mark.parametrize("window", [0, 1024])
    def test_million_random_blocks(self, sk, window):
        # expectation is about 5.5e-11 with the larger window
        assert forgery_trial(sk, 1_000_000, window=window, seed=window) == 0
