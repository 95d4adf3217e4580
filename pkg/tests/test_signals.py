"""Signal model and trace serialization tests."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exobench import signals
from exobench.signals import (
    EmgFrame,
    IntentLabel,
    LoadCellSample,
    ShoulderPosture,
    SignalProfile,
    SignalTrace,
)


class TestFrames:
    def test_emg_frame_requires_eight_channels(self):
        with pytest.raises(ValueError, match="8 channels"):
            EmgFrame(t=0.0, channels=(0.1, 0.2))

    def test_emg_frame_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="finite"):
            EmgFrame(t=0.0, channels=(1.5,) + (0.1,) * 7)

    def test_emg_frame_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            EmgFrame(t=0.0, channels=(math.nan,) + (0.1,) * 7)

    def test_load_sample_rejects_negative_tension(self):
        with pytest.raises(ValueError, match="non-negative"):
            LoadCellSample(t=0.0, tension=-1.0)


class TestProfiles:
    def test_meta_round_trip(self):
        profile = signals.make_profile(noise_std=0.03, drift_rate=0.01, crosstalk=0.2, seed=7)
        again = SignalProfile.from_meta(profile.to_meta())
        assert again == profile

    def test_separable_profile_orders_channels(self):
        profile = signals.separable_profile(0)
        open_means = profile.means[IntentLabel.OPEN]
        close_means = profile.means[IntentLabel.CLOSE]
        relax_means = profile.means[IntentLabel.RELAX]
        # Extensor channels dominate on open, flexor channels on close.
        assert sum(open_means[:4]) > sum(open_means[4:])
        assert sum(close_means[4:]) > sum(close_means[:4])
        assert max(relax_means) < min(open_means[:4])

    def test_crosstalk_bounds_enforced(self):
        with pytest.raises(ValueError, match="crosstalk"):
            signals.make_profile(crosstalk=1.5)


class TestEmgTrace:
    def test_sample_count_and_duration(self):
        profile = signals.separable_profile(1)
        trace = signals.gen_emg_trace(profile, [(IntentLabel.OPEN, 1.0), (IntentLabel.RELAX, 0.5)])
        assert len(trace.samples) == 75
        assert trace.duration_s == pytest.approx(1.5)

    def test_each_segment_keeps_its_annotation(self):
        profile = signals.separable_profile(1)
        script = [(IntentLabel.OPEN, 1.0), (IntentLabel.OPEN, 0.5), (IntentLabel.RELAX, 1.0)]
        trace = signals.gen_emg_trace(profile, script)
        assert len(trace.annotations) == 3
        assert trace.annotations[0][:2] == (0.0, 1.0)
        assert trace.annotations[1][:2] == (1.0, 1.5)
        assert trace.annotations[2][2] is IntentLabel.RELAX

    def test_label_at_half_open_intervals(self):
        profile = signals.separable_profile(1)
        trace = signals.gen_emg_trace(profile, [(IntentLabel.OPEN, 1.0), (IntentLabel.CLOSE, 1.0)])
        assert trace.label_at(0.0) is IntentLabel.OPEN
        assert trace.label_at(0.999) is IntentLabel.OPEN
        assert trace.label_at(1.0) is IntentLabel.CLOSE
        assert trace.label_at(2.0) is None

    def test_deterministic_for_seed(self):
        script = [(IntentLabel.CLOSE, 2.0)]
        a = signals.gen_emg_trace(signals.separable_profile(9), script)
        b = signals.gen_emg_trace(signals.separable_profile(9), script)
        c = signals.gen_emg_trace(signals.separable_profile(10), script)
        assert a.to_jsonl() == b.to_jsonl()
        assert a.to_jsonl() != c.to_jsonl()

    def test_rejects_empty_script(self):
        with pytest.raises(ValueError, match="at least one segment"):
            signals.gen_emg_trace(signals.separable_profile(0), [])

    def test_rejects_wrong_label_type(self):
        with pytest.raises(ValueError, match="IntentLabel"):
            signals.gen_emg_trace(signals.separable_profile(0), [(ShoulderPosture.REST, 1.0)])


class TestLoadTrace:
    def test_posture_levels(self):
        script = [
            (ShoulderPosture.REST, 2.0),
            (ShoulderPosture.ELEVATED, 2.0),
            (ShoulderPosture.DEPRESSED, 2.0),
        ]
        trace = signals.gen_load_trace(script, seed=0)
        by_posture: dict[ShoulderPosture, list[float]] = {p: [] for p in ShoulderPosture}
        for s in trace.samples:
            label = trace.label_at(s.t)
            if label is not None:
                by_posture[label].append(s.tension)
        # Steady-state medians sit on the configured per-posture levels.
        assert np.median(by_posture[ShoulderPosture.REST]) == pytest.approx(20.0, abs=1.0)
        assert np.median(by_posture[ShoulderPosture.ELEVATED]) == pytest.approx(40.0, abs=1.0)
        assert np.median(by_posture[ShoulderPosture.DEPRESSED]) == pytest.approx(8.0, abs=1.0)

    def test_dither_stays_inside_amplitude(self):
        trace = signals.gen_load_trace(
            [(ShoulderPosture.REST, 4.0)], rest_n=27.0, dither_amp=2.0, seed=3
        )
        tensions = [s.tension for s in trace.samples]
        assert min(tensions) >= 25.0 - 1e-9
        assert max(tensions) <= 29.0 + 1e-9

    def test_noise_is_seed_deterministic(self):
        script = [(ShoulderPosture.REST, 1.0)]
        a = signals.gen_load_trace(script, noise_std=0.5, seed=4)
        b = signals.gen_load_trace(script, noise_std=0.5, seed=4)
        assert a.to_jsonl() == b.to_jsonl()


class TestSerialization:
    def test_emg_round_trip_is_byte_identical(self):
        profile = signals.distorted_profile(5)
        trace = signals.gen_emg_trace(profile, [(IntentLabel.OPEN, 1.0), (IntentLabel.CLOSE, 1.0)])
        text = trace.to_jsonl()
        again = SignalTrace.from_jsonl(text)
        assert again.to_jsonl() == text
        assert again.annotations == trace.annotations
        assert again.meta == trace.meta

    def test_load_round_trip_is_byte_identical(self):
        trace = signals.gen_load_trace(
            [(ShoulderPosture.REST, 1.0), (ShoulderPosture.ELEVATED, 1.0)],
            noise_std=0.3,
            dither_amp=1.0,
            seed=2,
        )
        text = trace.to_jsonl()
        assert SignalTrace.from_jsonl(text).to_jsonl() == text

    def test_save_and_load(self, tmp_path):
        trace = signals.gen_load_trace([(ShoulderPosture.DEPRESSED, 0.5)], seed=1)
        path = tmp_path / "trace.jsonl"
        trace.save(path)
        assert SignalTrace.load(path).to_jsonl() == trace.to_jsonl()

    def test_rejects_unknown_schema(self):
        with pytest.raises(ValueError, match="schema"):
            SignalTrace.from_jsonl('{"schema": "exobench/other-v9"}\n')

    def test_rejects_empty_text(self):
        with pytest.raises(ValueError, match="empty"):
            SignalTrace.from_jsonl("")

    def test_rejects_overlapping_annotations(self):
        samples = tuple(LoadCellSample(t=i / 50.0, tension=20.0) for i in range(50))
        with pytest.raises(ValueError, match="overlap"):
            SignalTrace(
                kind="load",
                rate_hz=50.0,
                samples=samples,
                annotations=(
                    (0.0, 0.6, ShoulderPosture.REST),
                    (0.5, 1.0, ShoulderPosture.ELEVATED),
                ),
            )


@given(st.integers(min_value=0, max_value=10_000))
def test_profile_meta_round_trip_any_seed(seed):
    profile = signals.separable_profile(seed)
    assert SignalProfile.from_meta(profile.to_meta()) == profile
