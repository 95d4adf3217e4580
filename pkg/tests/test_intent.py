"""Intent inferral: classifier, vote smoothing, harness detector, screening."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exobench import intent, signals
from exobench.intent import (
    CLASS_ORDER,
    EmgClassifier,
    IntentSmoother,
    ShConfig,
    ShDetector,
    attempt_passes,
    calibrate_sh,
    classify,
    classify_trace,
    detect_trace,
    extract_features,
    labeled_windows,
    max_hold_runs,
    screen_emg_eligibility,
    screening_script,
    sh_detect,
    smooth_intents,
    tensions_by_posture,
    trace_accuracy,
    train_classifier,
)
from exobench.signals import EmgFrame, IntentLabel, ShoulderPosture
from exobench.subject import preset_subject

OPEN, RELAX, CLOSE = IntentLabel.OPEN, IntentLabel.RELAX, IntentLabel.CLOSE

labels_st = st.sampled_from([OPEN, RELAX, CLOSE])


def _frames(values, n=5):
    return [EmgFrame(t=i * 0.02, channels=tuple(values)) for i in range(n)]


class TestFeatures:
    def test_mav_of_constant_window_is_exact(self):
        values = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
        feats = extract_features(_frames(values))
        assert np.array_equal(feats, np.asarray(values))

    def test_mav_averages_over_frames(self):
        frames = [
            EmgFrame(t=0.0, channels=(0.0,) * 8),
            EmgFrame(t=0.02, channels=(1.0,) * 8),
        ]
        assert np.allclose(extract_features(frames), 0.5)

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError, match="at least one frame"):
            extract_features([])


class TestClassifier:
    def test_separable_accuracy(self, separable_classifier):
        subject = preset_subject("separable", seed=0)
        script = [(OPEN, 2.0), (RELAX, 2.0), (CLOSE, 2.0)]
        trace = signals.gen_emg_trace(subject.emg_profile("eval"), script)
        assert trace_accuracy(separable_classifier, trace) >= 0.9

    def test_insufficient_training_data_names_classes(self):
        feats = [(np.full(8, 0.5), OPEN)]
        with pytest.raises(ValueError, match="no samples for relax, close"):
            train_classifier(feats)

    def test_identical_centroids_marked_inseparable(self):
        feats = [(np.full(8, 0.5), label) for label in CLASS_ORDER for _ in range(4)]
        clf = train_classifier(feats)
        assert clf.separable is False
        assert classify(clf, np.full(8, 0.7)) is RELAX

    def test_exact_three_way_tie_resolves_to_relax(self):
        mu = np.full(8, 0.5)
        clf = EmgClassifier(
            class_means={label: mu for label in CLASS_ORDER},
            covariance=np.eye(8),
            priors={label: 1 / 3 for label in CLASS_ORDER},
        )
        assert classify(clf, np.full(8, 0.25)) is RELAX

    def test_two_way_tie_without_relax_takes_class_order(self):
        e1, e2 = np.zeros(8), np.zeros(8)
        e1[0] = 1.0
        e2[1] = 1.0
        clf = EmgClassifier(
            class_means={OPEN: e1, CLOSE: e2, RELAX: np.full(8, -10.0)},
            covariance=np.eye(8),
            priors={label: 1 / 3 for label in CLASS_ORDER},
        )
        midpoint = (e1 + e2) / 2.0
        scores = clf.scores(midpoint)
        assert scores[OPEN] == scores[CLOSE] > scores[RELAX]
        assert classify(clf, midpoint) is OPEN

    def test_argmax_invariant_to_feature_scale_direction(self, separable_classifier):
        # Doubling activation toward a class centroid must not flip away from it.
        mu_open = separable_classifier.class_means[OPEN]
        assert classify(separable_classifier, mu_open) is OPEN

    def test_json_round_trip_preserves_decisions(self, separable_classifier, tmp_path):
        path = tmp_path / "clf.json"
        separable_classifier.save(path)
        again = EmgClassifier.load(path)
        rng = np.random.default_rng(11)
        for _ in range(50):
            f = rng.uniform(0.0, 1.0, size=8)
            assert classify(again, f) is classify(separable_classifier, f)

    def test_json_schema_guard(self):
        with pytest.raises(ValueError, match="schema"):
            EmgClassifier.from_json('{"schema": "exobench/classifier-v9"}')

    def test_rejects_non_finite_features(self, separable_classifier):
        bad = np.full(8, np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            separable_classifier.scores(bad)


class TestSmoothing:
    def test_majority_vote_with_tie_hold(self):
        smoother = IntentSmoother(k=4)
        seq = [OPEN, CLOSE, OPEN, CLOSE, CLOSE, OPEN]
        out = [smoother.push(x) for x in seq]
        # Fourth input produces a 2-2 tie, held at the previous OPEN output.
        assert out == [OPEN, OPEN, OPEN, OPEN, CLOSE, CLOSE]

    def test_initial_tie_prefers_relax_when_tied(self):
        smoother = IntentSmoother(k=2)
        assert smoother.push(RELAX) is RELAX
        assert smoother.push(CLOSE) is RELAX

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError, match="k"):
            IntentSmoother(k=0)

    @given(st.lists(labels_st, min_size=1, max_size=40))
    def test_k1_is_identity(self, seq):
        assert smooth_intents(seq, k=1) == seq

    @given(st.lists(labels_st, min_size=1, max_size=40), st.integers(1, 7))
    def test_never_invents_labels(self, seq, k):
        out = smooth_intents(seq, k)
        assert len(out) == len(seq)
        prev = None
        for i, decided in enumerate(out):
            window = set(seq[max(0, i - k + 1) : i + 1])
            allowed = window if prev is None else window | {prev}
            assert decided in allowed
            prev = decided

    @given(st.lists(labels_st, min_size=1, max_size=40), st.integers(1, 7))
    def test_matches_stateful_detector(self, seq, k):
        smoother = IntentSmoother(k=k)
        assert smooth_intents(seq, k) == [smoother.push(x) for x in seq]

    @given(labels_st, st.integers(1, 7), st.integers(1, 20))
    def test_constant_input_is_constant_output(self, label, k, n):
        assert smooth_intents([label] * n, k) == [label] * n


class TestHarnessCalibration:
    def test_reference_midpoints(self):
        config = calibrate_sh(rest=[20.0], shrug=[40.0], depress=[8.0])
        assert config.t_open == 14.0
        assert config.t_close == 30.0

    def test_uses_medians_not_means(self):
        config = calibrate_sh(
            rest=[19.0, 20.0, 90.0],
            shrug=[40.0, 40.0, 41.0],
            depress=[7.0, 8.0, 9.0],
        )
        assert config.t_open == 14.0
        assert config.t_close == 30.0

    def test_unordered_medians_fail(self):
        with pytest.raises(ValueError, match="uncalibratable"):
            calibrate_sh(rest=[20.0], shrug=[10.0], depress=[8.0])

    def test_empty_recording_fails(self):
        with pytest.raises(ValueError, match="uncalibratable"):
            calibrate_sh(rest=[], shrug=[40.0], depress=[8.0])

    def test_config_requires_ordered_thresholds(self):
        with pytest.raises(ValueError, match="strictly below"):
            ShConfig(t_open=30.0, t_close=14.0)


class TestHysteresis:
    CONFIG = ShConfig(t_open=14.0, t_close=30.0)

    def test_threshold_boundaries_command(self):
        assert sh_detect(30.0, self.CONFIG, RELAX) is CLOSE
        assert sh_detect(14.0, self.CONFIG, CLOSE) is OPEN
        assert sh_detect(29.999, self.CONFIG, OPEN) is OPEN
        assert sh_detect(14.001, self.CONFIG, CLOSE) is CLOSE

    @given(st.lists(st.floats(min_value=14.01, max_value=29.99), min_size=1, max_size=200))
    def test_in_band_trace_is_constant(self, tensions):
        detector = ShDetector(self.CONFIG)
        out = [detector.push(t) for t in tensions]
        assert set(out) == {RELAX}

    @given(
        st.lists(st.floats(min_value=0.0, max_value=60.0), min_size=2, max_size=200),
    )
    def test_output_changes_only_in_command_zones(self, tensions):
        detector = ShDetector(self.CONFIG)
        prev = detector.state
        for tension in tensions:
            decided = detector.push(tension)
            if decided is not prev:
                assert tension >= self.CONFIG.t_close or tension <= self.CONFIG.t_open
            prev = decided

    def test_detect_trace_maps_postures_to_commands(self):
        script = [
            (ShoulderPosture.REST, 1.0),
            (ShoulderPosture.ELEVATED, 1.0),
            (ShoulderPosture.REST, 1.0),
            (ShoulderPosture.DEPRESSED, 1.0),
        ]
        trace = signals.gen_load_trace(script, seed=0)
        decisions = detect_trace(self.CONFIG, trace)
        by_label = {}
        for t, decided in decisions:
            by_label.setdefault(trace.label_at(t), []).append(decided)
        assert by_label[ShoulderPosture.ELEVATED][-1] is CLOSE
        assert by_label[ShoulderPosture.DEPRESSED][-1] is OPEN

    def test_tensions_by_posture_requires_load_kind(self):
        subject = preset_subject("separable", seed=0)
        emg = signals.gen_emg_trace(subject.emg_profile("x"), [(OPEN, 0.5)])
        with pytest.raises(ValueError, match="load trace"):
            tensions_by_posture(emg)


class TestScreening:
    def test_hold_run_measurement(self):
        rate = 50.0
        decisions = [(i / rate, OPEN if i < 100 else RELAX) for i in range(150)]
        holds = max_hold_runs(decisions, rate, [(0.0, 3.0)], OPEN)
        assert holds == [2.0]

    def test_interruption_resets_run(self):
        rate = 50.0
        labels = [OPEN] * 60 + [RELAX] + [OPEN] * 70
        decisions = [(i / rate, lab) for i, lab in enumerate(labels)]
        holds = max_hold_runs(decisions, rate, [(0.0, 10.0)], OPEN)
        assert holds == [1.4]

    def test_strict_two_second_boundary(self):
        assert attempt_passes(2.0)
        assert not attempt_passes(1.9)
        assert not attempt_passes(1.99)

    def test_screening_script_shapes(self):
        relax_script = screening_script(RELAX)
        assert len(relax_script) == 3
        assert all(label is RELAX for label, _ in relax_script)
        open_script = screening_script(OPEN)
        holds = [seg for seg in open_script if seg[0] is OPEN]
        assert len(holds) == 3
        assert all(dur == 3.0 for _, dur in holds)

    def test_missing_conditions_are_named(self, separable_classifier):
        with pytest.raises(ValueError, match="open_on_table"):
            screen_emg_eligibility({}, separable_classifier)

    def test_separable_subject_passes_everywhere(self, separable_classifier):
        subject = preset_subject("separable", seed=0)
        traces = {}
        for condition in intent.SCREENING_CONDITIONS:
            label = IntentLabel(condition.split("_", 1)[0])
            off_table = condition.endswith(intent.OFF_TABLE)
            profile = subject.emg_profile(f"screen:{condition}", off_table=off_table)
            traces[condition] = signals.gen_emg_trace(profile, screening_script(label))
        report = screen_emg_eligibility(traces, separable_classifier)
        assert report.verdict == "EMG"
        assert all(c.passed for c in report.conditions)
        assert len(report.conditions) == 6

    def test_condition_order_is_protocol_order(self):
        assert intent.SCREENING_CONDITIONS == (
            "open_on_table",
            "relax_on_table",
            "close_on_table",
            "open_off_table",
            "relax_off_table",
            "close_off_table",
        )


class TestWindowing:
    def test_labeled_windows_skip_boundary_straddles(self):
        subject = preset_subject("separable", seed=2)
        trace = signals.gen_emg_trace(subject.emg_profile("w"), [(OPEN, 1.0), (CLOSE, 1.0)])
        pairs = labeled_windows(trace)
        # 100 frames, 8-frame window: 93 full windows minus 7 straddling the switch.
        assert len(pairs) == 86
        assert {label for _, label in pairs} == {OPEN, CLOSE}

    def test_classify_trace_covers_every_frame(self, separable_classifier):
        subject = preset_subject("separable", seed=3)
        trace = signals.gen_emg_trace(subject.emg_profile("c"), [(RELAX, 1.0)])
        decisions = classify_trace(separable_classifier, trace)
        assert len(decisions) == len(trace.samples)
        assert decisions[0][0] == trace.samples[0].t
