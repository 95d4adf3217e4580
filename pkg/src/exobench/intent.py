"""Intent inferral for both control interfaces.

EMG route: mean-absolute-value features over a sliding window feed a linear
discriminant classifier (per-class means, one shared regularized covariance),
and raw frame decisions pass through a majority-vote smoother. Ties at every
stage break toward RELAX, the safe state.

Shoulder-harness route: a dual-threshold detector on load-cell tension with
hysteresis. Shoulder elevation pushes tension above the close threshold,
depression drops it below the open threshold, and anything in between holds
the previous command so dither near one threshold cannot chatter.

Eligibility screening runs the EMG pipeline over six recorded conditions
(three intents, forearm on and off the table, three attempts each) and
requires a continuous 2 s correct hold on every attempt; any miss assigns
the subject to the harness interface.
"""

from __future__ import annotations

import json
import math
import statistics
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from exobench.signals import (
    EMG_CHANNELS,
    IntentLabel,
    ShoulderPosture,
    SignalTrace,
)

DEFAULT_WINDOW_S = 0.15
DEFAULT_HOP_S = 0.02
DEFAULT_VOTE_K = 5

#: Minimum continuous correct hold per screening attempt, seconds.
HOLD_REQUIREMENT_S = 2.0
ATTEMPTS_PER_CONDITION = 3

CLASS_ORDER = (IntentLabel.OPEN, IntentLabel.RELAX, IntentLabel.CLOSE)

CLASSIFIER_SCHEMA = "exobench/classifier-v1"
SCREENING_SCHEMA = "exobench/screening-v1"


def extract_features(frames: Sequence) -> np.ndarray:
    """Mean absolute value per channel over a window of EMG frames."""
    if len(frames) == 0:
        raise ValueError("feature window must contain at least one frame")
    arr = np.asarray([f.channels for f in frames], dtype=float)
    return np.abs(arr).mean(axis=0)


@dataclass(frozen=True)
class EmgClassifier:
    """Linear discriminant over MAV features with a shared covariance.

    ``separable`` is False when training data gave identical class centroids;
    such a classifier still runs but decides RELAX everywhere.
    """

    class_means: Mapping[IntentLabel, np.ndarray]
    covariance: np.ndarray
    priors: Mapping[IntentLabel, float]
    window_s: float = DEFAULT_WINDOW_S
    hop_s: float = DEFAULT_HOP_S
    vote_k: int = DEFAULT_VOTE_K
    separable: bool = True

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (EMG_CHANNELS, EMG_CHANNELS):
            raise ValueError("covariance must be 8x8")
        inv = np.linalg.inv(cov)
        object.__setattr__(self, "_cov_inv", inv)
        consts = {}
        for label in CLASS_ORDER:
            mu = np.asarray(self.class_means[label], dtype=float)
            consts[label] = (inv @ mu, -0.5 * float(mu @ inv @ mu) + math.log(self.priors[label]))
        object.__setattr__(self, "_discriminants", consts)

    def scores(self, features: np.ndarray) -> dict[IntentLabel, float]:
        """Per-class discriminant scores (monotone in posterior probability)."""
        f = np.asarray(features, dtype=float)
        if f.shape != (EMG_CHANNELS,):
            raise ValueError("feature vector must have 8 components")
        if not np.all(np.isfinite(f)):
            raise ValueError("feature vector contains non-finite values")
        return {label: float(w @ f) + b for label, (w, b) in self._discriminants.items()}

    def to_json(self) -> str:
        doc = {
            "schema": CLASSIFIER_SCHEMA,
            "classes": [label.value for label in CLASS_ORDER],
            "means": {label.value: [float(v) for v in self.class_means[label]] for label in CLASS_ORDER},
            "covariance": [[float(v) for v in row] for row in np.asarray(self.covariance)],
            "priors": {label.value: float(self.priors[label]) for label in CLASS_ORDER},
            "window_s": self.window_s,
            "hop_s": self.hop_s,
            "vote_k": self.vote_k,
            "separable": self.separable,
        }
        return json.dumps(doc, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def from_json(text: str) -> "EmgClassifier":
        doc = json.loads(text)
        if doc.get("schema") != CLASSIFIER_SCHEMA:
            raise ValueError(f"unsupported classifier schema {doc.get('schema')!r}")
        return EmgClassifier(
            class_means={IntentLabel(k): np.asarray(v, dtype=float) for k, v in doc["means"].items()},
            covariance=np.asarray(doc["covariance"], dtype=float),
            priors={IntentLabel(k): float(v) for k, v in doc["priors"].items()},
            window_s=float(doc["window_s"]),
            hop_s=float(doc["hop_s"]),
            vote_k=int(doc["vote_k"]),
            separable=bool(doc["separable"]),
        )

    @staticmethod
    def load(path: str | Path) -> "EmgClassifier":
        return EmgClassifier.from_json(Path(path).read_text())


def train_classifier(
    labeled_features: Sequence[tuple[np.ndarray, IntentLabel]],
    window_s: float = DEFAULT_WINDOW_S,
    hop_s: float = DEFAULT_HOP_S,
    vote_k: int = DEFAULT_VOTE_K,
    ridge: float = 1e-3,
) -> EmgClassifier:
    """Fit the shared-covariance discriminant from labeled feature vectors.

    The pooled within-class covariance gets a ridge of
    ``ridge * trace / 8`` (plus a tiny absolute floor) so zero-spread
    training data still yields an invertible model.
    """
    by_class: dict[IntentLabel, list[np.ndarray]] = {label: [] for label in CLASS_ORDER}
    for features, label in labeled_features:
        f = np.asarray(features, dtype=float)
        if f.shape != (EMG_CHANNELS,):
            raise ValueError("feature vectors must have 8 components")
        by_class[label].append(f)
    missing = [label.value for label in CLASS_ORDER if not by_class[label]]
    if missing:
        raise ValueError(f"insufficient training data: no samples for {', '.join(missing)}")

    n_total = sum(len(v) for v in by_class.values())
    means = {label: np.mean(np.asarray(v), axis=0) for label, v in by_class.items()}
    scatter = np.zeros((EMG_CHANNELS, EMG_CHANNELS))
    for label, vectors in by_class.items():
        centered = np.asarray(vectors) - means[label]
        scatter += centered.T @ centered
    dof = max(n_total - len(CLASS_ORDER), 1)
    cov = scatter / dof
    reg = ridge * np.trace(cov) / EMG_CHANNELS + 1e-9
    cov = cov + reg * np.eye(EMG_CHANNELS)

    priors = {label: len(by_class[label]) / n_total for label in CLASS_ORDER}
    separable = any(
        not np.allclose(means[a], means[b])
        for i, a in enumerate(CLASS_ORDER)
        for b in CLASS_ORDER[i + 1:]
    )
    return EmgClassifier(
        class_means=means,
        covariance=cov,
        priors=priors,
        window_s=window_s,
        hop_s=hop_s,
        vote_k=vote_k,
        separable=separable,
    )


def classify(classifier: EmgClassifier, features: np.ndarray) -> IntentLabel:
    """Argmax over discriminant scores; exact ties resolve toward RELAX."""
    scores = classifier.scores(features)
    best = max(scores.values())
    tied = [label for label in CLASS_ORDER if scores[label] == best]
    if IntentLabel.RELAX in tied:
        return IntentLabel.RELAX
    return tied[0]


class IntentSmoother:
    """Majority vote over the last k raw decisions; ties hold the previous output."""

    def __init__(self, k: int = DEFAULT_VOTE_K):
        if k < 1:
            raise ValueError("vote window k must be >= 1")
        self.k = k
        self._window: deque[IntentLabel] = deque(maxlen=k)
        self._last: IntentLabel | None = None

    def push(self, label: IntentLabel) -> IntentLabel:
        self._window.append(label)
        counts = Counter(self._window)
        top = max(counts.values())
        winners = [lab for lab, c in counts.items() if c == top]
        if len(winners) == 1:
            self._last = winners[0]
        elif self._last is None:
            # Tie before any emission: fall back to the safe state.
            self._last = IntentLabel.RELAX if IntentLabel.RELAX in winners else winners[0]
        return self._last


def smooth_intents(labels: Iterable[IntentLabel], k: int = DEFAULT_VOTE_K) -> list[IntentLabel]:
    """Apply majority-vote smoothing to a label stream. k=1 is the identity."""
    smoother = IntentSmoother(k)
    return [smoother.push(label) for label in labels]


def labeled_windows(
    trace: SignalTrace,
    window_s: float = DEFAULT_WINDOW_S,
) -> list[tuple[np.ndarray, IntentLabel]]:
    """Feature vectors for every frame whose full window sits inside one annotation."""
    if trace.kind != "emg":
        raise ValueError("EMG trace required")
    frames = trace.samples
    win = max(1, int(round(window_s * trace.rate_hz)))
    out = []
    for i in range(win - 1, len(frames)):
        window = frames[i - win + 1 : i + 1]
        label = trace.label_at(window[0].t)
        if label is not None and label is trace.label_at(frames[i].t):
            out.append((extract_features(window), label))
    return out


def classify_trace(classifier: EmgClassifier, trace: SignalTrace) -> list[tuple[float, IntentLabel]]:
    """Raw per-frame decisions over a trace, using trailing (possibly partial) windows."""
    if trace.kind != "emg":
        raise ValueError("EMG trace required")
    frames = trace.samples
    win = max(1, int(round(classifier.window_s * trace.rate_hz)))
    out = []
    for i, frame in enumerate(frames):
        window = frames[max(0, i - win + 1) : i + 1]
        out.append((frame.t, classify(classifier, extract_features(window))))
    return out


def trace_accuracy(classifier: EmgClassifier, trace: SignalTrace) -> float:
    """Fraction of fully-in-window frames whose raw decision matches ground truth."""
    win = max(1, int(round(classifier.window_s * trace.rate_hz)))
    frames = trace.samples
    hits = 0
    total = 0
    for i in range(win - 1, len(frames)):
        window = frames[i - win + 1 : i + 1]
        label = trace.label_at(window[0].t)
        if label is None or label is not trace.label_at(frames[i].t):
            continue
        total += 1
        if classify(classifier, extract_features(window)) is label:
            hits += 1
    if total == 0:
        raise ValueError("trace has no scoreable frames")
    return hits / total


# ---------------------------------------------------------------------------
# Shoulder-harness detector


@dataclass(frozen=True)
class ShConfig:
    """Dual tension thresholds for the harness detector, newtons."""

    t_open: float
    t_close: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_open) and math.isfinite(self.t_close)):
            raise ValueError("thresholds must be finite")
        if not self.t_open < self.t_close:
            raise ValueError("t_open must be strictly below t_close")


def calibrate_sh(
    rest: Sequence[float],
    shrug: Sequence[float],
    depress: Sequence[float],
) -> ShConfig:
    """Thresholds from per-posture tension recordings.

    t_close is the midpoint of the rest and shrug medians, t_open the midpoint
    of the depress and rest medians. The posture medians must be strictly
    ordered (depress < rest < shrug) or the harness is uncalibratable.
    """
    if not rest or not shrug or not depress:
        raise ValueError("uncalibratable harness: empty posture recording")
    med_rest = statistics.median(rest)
    med_shrug = statistics.median(shrug)
    med_depress = statistics.median(depress)
    if not med_depress < med_rest < med_shrug:
        raise ValueError(
            "uncalibratable harness: posture medians not ordered "
            f"(depress {med_depress:.3g}, rest {med_rest:.3g}, shrug {med_shrug:.3g})"
        )
    return ShConfig(
        t_open=(med_depress + med_rest) / 2.0,
        t_close=(med_rest + med_shrug) / 2.0,
    )


def tensions_by_posture(trace: SignalTrace) -> dict[ShoulderPosture, list[float]]:
    """Split a load trace's samples by annotated posture."""
    if trace.kind != "load":
        raise ValueError("load trace required")
    out: dict[ShoulderPosture, list[float]] = {p: [] for p in ShoulderPosture}
    for s in trace.samples:
        posture = trace.label_at(s.t)
        if posture is not None:
            out[posture].append(s.tension)
    return out


def sh_detect(tension: float, config: ShConfig, prev: IntentLabel) -> IntentLabel:
    """Hysteresis rule: >= t_close commands CLOSE, <= t_open commands OPEN,
    the dead band in between holds the previous command."""
    if tension >= config.t_close:
        return IntentLabel.CLOSE
    if tension <= config.t_open:
        return IntentLabel.OPEN
    return prev


class ShDetector:
    """Stateful wrapper around sh_detect; starts in RELAX (no command yet)."""

    def __init__(self, config: ShConfig, initial: IntentLabel = IntentLabel.RELAX):
        self.config = config
        self.state = initial

    def push(self, tension: float) -> IntentLabel:
        self.state = sh_detect(tension, self.config, self.state)
        return self.state


def detect_trace(config: ShConfig, trace: SignalTrace) -> list[tuple[float, IntentLabel]]:
    detector = ShDetector(config)
    return [(s.t, detector.push(s.tension)) for s in trace.samples]


# ---------------------------------------------------------------------------
# Eligibility screening

ON_TABLE = "on_table"
OFF_TABLE = "off_table"

#: The six screening conditions in protocol order.
SCREENING_CONDITIONS = tuple(
    f"{intent.value}_{support}"
    for support in (ON_TABLE, OFF_TABLE)
    for intent in CLASS_ORDER
)


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    attempt_holds_s: tuple[float, ...]
    passed: bool


@dataclass(frozen=True)
class ScreeningReport:
    """Outcome of the six-condition control screening."""

    conditions: tuple[ConditionResult, ...]
    verdict: str  # "EMG" | "SH"

    def to_json(self) -> str:
        doc = {
            "schema": SCREENING_SCHEMA,
            "hold_requirement_s": HOLD_REQUIREMENT_S,
            "conditions": {
                c.condition: {"passed": c.passed, "attempt_holds_s": list(c.attempt_holds_s)}
                for c in self.conditions
            },
            "verdict": self.verdict,
        }
        return json.dumps(doc, indent=2) + "\n"


def max_hold_runs(
    decisions: Sequence[tuple[float, IntentLabel]],
    rate_hz: float,
    attempts: Sequence[tuple[float, float]],
    intent: IntentLabel,
) -> list[float]:
    """Longest continuous correct run inside each attempt interval, seconds.

    Each decision frame counts for one sample period, so n consecutive
    correct frames hold for n / rate_hz seconds.
    """
    holds = []
    for t0, t1 in attempts:
        best = 0
        run = 0
        for t, label in decisions:
            if not t0 <= t < t1:
                continue
            if label is intent:
                run += 1
                best = max(best, run)
            else:
                run = 0
        holds.append(best / rate_hz)
    return holds


def attempt_passes(hold_s: float) -> bool:
    """Strict 2 s boundary: a 1.9 s hold fails, a 2.0 s hold passes."""
    return hold_s >= HOLD_REQUIREMENT_S


def screen_emg_eligibility(
    traces: Mapping[str, SignalTrace],
    classifier: EmgClassifier,
) -> ScreeningReport:
    """Run the screening pipeline and issue the interface verdict.

    ``traces`` maps each condition name in SCREENING_CONDITIONS to an EMG
    trace whose annotation intervals for the condition's intent mark the
    three attempts. The verdict is EMG only if every attempt of every
    condition holds the correct smoothed decision for at least 2 s.
    """
    missing = [c for c in SCREENING_CONDITIONS if c not in traces]
    if missing:
        raise ValueError(f"missing screening conditions: {', '.join(missing)}")

    results = []
    for condition in SCREENING_CONDITIONS:
        intent = IntentLabel(condition.split("_", 1)[0])
        trace = traces[condition]
        attempts = [(t0, t1) for t0, t1, label in trace.annotations if label is intent]
        if len(attempts) != ATTEMPTS_PER_CONDITION:
            raise ValueError(
                f"condition {condition} must contain {ATTEMPTS_PER_CONDITION} "
                f"attempts, found {len(attempts)}"
            )
        raw = classify_trace(classifier, trace)
        smoothed = smooth_intents([label for _t, label in raw], classifier.vote_k)
        decisions = [(t, lab) for (t, _), lab in zip(raw, smoothed)]
        holds = max_hold_runs(decisions, trace.rate_hz, attempts, intent)
        results.append(
            ConditionResult(
                condition=condition,
                attempt_holds_s=tuple(holds),
                passed=all(attempt_passes(h) for h in holds),
            )
        )

    verdict = "EMG" if all(r.passed for r in results) else "SH"
    return ScreeningReport(conditions=tuple(results), verdict=verdict)


def screening_script(intent: IntentLabel, hold_s: float = 3.0, gap_s: float = 1.0):
    """Intent script for one screening condition: three annotated attempts.

    RELAX attempts need no inter-attempt gap; the generator keeps consecutive
    same-label segments as distinct annotation intervals.
    """
    if intent is IntentLabel.RELAX:
        return [(intent, hold_s)] * ATTEMPTS_PER_CONDITION
    script: list[tuple[IntentLabel, float]] = []
    for _ in range(ATTEMPTS_PER_CONDITION):
        script.append((IntentLabel.RELAX, gap_s))
        script.append((intent, hold_s))
    return script
