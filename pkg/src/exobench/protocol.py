"""Training protocol: task inventory, session plans, and the session runner.

The object protocol is fixed: five drill objects each grasped five times
with the forearm supported on the table and five times unsupported, a
raised-lip tray cleared twice and restocked twice, three irregular objects
twice each, and eight bimanual tasks twice each. Sessions run three times a
week for four weeks; each counts 30 minutes of active practice, where
active time excludes setup, calibration, rests, and device adjustments.
The session stops after the task during which the active-time budget is
reached; if the protocol finishes early the remainder is free training,
logged as a single aggregate event.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from exobench import controller, intent as intent_mod, signals
from exobench.signals import IntentLabel, ShoulderPosture
from exobench.subject import Subject, derive_seed

ACTIVE_BUDGET_S = 1800.0
SESSIONS_PER_WEEK = 3
TOTAL_SESSIONS = 12

SESSION_SCHEMA = "exobench/session-v1"


class ProtocolPhase(Enum):
    CONTROLS = "controls"
    REPETITIVE_DRILL = "repetitive_drill"
    TRAY = "tray"
    IRREGULAR = "irregular"
    BIMANUAL = "bimanual"


class Support(Enum):
    SUPPORTED = "supported"
    UNSUPPORTED = "unsupported"
    NA = "n/a"


@dataclass(frozen=True)
class TrainingTask:
    task_id: str
    phase: ProtocolPhase
    object_name: str
    repetitions: int
    support: Support

    def __post_init__(self) -> None:
        if self.repetitions <= 0:
            raise ValueError("repetitions must be positive")


DRILL_OBJECTS = (
    "2.5 cm wooden cube",
    "5 cm wooden cube",
    "tennis ball",
    "4 cm diameter toiletry bottle",
    "13 cm tall tapered plastic cup",
)

IRREGULAR_OBJECTS = (
    "cotton ball",
    "1 inch rubber ball",
    "washcloth",
)

BIMANUAL_TASKS = (
    "remove and replace the cap of a broad line marker",
    "unscrew and replace the cap of a toothpaste tube",
    "unscrew and replace the cap of a beverage bottle",
    "remove and replace the wide-mouth lid of a coffee container",
    "stir in a small bowl with a wooden spoon for 10 seconds",
    "make two cuts in a putty log with a butter knife",
    "open a lock with a key",
    "open a sealed sandwich-size ziploc bag",
)

DRILL_REPS = 5
TRAY_PASSES = 2
IRREGULAR_REPS = 2
BIMANUAL_REPS = 2


def build_protocol() -> tuple[TrainingTask, ...]:
    """The full object-task inventory in protocol order."""
    tasks: list[TrainingTask] = []
    for i, obj in enumerate(DRILL_OBJECTS, start=1):
        for support in (Support.SUPPORTED, Support.UNSUPPORTED):
            tasks.append(TrainingTask(
                task_id=f"drill-{i}-{'sup' if support is Support.SUPPORTED else 'unsup'}",
                phase=ProtocolPhase.REPETITIVE_DRILL,
                object_name=obj,
                repetitions=DRILL_REPS,
                support=support,
            ))
    tasks.append(TrainingTask("tray-remove", ProtocolPhase.TRAY,
                              "raised-lip tray, remove all five items", TRAY_PASSES, Support.NA))
    tasks.append(TrainingTask("tray-replace", ProtocolPhase.TRAY,
                              "raised-lip tray, replace all five items", TRAY_PASSES, Support.NA))
    for i, obj in enumerate(IRREGULAR_OBJECTS, start=1):
        tasks.append(TrainingTask(f"irregular-{i}", ProtocolPhase.IRREGULAR,
                                  obj, IRREGULAR_REPS, Support.NA))
    for i, obj in enumerate(BIMANUAL_TASKS, start=1):
        tasks.append(TrainingTask(f"bimanual-{i}", ProtocolPhase.BIMANUAL,
                                  obj, BIMANUAL_REPS, Support.NA))
    return tuple(tasks)


@dataclass(frozen=True)
class SessionPlan:
    subject_id: str
    session_index: int          # 1..12
    session_date: date
    tasks: tuple[TrainingTask, ...]
    active_budget_s: float = ACTIVE_BUDGET_S

    def __post_init__(self) -> None:
        if not 1 <= self.session_index <= TOTAL_SESSIONS:
            raise ValueError(f"session index must be 1..{TOTAL_SESSIONS}")
        if self.active_budget_s <= 0:
            raise ValueError("active budget must be positive")


def build_session_plans(
    subject_id: str,
    start_date: date = date(2026, 1, 5),
) -> list[SessionPlan]:
    """Twelve sessions, three per week on a Mon/Wed/Fri cadence."""
    tasks = build_protocol()
    plans = []
    offsets = (0, 2, 4)  # days within each week
    for idx in range(TOTAL_SESSIONS):
        week, slot = divmod(idx, SESSIONS_PER_WEEK)
        plans.append(SessionPlan(
            subject_id=subject_id,
            session_index=idx + 1,
            session_date=start_date + timedelta(days=7 * week + offsets[slot]),
            tasks=tasks,
        ))
    return plans


def plan_to_text(plans: Sequence[SessionPlan]) -> str:
    """Declarative plan listing: one header block, one line per session."""
    if not plans:
        raise ValueError("no sessions to serialize")
    lines = [
        f"subject = {plans[0].subject_id}",
        f"active_minutes = {plans[0].active_budget_s / 60:g}",
        f"tasks_per_session = {len(plans[0].tasks)}",
    ]
    for plan in plans:
        lines.append(f"session {plan.session_index} = {plan.session_date.isoformat()}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Task duration model

#: Nominal seconds per repetition by phase.
_PHASE_REP_S = {
    ProtocolPhase.REPETITIVE_DRILL: 12.0,
    ProtocolPhase.TRAY: 40.0,
    ProtocolPhase.IRREGULAR: 15.0,
    ProtocolPhase.BIMANUAL: 45.0,
    ProtocolPhase.CONTROLS: 60.0,
}

_LOGNORMAL_SIGMA = 0.22


def lognormal_task_durations(subject: Subject, session_index: int) -> Callable[[TrainingTask], float]:
    """Seeded lognormal draw per task around the phase nominal times."""

    def duration(task: TrainingTask) -> float:
        rng = np.random.default_rng(
            derive_seed(subject.seed, f"duration:{session_index}:{task.task_id}")
        )
        nominal = _PHASE_REP_S[task.phase] * task.repetitions * subject.duration_scale
        return float(nominal * rng.lognormal(mean=0.0, sigma=_LOGNORMAL_SIGMA))

    return duration


# ---------------------------------------------------------------------------
# Per-session calibration

SETUP_S = 900.0      # donning the glove and components
DOFFING_S = 60.0
CALIBRATION_S = 120.0
BREAK_S = 90.0
_BREAK_PROBABILITY = 0.12


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CalibrationBundle:
    """Everything refreshed at the start of a session."""

    rom: controller.RomCalibration
    thumb_extension_n: float
    thumb_abduction_n: float
    sh_config: intent_mod.ShConfig | None = None
    classifier: intent_mod.EmgClassifier | None = None


def session_calibration(subject: Subject, session_index: int) -> CalibrationBundle:
    """Fresh per-session calibration: ROM plus the group's intent interface.

    EMG-group subjects get a classifier trained on a fresh recording;
    harness subjects get thresholds from posture recordings. Deterministic
    for a given subject seed and session index.
    """
    rom = controller.calibrate_rom(subject.hand_size)
    rng = np.random.default_rng(derive_seed(subject.seed, f"thumb:{session_index}"))
    thumb_extension = float(rng.uniform(8.0, 14.0))
    thumb_abduction = float(rng.uniform(4.0, 8.0))

    if subject.group == "EMG":
        profile = subject.emg_profile(f"calibration:{session_index}")
        script = []
        for label in intent_mod.CLASS_ORDER:
            script += [(label, 4.0), (IntentLabel.RELAX, 1.0)] if label is not IntentLabel.RELAX \
                else [(label, 4.0)]
        trace = signals.gen_emg_trace(profile, script)
        try:
            clf = intent_mod.train_classifier(intent_mod.labeled_windows(trace))
        except ValueError as exc:
            raise CalibrationError(f"classifier calibration failed: {exc}") from exc
        return CalibrationBundle(rom=rom, thumb_extension_n=thumb_extension,
                                 thumb_abduction_n=thumb_abduction, classifier=clf)

    seed = derive_seed(subject.seed, f"sh_calibration:{session_index}")
    postures = {}
    for i, (posture, level) in enumerate((
        (ShoulderPosture.REST, subject.sh_rest_n),
        (ShoulderPosture.ELEVATED, subject.sh_shrug_n),
        (ShoulderPosture.DEPRESSED, subject.sh_depress_n),
    )):
        trace = signals.gen_load_trace(
            [(posture, 3.0)],
            rest_n=subject.sh_rest_n, elevated_n=subject.sh_shrug_n,
            depressed_n=subject.sh_depress_n,
            noise_std=subject.sh_noise_n, seed=seed + i,
        )
        postures[posture] = [s.tension for s in trace.samples]
    try:
        sh = intent_mod.calibrate_sh(
            rest=postures[ShoulderPosture.REST],
            shrug=postures[ShoulderPosture.ELEVATED],
            depress=postures[ShoulderPosture.DEPRESSED],
        )
    except ValueError as exc:
        raise CalibrationError(str(exc)) from exc
    return CalibrationBundle(rom=rom, thumb_extension_n=thumb_extension,
                             thumb_abduction_n=thumb_abduction, sh_config=sh)


# ---------------------------------------------------------------------------
# Session runner


@dataclass(frozen=True)
class SessionEvent:
    t_s: float                  # session wall clock, seconds from arrival
    kind: str
    detail: Mapping

    def to_doc(self) -> dict:
        return {"t": self.t_s, "kind": self.kind, **dict(self.detail)}


@dataclass
class SessionLog:
    subject_id: str
    session_index: int
    session_date: date
    events: list[SessionEvent] = field(default_factory=list)
    active_s: float = 0.0
    last_completed_task: str | None = None
    overflow: bool = False
    free_training_s: float = 0.0

    def to_jsonl(self) -> str:
        header = {
            "schema": SESSION_SCHEMA,
            "subject_id": self.subject_id,
            "session_index": self.session_index,
            "date": self.session_date.isoformat(),
            "active_s": self.active_s,
            "last_completed_task": self.last_completed_task,
            "overflow": self.overflow,
            "free_training_s": self.free_training_s,
        }
        lines = [json.dumps(header, separators=(",", ":"))]
        lines += [json.dumps(e.to_doc(), separators=(",", ":")) for e in self.events]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


_GRASP_SCRIPT = ((IntentLabel.OPEN, 1.5), (IntentLabel.CLOSE, 1.5),
                 (IntentLabel.RELAX, 1.0), (IntentLabel.OPEN, 1.5))

_SH_TASK_SCRIPT = (
    (ShoulderPosture.REST, 0.5),
    (ShoulderPosture.DEPRESSED, 1.0),   # depression opens the hand
    (ShoulderPosture.REST, 0.5),
    (ShoulderPosture.ELEVATED, 1.0),    # elevation closes it
    (ShoulderPosture.REST, 0.5),
    (ShoulderPosture.DEPRESSED, 1.0),
)


def task_intent_stream(
    subject: Subject,
    bundle: CalibrationBundle,
    session_index: int,
    task: TrainingTask,
) -> tuple[list[tuple[float, IntentLabel]], float]:
    """One representative grasp-release cycle through the group's interface."""
    context = f"task:{session_index}:{task.task_id}"
    if subject.group == "EMG":
        trace = signals.gen_emg_trace(subject.emg_profile(context), list(_GRASP_SCRIPT))
        raw = intent_mod.classify_trace(bundle.classifier, trace)
        smoothed = intent_mod.smooth_intents([lab for _t, lab in raw], bundle.classifier.vote_k)
        return [(t, lab) for (t, _), lab in zip(raw, smoothed)], trace.duration_s
    trace = signals.gen_load_trace(
        list(_SH_TASK_SCRIPT),
        rest_n=subject.sh_rest_n, elevated_n=subject.sh_shrug_n,
        depressed_n=subject.sh_depress_n, noise_std=subject.sh_noise_n,
        seed=derive_seed(subject.seed, context),
    )
    return intent_mod.detect_trace(bundle.sh_config, trace), trace.duration_s


def run_session(
    plan: SessionPlan,
    subject: Subject,
    duration_model: Callable[[TrainingTask], float] | None = None,
    simulate_episodes: bool = True,
) -> SessionLog:
    """Execute one session: calibration, ordered tasks, budget accounting.

    Each task runs one controller episode (a grasp-release cycle through
    the subject's intent interface); a safety abort is logged as a device
    adjustment and the task resumes. Active time comes from the duration
    model. The session ends after the task during which the active budget
    is reached (overflow flag set), or, when the protocol finishes early,
    with one aggregate free-training event covering the remainder.
    """
    log = SessionLog(subject_id=plan.subject_id, session_index=plan.session_index,
                     session_date=plan.session_date)
    duration_model = duration_model or lognormal_task_durations(subject, plan.session_index)
    rng = np.random.default_rng(derive_seed(subject.seed, f"session:{plan.session_index}"))

    wall = 0.0
    log.events.append(SessionEvent(wall, "setup", {"duration_s": SETUP_S,
                                                   "arm_support": subject.uses_arm_support}))
    wall += SETUP_S
    bundle = session_calibration(subject, plan.session_index)
    detail: dict = {"duration_s": CALIBRATION_S, "interface": subject.group,
                    "rom_mm": [bundle.rom.retracted_mm, bundle.rom.extended_mm],
                    "thumb_n": [bundle.thumb_extension_n, bundle.thumb_abduction_n]}
    if bundle.sh_config is not None:
        detail["thresholds_n"] = [bundle.sh_config.t_open, bundle.sh_config.t_close]
    log.events.append(SessionEvent(wall, "calibration", detail))
    wall += CALIBRATION_S

    plant = controller.default_plant(subject.hand_size,
                                     controller.MAS_STIFFNESS[subject.mas])

    for task in plan.tasks:
        log.events.append(SessionEvent(wall, "task_start", {"task": task.task_id}))
        if simulate_episodes:
            stream, episode_s = task_intent_stream(subject, bundle, plan.session_index, task)
            try:
                controller.run_episode(stream, episode_s, bundle.rom, plant=plant)
            except controller.SafetyAbort as abort:
                log.events.append(SessionEvent(wall, "adjustment",
                                               {"task": task.task_id, "reason": abort.diagnostic}))
                wall += 120.0
        task_s = duration_model(task)
        wall += task_s
        log.active_s += task_s
        log.last_completed_task = task.task_id
        log.events.append(SessionEvent(wall, "task_complete",
                                       {"task": task.task_id, "active_s": task_s}))
        if log.active_s >= plan.active_budget_s:
            log.overflow = True
            log.events.append(SessionEvent(wall, "budget_reached",
                                           {"active_s": log.active_s, "task": task.task_id}))
            break
        if rng.random() < _BREAK_PROBABILITY:
            log.events.append(SessionEvent(wall, "break", {"duration_s": BREAK_S}))
            wall += BREAK_S

    if not log.overflow and log.active_s < plan.active_budget_s:
        remainder = plan.active_budget_s - log.active_s
        log.free_training_s = remainder
        log.events.append(SessionEvent(wall, "free_training", {"active_s": remainder}))
        wall += remainder
        log.active_s = plan.active_budget_s

    log.events.append(SessionEvent(wall, "doffing", {"duration_s": DOFFING_S}))
    log.events.append(SessionEvent(wall + DOFFING_S, "session_end",
                                   {"active_s": log.active_s, "wall_s": wall + DOFFING_S}))
    return log
