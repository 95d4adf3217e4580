"""Exotendon motor control loop and simulated finger plant.

A single geared motor tensions one cable network that extends all four
fingers (the thumb is statically splinted and not modeled). Intent commands
select between two calibrated excursion setpoints; a PID position loop with
output saturation and conditional anti-windup drives the motor; the plant is
quasi-static-plus-damping per joint (no inertia matrix), with MCP and PIP
joints per digit, hard stops at zero extension (the hyperextension block)
and at the flexion limits, and a tension cap at the cable force limit.

Sign conventions: joint angles are degrees of flexion (0 = straight),
motor excursion is millimeters of cable paid out (0 = fully retracted =
fingers pulled open). Retracting the motor extends the fingers; releasing
cable lets finger tone and voluntary flexion close the hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from exobench.signals import IntentLabel

CONTROL_DT_S = 0.005
TENSION_CAP_N = 100.0

#: Degrees of residual flexion below which a digit counts as open.
OPEN_THRESHOLD_DEG = 5.0

DIGITS = ("index", "middle", "ring", "little")
JOINTS = ("mcp", "pip")

TRAJECTORY_SCHEMA = "exobench/trajectory-v1"

_DEG2RAD = math.pi / 180.0


class SafetyAbort(RuntimeError):
    """Raised when an episode violates a safety invariant; carries the partial log."""

    def __init__(self, diagnostic: str, log: "TrajectoryLog"):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic
        self.log = log


@dataclass(frozen=True)
class RomCalibration:
    """Excursion setpoints from the per-session range-of-motion pass."""

    retracted_mm: float  # hand fully open
    extended_mm: float   # cable slack, hand closable

    def __post_init__(self) -> None:
        if not self.retracted_mm < self.extended_mm:
            raise ValueError("retracted setpoint must be below extended setpoint")
        if self.retracted_mm < 0.0:
            raise ValueError("excursion cannot be negative")


#: Excursion range by glove size, mm.
ROM_TABLE = {
    "S": RomCalibration(0.0, 38.0),
    "M": RomCalibration(0.0, 45.0),
    "L": RomCalibration(0.0, 52.0),
}


def calibrate_rom(hand_size: str) -> RomCalibration:
    """Setpoints for a glove size (S/M/L)."""
    try:
        return ROM_TABLE[hand_size]
    except KeyError:
        raise ValueError(f"unknown hand size {hand_size!r}; expected one of S, M, L") from None


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_clamp: float = 20.0
    output_clamp: float = 1.0

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0.0:
            raise ValueError("PID gains must be non-negative")
        if self.integral_clamp <= 0.0 or self.output_clamp <= 0.0:
            raise ValueError("clamps must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


# Tuned once against the M-size plant so a full retraction lands on the
# 1.8 s device figure; the loop is type 1 (motor integrates velocity), so
# proportional action alone settles with zero steady-state error, and kp
# keeps the velocity-lag pole pair at critical damping so the approach
# never overshoots. ki/kd stay available for experiments.
DEFAULT_GAINS = PidGains(kp=0.4, ki=0.0, kd=0.0)


def pid_step(
    gains: PidGains,
    setpoint: float,
    measured: float,
    dt: float,
    state: PidState,
) -> tuple[float, PidState]:
    """One clamped PID update. Returns (effort in [-clamp, clamp], new state).

    Anti-windup is conditional integration: the integral freezes whenever the
    unsaturated output already exceeds the clamp in the error's direction.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    error = setpoint - measured
    derivative = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    candidate = min(max(state.integral + error * dt, -gains.integral_clamp), gains.integral_clamp)
    unsat = gains.kp * error + gains.ki * candidate + gains.kd * derivative
    if abs(unsat) > gains.output_clamp and unsat * error > 0.0:
        integral = state.integral  # would push further into saturation
    else:
        integral = candidate
    out = gains.kp * error + gains.ki * integral + gains.kd * derivative
    effort = min(max(out, -gains.output_clamp), gains.output_clamp)
    return effort, PidState(integral=integral, prev_error=error)


@dataclass(frozen=True)
class MotorParams:
    """Spool drive parameters; peak cable speed derives from the gearmotor."""

    gear_ratio: float = 47.0
    no_load_rpm: float = 5400.0
    spool_radius_mm: float = 2.0
    time_constant_s: float = 0.025
    travel_mm: float = 55.0
    tension_cap_n: float = TENSION_CAP_N

    @property
    def max_speed_mm_s(self) -> float:
        output_rps = self.no_load_rpm / self.gear_ratio / 60.0
        return output_rps * 2.0 * math.pi * self.spool_radius_mm


@dataclass(frozen=True)
class MotorState:
    excursion_mm: float
    velocity_mm_s: float = 0.0
    effort: float = 0.0
    tension_n: float = 0.0


@dataclass(frozen=True)
class HandPlant:
    """Four-digit tendon-finger system: parameters plus current joint angles.

    Arrays are shaped (4 digits, 2 joints) ordered index..little x (MCP, PIP).
    Stiffness acts about the flexed rest pose, which stands in for resting
    flexor tone: multiplying ``stiffness_nmm_deg`` models higher spasticity
    grades resisting extension harder.
    """

    angles_deg: np.ndarray
    rest_deg: np.ndarray
    max_deg: np.ndarray
    stiffness_nmm_deg: np.ndarray
    damping_nmm_s_deg: np.ndarray
    moment_arm_mm: np.ndarray
    tendon_stiffness_n_mm: float = 40.0

    def __post_init__(self) -> None:
        for name in ("angles_deg", "rest_deg", "max_deg", "stiffness_nmm_deg",
                     "damping_nmm_s_deg", "moment_arm_mm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (len(DIGITS), len(JOINTS)):
                raise ValueError(f"{name} must have shape (4, 2)")
            object.__setattr__(self, name, arr)
        if np.any(self.angles_deg < 0.0) or np.any(self.angles_deg > self.max_deg):
            raise ValueError("joint angles outside [0, max]")
        if np.any(self.stiffness_nmm_deg < 0.0) or np.any(self.damping_nmm_s_deg <= 0.0):
            raise ValueError("stiffness must be >= 0 and damping > 0")
        if self.tendon_stiffness_n_mm <= 0.0:
            raise ValueError("tendon stiffness must be positive")

    def cable_take_up_mm(self) -> np.ndarray:
        """Cable length absorbed by each digit's flexion."""
        return (self.moment_arm_mm * self.angles_deg * _DEG2RAD).sum(axis=1)

    def flat_angles(self) -> list[float]:
        return [float(v) for v in self.angles_deg.reshape(-1)]


_DIGIT_SCALE = np.array([1.0, 1.05, 0.95, 0.85])
_JOINT_SCALE = np.array([0.88, 1.0])  # fingertip component enlarges the PIP arm
_BASE_ARM_MM = {"S": 11.0, "M": 13.0, "L": 15.0}

#: Modified Ashworth grade to stiffness multiplier.
MAS_STIFFNESS = {"0": 1.0, "1": 2.0, "1+": 3.0, "2": 4.0}


def default_plant(
    hand_size: str = "M",
    stiffness_scale: float = 1.0,
    angles_deg: np.ndarray | None = None,
) -> HandPlant:
    """Nominal plant for a glove size, optionally scaled for spasticity grade."""
    if hand_size not in _BASE_ARM_MM:
        raise ValueError(f"unknown hand size {hand_size!r}; expected one of S, M, L")
    if stiffness_scale <= 0.0:
        raise ValueError("stiffness scale must be positive")
    arm = _BASE_ARM_MM[hand_size] * np.outer(_DIGIT_SCALE, _JOINT_SCALE)
    rest = np.tile(np.array([55.0, 65.0]), (len(DIGITS), 1))
    qmax = np.tile(np.array([90.0, 100.0]), (len(DIGITS), 1))
    stiffness = stiffness_scale * np.tile(np.array([1.3, 1.1]), (len(DIGITS), 1))
    damping = np.tile(np.array([2.2, 1.8]), (len(DIGITS), 1))
    if angles_deg is None:
        angles_deg = rest.copy()
    return HandPlant(
        angles_deg=np.asarray(angles_deg, dtype=float),
        rest_deg=rest,
        max_deg=qmax,
        stiffness_nmm_deg=stiffness,
        damping_nmm_s_deg=damping,
        moment_arm_mm=arm,
    )


def flexed_plant(hand_size: str = "M", stiffness_scale: float = 1.0) -> HandPlant:
    """Plant with every joint at its flexion stop."""
    p = default_plant(hand_size, stiffness_scale)
    return replace(p, angles_deg=p.max_deg.copy())


def step_plant(
    plant: HandPlant,
    motor: MotorState,
    dt: float,
    voluntary_nmm: float = 0.0,
) -> tuple[HandPlant, MotorState]:
    """Advance the finger plant one tick under the current cable excursion.

    Per digit, cable stretch is take-up minus paid-out excursion; positive
    stretch makes tension through the series cable stiffness. Total tension
    is capped at the force limit and redistributed pro rata. Per joint:
    torque = -tension * moment arm + stiffness * (rest - angle) + voluntary,
    first-order rate = torque / damping, then integrate and clamp to
    [0, max] (hyperextension block at zero, flexion stop at max).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    take_up = plant.cable_take_up_mm()
    stretch = take_up - motor.excursion_mm
    tension = plant.tendon_stiffness_n_mm * np.maximum(stretch, 0.0)
    total = float(tension.sum())
    cap = TENSION_CAP_N
    if total > cap:
        tension *= cap / total
        total = cap

    torque = (
        -tension[:, None] * plant.moment_arm_mm
        + plant.stiffness_nmm_deg * (plant.rest_deg - plant.angles_deg)
        + voluntary_nmm
    )
    rate = torque / plant.damping_nmm_s_deg
    angles = np.clip(plant.angles_deg + rate * dt, 0.0, plant.max_deg)
    return replace(plant, angles_deg=angles), replace(motor, tension_n=total)


def step_motor(motor: MotorState, effort: float, params: MotorParams, dt: float) -> MotorState:
    """First-order velocity response toward effort * max speed, travel-limited."""
    target = effort * params.max_speed_mm_s
    velocity = motor.velocity_mm_s + (target - motor.velocity_mm_s) * dt / params.time_constant_s
    excursion = motor.excursion_mm + velocity * dt
    if excursion < 0.0:
        excursion, velocity = 0.0, 0.0
    elif excursion > params.travel_mm:
        excursion, velocity = params.travel_mm, 0.0
    return replace(motor, excursion_mm=excursion, velocity_mm_s=velocity, effort=effort)


def passive_energy(plant: HandPlant, motor: MotorState) -> float:
    """Lyapunov functional for the passive plant (fixed excursion, no inputs).

    Joint-tone term plus cable-stretch term in consistent units; first-order
    damped dynamics descend this function, which the passivity test checks.
    """
    tone = 0.5 * plant.stiffness_nmm_deg * (plant.angles_deg - plant.rest_deg) ** 2
    stretch = np.maximum(plant.cable_take_up_mm() - motor.excursion_mm, 0.0)
    cable = 0.5 * plant.tendon_stiffness_n_mm * stretch**2 / _DEG2RAD
    return float(tone.sum() + cable.sum())


# ---------------------------------------------------------------------------
# Intent-to-setpoint state machine

FSM_STATES = ("IDLE", "EXTENDING", "HOLD_OPEN", "RELEASING", "HOLD_CLOSED")

#: Excursion tolerance for declaring a setpoint reached, mm.
SETPOINT_TOL_MM = 0.25


@dataclass(frozen=True)
class ControllerState:
    fsm: str = "IDLE"
    setpoint_mm: float | None = None
    pid: PidState = field(default_factory=PidState)


def select_setpoint(
    intent: IntentLabel,
    state: ControllerState,
    rom: RomCalibration,
) -> ControllerState:
    """Map an intent to a setpoint: OPEN retracts, CLOSE extends, RELAX holds."""
    if intent is IntentLabel.OPEN:
        if state.setpoint_mm != rom.retracted_mm:
            return replace(state, fsm="EXTENDING", setpoint_mm=rom.retracted_mm)
        return state
    if intent is IntentLabel.CLOSE:
        if state.setpoint_mm != rom.extended_mm:
            return replace(state, fsm="RELEASING", setpoint_mm=rom.extended_mm)
        return state
    return state  # RELAX: hold whatever was commanded


def _settle_fsm(state: ControllerState, motor: MotorState, rom: RomCalibration) -> ControllerState:
    if state.setpoint_mm is None:
        return state
    if abs(motor.excursion_mm - state.setpoint_mm) <= SETPOINT_TOL_MM:
        if state.setpoint_mm == rom.retracted_mm and state.fsm == "EXTENDING":
            return replace(state, fsm="HOLD_OPEN")
        if state.setpoint_mm == rom.extended_mm and state.fsm == "RELEASING":
            return replace(state, fsm="HOLD_CLOSED")
    return state


@dataclass(frozen=True)
class TrajectoryTick:
    t: float
    intent: IntentLabel
    fsm: str
    setpoint_mm: float | None
    excursion_mm: float
    tension_n: float
    angles_deg: tuple[float, ...]
    velocity_mm_s: float
    effort: float


@dataclass
class TrajectoryLog:
    dt: float
    ticks: list[TrajectoryTick] = field(default_factory=list)

    def to_jsonl(self) -> str:
        header = {"schema": TRAJECTORY_SCHEMA, "dt_s": self.dt, "joints": [f"{d}_{j}" for d in DIGITS for j in JOINTS]}
        lines = [json.dumps(header, separators=(",", ":"))]
        for tick in self.ticks:
            lines.append(json.dumps(
                {
                    "t": tick.t,
                    "intent": str(tick.intent),
                    "fsm": tick.fsm,
                    "sp": tick.setpoint_mm,
                    "x": tick.excursion_mm,
                    "F": tick.tension_n,
                    "q": list(tick.angles_deg),
                },
                separators=(",", ":"),
            ))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


def run_episode(
    intents: Sequence[tuple[float, IntentLabel]],
    duration_s: float,
    rom: RomCalibration,
    gains: PidGains = DEFAULT_GAINS,
    plant: HandPlant | None = None,
    motor_params: MotorParams | None = None,
    dt: float = CONTROL_DT_S,
    voluntary_nmm: float | Callable[[float], float] = 0.0,
    initial_motor: MotorState | None = None,
) -> TrajectoryLog:
    """Run the control loop over a timestamped intent stream.

    ``intents`` is consumed as an ordered stream; at each tick the latest
    label with timestamp <= t applies (RELAX before the first event). The
    pull-based consumption gives natural backpressure when the stream comes
    from a live producer. Raises SafetyAbort (with the partial log attached)
    if the state goes non-finite or breaches the tension cap or the
    hyperextension block.
    """
    if duration_s <= 0.0:
        raise ValueError("duration must be positive")
    plant = plant if plant is not None else default_plant()
    motor_params = motor_params if motor_params is not None else MotorParams()
    motor = initial_motor if initial_motor is not None else MotorState(
        excursion_mm=min(plant.cable_take_up_mm().max(), motor_params.travel_mm)
    )
    voluntary = voluntary_nmm if callable(voluntary_nmm) else (lambda _t, v=voluntary_nmm: v)

    events = sorted(intents, key=lambda e: e[0])
    state = ControllerState()
    log = TrajectoryLog(dt=dt)
    n = int(round(duration_s / dt))
    ev = 0
    intent = IntentLabel.RELAX
    for i in range(n):
        t = i * dt
        while ev < len(events) and events[ev][0] <= t:
            intent = events[ev][1]
            ev += 1
        state = select_setpoint(intent, state, rom)
        if state.setpoint_mm is None:
            effort = 0.0
        else:
            effort, pid = pid_step(gains, state.setpoint_mm, motor.excursion_mm, dt, state.pid)
            state = replace(state, pid=pid)
        motor = step_motor(motor, effort, motor_params, dt)
        plant, motor = step_plant(plant, motor, dt, voluntary(t))
        state = _settle_fsm(state, motor, rom)

        log.ticks.append(TrajectoryTick(
            t=t,
            intent=intent,
            fsm=state.fsm,
            setpoint_mm=state.setpoint_mm,
            excursion_mm=motor.excursion_mm,
            tension_n=motor.tension_n,
            angles_deg=tuple(plant.flat_angles()),
            velocity_mm_s=motor.velocity_mm_s,
            effort=effort,
        ))

        angles = plant.angles_deg
        if not (np.all(np.isfinite(angles)) and math.isfinite(motor.excursion_mm)):
            raise SafetyAbort(f"non-finite state at t={t:.3f}", log)
        if motor.tension_n > TENSION_CAP_N + 1e-9:
            raise SafetyAbort(f"tension cap breached at t={t:.3f}: {motor.tension_n:.2f} N", log)
        if np.any(angles < -1e-9):
            raise SafetyAbort(f"hyperextension block breached at t={t:.3f}", log)
    return log


def count_direction_reversals(log: TrajectoryLog, min_speed_mm_s: float = 0.5) -> int:
    """Number of motor direction flips, ignoring speeds below the dead band."""
    reversals = 0
    last_sign = 0
    for tick in log.ticks:
        v = tick.velocity_mm_s
        if abs(v) < min_speed_mm_s:
            continue
        sign = 1 if v > 0 else -1
        if last_sign and sign != last_sign:
            reversals += 1
        last_sign = sign
    return reversals


def time_to_open(log: TrajectoryLog, threshold_deg: float = OPEN_THRESHOLD_DEG) -> float | None:
    """First time every joint stays below the open threshold, if reached."""
    for tick in log.ticks:
        if max(tick.angles_deg) < threshold_deg:
            return tick.t
    return None
