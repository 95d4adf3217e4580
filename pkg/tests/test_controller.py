"""Actuation: PID, motor, finger plant, safety envelope, episode loop."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exobench import controller
from exobench.controller import (
    DEFAULT_GAINS,
    TENSION_CAP_N,
    ControllerState,
    HandPlant,
    MotorParams,
    MotorState,
    PidGains,
    PidState,
    RomCalibration,
    SafetyAbort,
    TrajectoryLog,
    TrajectoryTick,
    calibrate_rom,
    count_direction_reversals,
    default_plant,
    flexed_plant,
    passive_energy,
    pid_step,
    run_episode,
    select_setpoint,
    step_motor,
    step_plant,
    time_to_open,
)
from exobench.signals import IntentLabel

OPEN, RELAX, CLOSE = IntentLabel.OPEN, IntentLabel.RELAX, IntentLabel.CLOSE


class TestRom:
    def test_size_table(self):
        assert calibrate_rom("S").extended_mm == 38.0
        assert calibrate_rom("M").extended_mm == 45.0
        assert calibrate_rom("L").extended_mm == 52.0
        assert calibrate_rom("M").retracted_mm == 0.0

    def test_unknown_size(self):
        with pytest.raises(ValueError, match="hand size"):
            calibrate_rom("XXL")


class TestPid:
    def test_proportional_only_effort(self):
        gains = PidGains(kp=1.0)
        effort, _state = pid_step(gains, setpoint=1.0, measured=0.5, dt=0.005, state=PidState())
        assert effort == 0.5

    def test_output_clamp(self):
        gains = PidGains(kp=10.0, output_clamp=1.0)
        effort, _state = pid_step(gains, 1.0, 0.0, 0.005, PidState())
        assert effort == 1.0
        effort, _state = pid_step(gains, -1.0, 0.0, 0.005, PidState())
        assert effort == -1.0

    def test_conditional_integration_freezes_when_saturated(self):
        gains = PidGains(kp=10.0, ki=1.0, output_clamp=1.0)
        state = PidState()
        for _ in range(200):
            _effort, state = pid_step(gains, 1.0, 0.0, 0.005, state)
        # Saturated in the error's direction the whole time: no windup at all.
        assert state.integral == 0.0

    def test_integral_accumulates_when_unsaturated(self):
        gains = PidGains(kp=0.1, ki=1.0)
        _effort, state = pid_step(gains, 1.0, 0.5, 0.01, PidState())
        assert state.integral == pytest.approx(0.005)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError, match="dt"):
            pid_step(PidGains(kp=1.0), 0.0, 0.0, 0.0, PidState())

    def test_rejects_negative_gains(self):
        with pytest.raises(ValueError, match="non-negative"):
            PidGains(kp=-0.1)

    def test_default_gains_are_proportional_only(self):
        assert DEFAULT_GAINS.ki == 0.0
        assert DEFAULT_GAINS.kd == 0.0


class TestMotor:
    def test_max_speed_from_drivetrain(self):
        params = MotorParams()
        expected = params.no_load_rpm / params.gear_ratio / 60.0 * 2.0 * math.pi * params.spool_radius_mm
        assert params.max_speed_mm_s == pytest.approx(expected)
        assert params.max_speed_mm_s == pytest.approx(24.0633, abs=1e-3)

    def test_gear_ratio_pinned(self):
        assert MotorParams().gear_ratio == 47.0

    def test_velocity_lag_approaches_target(self):
        params = MotorParams()
        motor = MotorState(excursion_mm=10.0)
        for _ in range(200):
            motor = step_motor(motor, 0.5, params, 0.005)
        assert motor.velocity_mm_s == pytest.approx(0.5 * params.max_speed_mm_s, rel=1e-3)

    def test_travel_stops(self):
        params = MotorParams()
        motor = MotorState(excursion_mm=0.5)
        for _ in range(100):
            motor = step_motor(motor, -1.0, params, 0.005)
        assert motor.excursion_mm == 0.0
        assert motor.velocity_mm_s == 0.0
        motor = MotorState(excursion_mm=params.travel_mm - 0.5)
        for _ in range(100):
            motor = step_motor(motor, 1.0, params, 0.005)
        assert motor.excursion_mm == params.travel_mm


class TestPlant:
    def test_rest_pose_with_slack_cable_is_equilibrium(self):
        plant = default_plant("M")
        motor = MotorState(excursion_mm=float(plant.cable_take_up_mm().max()))
        stepped, stepped_motor = step_plant(plant, motor, 0.005)
        assert np.array_equal(stepped.angles_deg, plant.angles_deg)
        assert stepped_motor.tension_n == 0.0

    def test_tension_cap_is_exact_and_pro_rata(self):
        plant = flexed_plant("M", 4.0)
        motor = MotorState(excursion_mm=0.0)
        take_up = plant.cable_take_up_mm()
        raw = plant.tendon_stiffness_n_mm * np.maximum(take_up, 0.0)
        assert raw.sum() > TENSION_CAP_N
        _plant, stepped = step_plant(plant, motor, 0.005)
        assert stepped.tension_n == TENSION_CAP_N

    def test_hyperextension_block(self):
        plant = default_plant("M", angles_deg=np.full((4, 2), 1.0))
        motor = MotorState(excursion_mm=0.0)
        for _ in range(400):
            plant, motor = step_plant(plant, motor, 0.005, voluntary_nmm=-5000.0)
        assert np.all(plant.angles_deg >= 0.0)
        assert np.any(plant.angles_deg == 0.0)

    def test_flexion_stop(self):
        plant = default_plant("M")
        motor = MotorState(excursion_mm=float(plant.cable_take_up_mm().max()))
        for _ in range(400):
            plant, motor = step_plant(plant, motor, 0.005, voluntary_nmm=5000.0)
        assert np.all(plant.angles_deg <= plant.max_deg)

    def test_spasticity_scales_stiffness(self):
        mild = default_plant("M", stiffness_scale=1.0)
        severe = default_plant("M", stiffness_scale=4.0)
        assert np.array_equal(severe.stiffness_nmm_deg, 4.0 * mild.stiffness_nmm_deg)

    @given(st.integers(0, 2**32 - 1))
    def test_passive_energy_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        angles = rng.uniform(0.0, 88.0, size=(4, 2))
        angles[:, 1] = np.minimum(angles[:, 1], 98.0)
        plant = default_plant("M", float(rng.uniform(1.0, 4.0)), angles_deg=angles)
        motor = MotorState(excursion_mm=float(rng.uniform(0.0, 50.0)))
        energy = passive_energy(plant, motor)
        for _ in range(20):
            plant, motor = step_plant(plant, motor, 0.005)
            next_energy = passive_energy(plant, motor)
            assert next_energy <= energy + 1e-9
            energy = next_energy

    def test_unknown_hand_size(self):
        with pytest.raises(ValueError, match="hand size"):
            default_plant("XL")


class TestSetpointSelection:
    ROM = RomCalibration(retracted_mm=0.0, extended_mm=45.0)

    def test_open_commands_retraction(self):
        state = select_setpoint(OPEN, ControllerState(), self.ROM)
        assert state.setpoint_mm == 0.0
        assert state.fsm == "EXTENDING"

    def test_close_commands_extension(self):
        state = select_setpoint(CLOSE, ControllerState(), self.ROM)
        assert state.setpoint_mm == 45.0
        assert state.fsm == "RELEASING"

    def test_relax_holds_current_command(self):
        state = select_setpoint(CLOSE, ControllerState(), self.ROM)
        held = select_setpoint(RELAX, state, self.ROM)
        assert held == state

    def test_relax_before_any_command_has_no_setpoint(self):
        state = select_setpoint(RELAX, ControllerState(), self.ROM)
        assert state.setpoint_mm is None
        assert state.fsm == "IDLE"


class TestEpisode:
    def test_default_open_time_hits_device_figure(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, OPEN)], 2.5, rom, plant=flexed_plant("M"))
        opened = time_to_open(log)
        assert opened is not None
        assert 1.62 <= opened <= 1.98

    def test_safety_envelope_holds_throughout(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, OPEN), (2.5, CLOSE)], 5.0, rom, plant=flexed_plant("M", 4.0))
        for tick in log.ticks:
            assert tick.tension_n <= TENSION_CAP_N + 1e-9
            assert min(tick.angles_deg) >= 0.0

    def test_round_trip_has_single_reversal(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, OPEN), (2.5, CLOSE)], 5.0, rom, plant=flexed_plant("M"))
        assert count_direction_reversals(log) == 1

    def test_relax_only_parks_the_motor(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, RELAX)], 1.0, rom, plant=flexed_plant("M"))
        xs = {tick.excursion_mm for tick in log.ticks}
        assert len(xs) == 1
        assert count_direction_reversals(log) == 0
        assert all(tick.effort == 0.0 for tick in log.ticks)
        assert all(tick.fsm == "IDLE" for tick in log.ticks)

    def test_episode_is_deterministic(self):
        rom = calibrate_rom("L")
        a = run_episode([(0.0, OPEN), (2.0, CLOSE)], 4.0, rom, plant=flexed_plant("L", 2.0))
        b = run_episode([(0.0, OPEN), (2.0, CLOSE)], 4.0, rom, plant=flexed_plant("L", 2.0))
        assert a.to_jsonl() == b.to_jsonl()

    def test_settles_into_hold_states(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, OPEN), (2.5, CLOSE)], 5.0, rom, plant=flexed_plant("M"))
        assert log.ticks[-1].fsm == "HOLD_CLOSED"
        assert any(tick.fsm == "HOLD_OPEN" for tick in log.ticks)

    def test_non_finite_disturbance_aborts_with_partial_log(self):
        rom = calibrate_rom("M")

        def disturbance(t: float) -> float:
            return math.nan if t > 0.5 else 0.0

        with pytest.raises(SafetyAbort, match="non-finite") as excinfo:
            run_episode([(0.0, OPEN)], 2.0, rom, plant=flexed_plant("M"), voluntary_nmm=disturbance)
        assert len(excinfo.value.log.ticks) > 0
        assert excinfo.value.log.ticks[-1].t >= 0.5

    def test_close_never_opens(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, CLOSE)], 1.0, rom, plant=flexed_plant("M"))
        assert time_to_open(log) is None

    def test_rejects_non_positive_duration(self):
        with pytest.raises(ValueError, match="duration"):
            run_episode([], 0.0, calibrate_rom("M"))

    def test_trajectory_jsonl_round_numbers(self):
        rom = calibrate_rom("M")
        log = run_episode([(0.0, OPEN)], 0.1, rom, plant=flexed_plant("M"))
        text = log.to_jsonl()
        lines = text.strip().split("\n")
        assert len(lines) == 1 + len(log.ticks)
        assert '"schema": "exobench/trajectory-v1"' in lines[0].replace('":"', '": "')


class TestReversalCounting:
    def _log(self, velocities):
        ticks = [
            TrajectoryTick(
                t=i * 0.005, intent=RELAX, fsm="IDLE", setpoint_mm=None,
                excursion_mm=0.0, tension_n=0.0, angles_deg=(0.0,) * 8,
                velocity_mm_s=v, effort=0.0,
            )
            for i, v in enumerate(velocities)
        ]
        return TrajectoryLog(dt=0.005, ticks=ticks)

    def test_dead_band_suppresses_dither(self):
        assert count_direction_reversals(self._log([0.3, -0.3, 0.4, -0.2])) == 0

    def test_counts_real_flips(self):
        assert count_direction_reversals(self._log([1.0, 1.2, -1.0, 0.9])) == 2

    def test_slow_crossing_between_fast_legs_ignored(self):
        assert count_direction_reversals(self._log([2.0, 0.1, 2.0])) == 0
