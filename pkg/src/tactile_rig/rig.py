"""Deterministic delta-robot rig simulation on a virtual clock.

The end effector is a point in Cartesian space; moves are straight segments
at constant velocity.  Time is integer ticks of :data:`CLOCK_QUANTUM`
seconds, so full sessions run in milliseconds and timestamps are stable
across runs.  Contact with the participant's finger is a linear spring on
the vertical force channel; the other five channels carry sensor noise only.

All operations are pure: they take a :class:`RigState` and return a new one.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .config import Pose3, Threshold

CLOCK_QUANTUM = 0.01  # s per virtual-clock tick
WORKSPACE_BOUND = 0.5  # m per axis
STEPS_PER_MM = 363.0  # stepper calibration: commanded steps per millimeter
MAX_PIN_SEPARATION = 0.01  # m

# Serialized precision; samples are quantized at creation so that archives
# round-trip exactly.
_CHANNEL_DECIMALS = 6
_TIME_DECIMALS = 3


class RigError(Exception):
    """Base class for rig failures."""


class LifecycleError(RigError):
    """Motion was commanded before the rig was initialised and checked."""


class WorkspaceError(RigError):
    """The motion target leaves the permitted workspace."""


class StepperError(RigError):
    """The stepper command is out of range."""


@dataclass(frozen=True)
class RigState:
    """Snapshot of the simulated rig.

    ``sim_ticks`` counts virtual-clock quanta; it never decreases.
    """

    effector_pose: Pose3 = Pose3(0.0, 0.0, 0.0)
    stepper_separation: float = 0.0
    sim_ticks: int = 0
    powered: bool = False
    initialised: bool = False
    checked: bool = False

    @property
    def sim_time(self) -> float:
        return round(self.sim_ticks * CLOCK_QUANTUM, _TIME_DECIMALS)

    @property
    def ready(self) -> bool:
        return self.initialised and self.checked


@dataclass(frozen=True)
class FingerModel:
    """Spring-contact model of the participant's fingertip.

    The fingertip is a horizontal surface at ``surface_height`` spanning
    ``center_y`` +/- ``half_width`` laterally.  Pressing below the surface
    produces a restoring vertical force ``-stiffness * penetration``.
    """

    surface_height: float = -0.085  # m; 1 cm below the default poke start
    center_y: float = 0.0
    half_width: float = 0.03  # m; covers both pin presentation offsets
    stiffness: float = 500.0  # N/m
    noise_std_force: float = 0.01  # N
    noise_std_torque: float = 0.001  # N*m

    @classmethod
    def absent(cls, base: "FingerModel | None" = None) -> "FingerModel":
        """A finger the rig can never reach (sensor noise only)."""
        base = base or cls()
        return replace(base, surface_height=-1000.0)


DEFAULT_FINGER = FingerModel()


@dataclass(frozen=True)
class FtSample:
    """One six-channel force-torque reading."""

    touched: bool
    timestamp: float  # s
    fx: float
    fy: float
    fz: float
    tx: float
    ty: float
    tz: float

    def channels(self) -> tuple[float, float, float, float, float, float]:
        return (self.fx, self.fy, self.fz, self.tx, self.ty, self.tz)

    def console_line(self) -> str:
        flag = "TRUE" if self.touched else "FALSE"
        values = " ".join(f"[{v:.6f}]" for v in self.channels())
        return f"FT [touched={flag}] [{self.timestamp:.3f}] {values}"


@dataclass(frozen=True)
class FtRecording:
    """A fixed-length window of samples taken at the poke stop pose."""

    samples: tuple[FtSample, ...]
    touched: bool


@dataclass(frozen=True)
class PokeResult:
    recording: FtRecording
    stop_pose: Pose3
    stopped_on_contact: bool
    # In-motion samples taken while descending, for diagnostics; the last one
    # is the sample that triggered the stop when stopped_on_contact is set.
    descent_samples: tuple[FtSample, ...] = ()


def _duration_ticks(seconds: float) -> int:
    """Smallest tick count covering ``seconds`` (always at least one tick)."""
    return max(1, math.ceil(seconds / CLOCK_QUANTUM - 1e-6))


def power_on(state: RigState) -> RigState:
    return replace(state, powered=True)


def initialise(state: RigState) -> RigState:
    """Instant in simulation; mirrors the real rig's initialisation step."""
    if not state.powered:
        raise LifecycleError("rig is not powered on")
    return replace(state, initialised=True)


def check(state: RigState) -> RigState:
    if not state.initialised:
        raise LifecycleError("rig is not initialised")
    return replace(state, checked=True)


def _require_ready(state: RigState) -> None:
    if not state.ready:
        raise LifecycleError("rig is not initialised and checked")


def _check_workspace(pose: Pose3) -> None:
    for axis, value in zip(("v1", "v2", "v3"), pose.components()):
        if not math.isfinite(value):
            raise WorkspaceError(f"target {axis} is not finite")
        if abs(value) > WORKSPACE_BOUND:
            raise WorkspaceError(
                f"target {axis}={value} outside workspace bound +/-{WORKSPACE_BOUND} m"
            )


def move_relative(state: RigState, delta: Pose3, min_duration: float) -> RigState:
    """Advance the effector by ``delta`` over at least ``min_duration`` seconds."""
    _require_ready(state)
    target = state.effector_pose + delta
    _check_workspace(target)
    return replace(
        state,
        effector_pose=target,
        sim_ticks=state.sim_ticks + _duration_ticks(min_duration),
    )


def move_global(state: RigState, target: Pose3, min_duration: float) -> RigState:
    """Move the effector to an absolute pose over at least ``min_duration`` seconds."""
    _require_ready(state)
    _check_workspace(target)
    return replace(
        state,
        effector_pose=target,
        sim_ticks=state.sim_ticks + _duration_ticks(min_duration),
    )


def set_stepper(state: RigState, separation: float) -> RigState:
    """Command the pin separation; instantaneous (the operator does the waiting)."""
    if not 0.0 <= separation <= MAX_PIN_SEPARATION:
        raise StepperError(
            f"separation {separation} outside [0, {MAX_PIN_SEPARATION}] m"
        )
    return replace(state, stepper_separation=separation)


def stepper_steps(distance: float) -> float:
    """Stepper steps for a pin separation in meters (363 steps per mm)."""
    if distance < 0:
        raise StepperError(f"distance must be >= 0, got {distance}")
    return distance * 1000.0 * STEPS_PER_MM


def sample_ft(state: RigState, finger: FingerModel, rng: random.Random) -> FtSample:
    """Read the FT sensor at the current pose.

    The touched flag is always False here: whether a motion stopped on
    contact is a property of the motion, stamped by :func:`execute_poke`.
    """
    _require_ready(state)
    pose = state.effector_pose
    penetration = 0.0
    if abs(pose.v2 - finger.center_y) <= finger.half_width:
        penetration = max(0.0, finger.surface_height - pose.v3)
    fx = rng.gauss(0.0, finger.noise_std_force)
    fy = rng.gauss(0.0, finger.noise_std_force)
    fz = -finger.stiffness * penetration + rng.gauss(0.0, finger.noise_std_force)
    tx = rng.gauss(0.0, finger.noise_std_torque)
    ty = rng.gauss(0.0, finger.noise_std_torque)
    tz = rng.gauss(0.0, finger.noise_std_torque)
    return FtSample(
        touched=False,
        timestamp=state.sim_time,
        fx=round(fx, _CHANNEL_DECIMALS),
        fy=round(fy, _CHANNEL_DECIMALS),
        fz=round(fz, _CHANNEL_DECIMALS),
        tx=round(tx, _CHANNEL_DECIMALS),
        ty=round(ty, _CHANNEL_DECIMALS),
        tz=round(tz, _CHANNEL_DECIMALS),
    )


def detect_contact(sample: FtSample, threshold: Threshold) -> bool:
    """True when any channel magnitude reaches its threshold (boundary counts)."""
    return any(
        abs(value) >= limit
        for value, limit in zip(sample.channels(), threshold.channels())
    )


def execute_poke(
    state: RigState,
    poking: Pose3,
    poking_duration: float,
    threshold: Threshold,
    finger: FingerModel,
    event_time_wait: float,
    number_ftdata_recordings: int,
    rng: random.Random,
) -> tuple[RigState, PokeResult]:
    """Descend along ``poking``, stop on first contact, then record.

    The effector moves at constant velocity so the full vector takes
    ``poking_duration``; the FT sensor is polled every ``event_time_wait``.
    The first poll that satisfies :func:`detect_contact` halts the motion.
    Afterwards exactly ``number_ftdata_recordings`` samples are collected at
    ``event_time_wait`` intervals at the stop pose, each stamped with the
    touched flag of the motion.
    """
    _require_ready(state)
    _check_workspace(state.effector_pose + poking)

    start_pose = state.effector_pose
    poll_ticks = _duration_ticks(event_time_wait)
    total_ticks = _duration_ticks(poking_duration)
    n_polls = total_ticks // poll_ticks

    pose = start_pose
    ticks = state.sim_ticks
    stopped = False
    descent: list[FtSample] = []
    for k in range(1, n_polls + 1):
        ticks += poll_ticks
        fraction = (k * poll_ticks) / total_ticks
        pose = Pose3(
            start_pose.v1 + poking.v1 * fraction,
            start_pose.v2 + poking.v2 * fraction,
            start_pose.v3 + poking.v3 * fraction,
        )
        probe = replace(state, effector_pose=pose, sim_ticks=ticks)
        sample = sample_ft(probe, finger, rng)
        descent.append(sample)
        if detect_contact(sample, threshold):
            stopped = True
            break
    else:
        # No contact: complete the motion, including any residual sub-poll time.
        if n_polls * poll_ticks < total_ticks:
            ticks = state.sim_ticks + total_ticks
        pose = start_pose + poking

    recorded: list[FtSample] = []
    for _ in range(number_ftdata_recordings):
        ticks += poll_ticks
        probe = replace(state, effector_pose=pose, sim_ticks=ticks)
        sample = sample_ft(probe, finger, rng)
        recorded.append(replace(sample, touched=stopped))

    new_state = replace(state, effector_pose=pose, sim_ticks=ticks)
    result = PokeResult(
        recording=FtRecording(samples=tuple(recorded), touched=stopped),
        stop_pose=pose,
        stopped_on_contact=stopped,
        descent_samples=tuple(descent),
    )
    return new_state, result
