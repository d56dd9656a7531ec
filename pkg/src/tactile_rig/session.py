"""The demo session as an explicit state machine.

A session walks one participant through intake, a move to the home pose,
and the full trial sequence.  Deliberate pauses (break-points) require the
operator to confirm before the rig moves; every completed trial is persisted
immediately so a crash loses nothing.  All operator-facing text is generated
here and nowhere else.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from . import persistence, rig
from .config import DemoConfig, Pose3, validate_config
from .records import Gender, Participant, Response, TrialRecord, response_correct
from .rig import FingerModel, FtRecording, FtSample, RigState
from .scheduler import (
    NO_STEPPER_POSES_MSG,
    TrialLabel,
    TrialPlan,
    TrialScheduler,
)

# Offset applied to the two-pin lateral motion so the pin pair stays centered
# on the finger as the separation grows.
TWO_PIN_OFFSET_FACTOR = -0.5

# Noise stream is decoupled from the scheduler stream so adding trials never
# perturbs the force readings of earlier ones.
_NOISE_SEED_OFFSET = 0x9E3779B9


class SessionError(Exception):
    pass


class PhaseMismatchError(SessionError):
    """The submitted event is not legal in the current phase."""


class Phase(enum.Enum):
    AWAIT_DEBUG_CHOICE = "AwaitDebugChoice"
    INTAKE = "Intake"
    AWAIT_INIT_CONFIRM = "AwaitInitConfirm"
    MOVING_TO_INIT = "MovingToInit"
    AWAIT_STEPPER_MOVE = "AwaitStepperMove"
    PRESENTING_FIRST = "PresentingFirst"
    PRESENTING_SECOND = "PresentingSecond"
    AWAIT_RESPONSE = "AwaitResponse"
    TRIAL_COMPLETE = "TrialComplete"
    SESSION_COMPLETE = "SessionComplete"
    CANCELLED = "Cancelled"


TERMINAL_PHASES = (Phase.SESSION_COMPLETE, Phase.CANCELLED)


@dataclass(frozen=True)
class Confirm:
    yes: bool


@dataclass(frozen=True)
class TextInput:
    text: str


@dataclass(frozen=True)
class SelectOption:
    option: str  # First | Second | Female | Male


@dataclass(frozen=True)
class Escape:
    pass


OperatorEvent = Union[Confirm, TextInput, SelectOption, Escape]


def event_to_dict(ev: OperatorEvent) -> dict:
    if isinstance(ev, Confirm):
        return {"kind": "confirm", "yes": ev.yes}
    if isinstance(ev, TextInput):
        return {"kind": "text", "text": ev.text}
    if isinstance(ev, SelectOption):
        return {"kind": "select", "option": ev.option}
    if isinstance(ev, Escape):
        return {"kind": "escape"}
    raise TypeError(f"not an operator event: {ev!r}")


def event_from_dict(data: dict) -> OperatorEvent:
    kind = data.get("kind")
    if kind == "confirm":
        return Confirm(yes=bool(data["yes"]))
    if kind == "text":
        return TextInput(text=str(data["text"]))
    if kind == "select":
        return SelectOption(option=str(data["option"]))
    if kind == "escape":
        return Escape()
    raise ValueError(f"unknown command kind: {kind!r}")


# Operator console wording.  These strings are the operator contract; tests
# pin them byte for byte.
PROMPT_DEBUG_CHOICE = "Debug mode: YES (Continue Y/N)"
PROMPT_ENTER_ID = "Enter unique ID: "
PROMPT_ENTER_NAME = "Enter participant name: "
PROMPT_ENTER_SURNAME = "Enter participant surname: "
PROMPT_ENTER_AGE = "Enter participant age: "
PROMPT_GENDER = "Gender: {option}"
PROMPT_ENTER_NOTES = "Enter participant notes: "
PROMPT_MOVE_TO_INIT = "[DEMO]: moving to init pose (Continue Y/N)"
PROMPT_RESPONSE = "[Demo] Response: First"
MSG_NO_STEPPER_POSES = NO_STEPPER_POSES_MSG
MSG_TYPING_NOT_ALLOWED = "Typing is not allowed"
MSG_CANCELLED = "[DEMO]: demo cancelled"
MSG_COMPLETED = "[DEMO]: demo completed"

INTAKE_FIELDS = ("id", "name", "surname", "age", "gender", "notes")

_INTAKE_PROMPTS = {
    "id": PROMPT_ENTER_ID,
    "name": PROMPT_ENTER_NAME,
    "surname": PROMPT_ENTER_SURNAME,
    "age": PROMPT_ENTER_AGE,
    "gender": PROMPT_GENDER.format(option=Gender.FEMALE.display),
    "notes": PROMPT_ENTER_NOTES,
}

AGE_MIN, AGE_MAX = 18, 120


def stepper_prompt(distance: float) -> str:
    """Instruction for the operator's stepper move, distance in meters."""
    mm = distance * 1000.0
    steps = rig.stepper_steps(distance)
    return f"[DEMO]: move stepper motor to {mm:.1f} [mm] {steps:.2f} [step]"


def trial_announcement(plan: TrialPlan, total_in_group: int) -> str:
    return (
        f"[DEMO] {plan.label.value} {plan.index}/{total_in_group} "
        f"presentation: {plan.presentation.value}"
    )


def evaluate_response(plan: TrialPlan, response: Response) -> bool:
    """True when the participant named the poke that actually used two pins."""
    return response_correct(plan.presentation, response)


def two_pin_lateral_motion(motion_two_pins: Pose3, distance: float) -> Pose3:
    """The two-pin alignment move, offset so the pin pair stays centered."""
    return Pose3(
        motion_two_pins.v1,
        motion_two_pins.v2 + TWO_PIN_OFFSET_FACTOR * distance,
        motion_two_pins.v3,
    )


@dataclass
class PhaseEntry:
    """One state-machine transition, kept for diagnostics and live display."""

    phase: Phase
    prompt: str
    sim_time: float
    pose: Pose3


@dataclass
class SessionConsole:
    """Ordered transcript of everything printed for the operator."""

    lines: list[str] = field(default_factory=list)

    def emit(self, line: str) -> None:
        self.lines.append(line)


class Session:
    """Owns the rig, the scheduler, and the trial flow for one participant."""

    def __init__(
        self,
        config: DemoConfig,
        finger: FingerModel | None = None,
        seed: int = 0,
        data_root: str | Path | None = None,
    ):
        report = validate_config(config)
        blocking = [f for f in report.findings if f.message != "no poses for the stepper motor"]
        if blocking:
            raise SessionError(f"config is not runnable: {blocking[0]}")

        self.config = config
        self.finger = finger if finger is not None else FingerModel()
        self.seed = seed
        self.data_root = Path(data_root) if data_root is not None else Path(
            config.experiment.data_path
        )

        self.rig: RigState = RigState()
        self.scheduler: TrialScheduler | None = None
        self.debug_mode = False
        self.participant: Participant | None = None
        self.records: list[TrialRecord] = []
        self.console = SessionConsole()
        self.command_log: list[OperatorEvent] = []
        self.phase_history: list[PhaseEntry] = []
        self.current_plan: TrialPlan | None = None
        self.ft_trace: list[FtSample] = []  # recent recorded samples, for display
        self.end_reason: str | None = None
        self.archive_paths: persistence.ArchivePaths | None = None

        self._intake_cursor = 0
        self._intake_values: dict[str, object] = {}
        self._pending_first: FtRecording | None = None
        self._pending_second: FtRecording | None = None
        self._noise_rng = random.Random(seed + _NOISE_SEED_OFFSET)
        self._resume_training_done = 0
        self._resume_real_distances: list[float] = []
        self._resumed = False
        self._session_dir: Path | None = None

        self.phase = Phase.AWAIT_DEBUG_CHOICE
        self.prompt = PROMPT_DEBUG_CHOICE
        self.console.emit(self.prompt)
        self._record_phase()

    # ------------------------------------------------------------------
    # Introspection

    @property
    def is_terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES

    @property
    def intake_field(self) -> str | None:
        """Name of the intake field currently being collected."""
        if self.phase is not Phase.INTAKE:
            return None
        return INTAKE_FIELDS[self._intake_cursor]

    @property
    def session_dir(self) -> Path | None:
        return self._session_dir

    def group_total(self, label: TrialLabel) -> int:
        assert self.scheduler is not None
        if label is TrialLabel.TRAINING:
            return self.config.experiment.number_training_trials
        return self.scheduler.total_real_trials

    def _record_phase(self) -> None:
        self.phase_history.append(
            PhaseEntry(self.phase, self.prompt, self.rig.sim_time, self.rig.effector_pose)
        )

    def _enter(self, phase: Phase, prompt: str, echo: bool = True) -> None:
        self.phase = phase
        self.prompt = prompt
        if echo:
            self.console.emit(prompt)
        self._record_phase()

    # ------------------------------------------------------------------
    # Event dispatch

    def submit_event(self, ev: OperatorEvent) -> None:
        """Apply one operator event; raises PhaseMismatchError if illegal."""
        if self.is_terminal:
            raise PhaseMismatchError(f"session is over ({self.phase.value})")

        if isinstance(ev, Escape):
            self.command_log.append(ev)
            self._cancel(MSG_CANCELLED)
            return

        handler = {
            Phase.AWAIT_DEBUG_CHOICE: self._on_debug_choice,
            Phase.INTAKE: self._on_intake,
            Phase.AWAIT_INIT_CONFIRM: self._on_init_confirm,
            Phase.AWAIT_STEPPER_MOVE: self._on_stepper_confirm,
            Phase.AWAIT_RESPONSE: self._on_response,
        }.get(self.phase)
        if handler is None:
            raise PhaseMismatchError(f"no operator input expected in {self.phase.value}")
        handler(ev)

    def _reject(self, message: str) -> None:
        raise PhaseMismatchError(message)

    def _on_debug_choice(self, ev: OperatorEvent) -> None:
        if not isinstance(ev, Confirm):
            self._reject("answer the debug question with Y or N")
        self.command_log.append(ev)
        self.debug_mode = ev.yes
        self._intake_cursor = 0
        self._enter(Phase.INTAKE, _INTAKE_PROMPTS[INTAKE_FIELDS[0]])

    def _on_intake(self, ev: OperatorEvent) -> None:
        fld = INTAKE_FIELDS[self._intake_cursor]
        if fld == "gender":
            if isinstance(ev, TextInput):
                self._reject(MSG_TYPING_NOT_ALLOWED)
            if not isinstance(ev, SelectOption) or ev.option not in ("Female", "Male"):
                self._reject("select Female or Male")
            value: object = Gender(ev.option.upper())
        else:
            if not isinstance(ev, TextInput):
                self._reject(f"type the participant {fld}")
            text = ev.text.strip()
            if fld == "age":
                try:
                    age = int(text)
                except ValueError:
                    self._reject(f"age must be an integer in [{AGE_MIN}, {AGE_MAX}]")
                if not AGE_MIN <= age <= AGE_MAX:
                    self._reject(f"age must be in [{AGE_MIN}, {AGE_MAX}]")
                value = age
            elif fld in ("id", "surname"):
                if fld == "id" and not text:
                    self._reject("participant ID must not be empty")
                if "/" in text or "\\" in text:
                    self._reject(f"{fld} must not contain path separators")
                value = text
            else:  # name, notes (notes may be empty)
                value = text

        self.command_log.append(ev)
        self._intake_values[fld] = value
        self._intake_cursor += 1
        if self._intake_cursor < len(INTAKE_FIELDS):
            self._enter(Phase.INTAKE, _INTAKE_PROMPTS[INTAKE_FIELDS[self._intake_cursor]])
            return

        self.participant = Participant(
            id=str(self._intake_values["id"]),
            name=str(self._intake_values["name"]),
            surname=str(self._intake_values["surname"]),
            age=int(self._intake_values["age"]),  # type: ignore[arg-type]
            gender=self._intake_values["gender"],  # type: ignore[arg-type]
            notes=str(self._intake_values["notes"]),
        )
        self._open_session_dir()
        self._enter(Phase.AWAIT_INIT_CONFIRM, PROMPT_MOVE_TO_INIT)

    def _on_init_confirm(self, ev: OperatorEvent) -> None:
        if not isinstance(ev, Confirm):
            self._reject("confirm the move to the init pose with Y or N")
        self.command_log.append(ev)
        if not ev.yes:
            self._cancel(MSG_CANCELLED)
            return
        self._moving_to_init()

    def _on_stepper_confirm(self, ev: OperatorEvent) -> None:
        if not isinstance(ev, Confirm):
            self._reject("confirm the stepper move with Y")
        if not ev.yes:
            self._reject("waiting for the stepper move; press Y when done")
        self.command_log.append(ev)
        assert self.current_plan is not None
        if self.debug_mode:
            # The operator has just dialed the distance in by hand.
            self.rig = rig.set_stepper(self.rig, self.current_plan.distance)
        self._run_trial_presentations()

    def _on_response(self, ev: OperatorEvent) -> None:
        if isinstance(ev, TextInput):
            self._reject(MSG_TYPING_NOT_ALLOWED)
        if not isinstance(ev, SelectOption) or ev.option not in ("First", "Second"):
            self._reject("select First or Second")
        self.command_log.append(ev)
        self._score_and_persist(Response(ev.option))

    # ------------------------------------------------------------------
    # Flow

    def _moving_to_init(self) -> None:
        self._enter(Phase.MOVING_TO_INIT, PROMPT_MOVE_TO_INIT, echo=False)
        state = self.rig
        if not state.ready:
            state = rig.check(rig.initialise(rig.power_on(state)))
        self.rig = rig.move_global(
            state, self.config.touch.init, self.config.touch.movement_duration
        )
        if not self.config.smposes:
            self._cancel(MSG_NO_STEPPER_POSES)
            return
        self.scheduler = TrialScheduler(
            self.config.experiment, list(self.config.distances), self.seed
        )
        if self._resumed:
            self.scheduler.restore(self._resume_training_done, self._resume_real_distances)
            if self.scheduler.is_complete:
                self._complete()
                return
        self._begin_next_trial()

    def _begin_next_trial(self) -> None:
        assert self.scheduler is not None
        plan = self.scheduler.next_trial()
        self.current_plan = plan
        self.console.emit(trial_announcement(plan, self.group_total(plan.label)))
        self.console.emit(self._quota_line(plan.distance))

        pause = self.debug_mode or plan.distance != self.rig.stepper_separation
        if pause:
            if not self.debug_mode:
                # Integrated stepper: command it now, pause for the safety check.
                self.rig = rig.set_stepper(self.rig, plan.distance)
            self._enter(Phase.AWAIT_STEPPER_MOVE, stepper_prompt(plan.distance))
        else:
            self._run_trial_presentations()

    def _quota_line(self, distance: float) -> str:
        assert self.scheduler is not None
        presented = self.scheduler.presented_count(distance)
        total = self.config.experiment.number_presentations
        state = "available" if self.scheduler.remaining_quota()[distance] > 0 else "exhausted"
        return f"[DEMO] distance {distance * 1000.0:.1f} [mm]: presented {presented}/{total} ({state})"

    def _run_trial_presentations(self) -> None:
        assert self.current_plan is not None
        announcement = trial_announcement(
            self.current_plan, self.group_total(self.current_plan.label)
        )
        self._enter(Phase.PRESENTING_FIRST, announcement, echo=False)
        first = self.run_presentation("first")
        self._pending_first = first
        self._enter(Phase.PRESENTING_SECOND, announcement, echo=False)
        self._pending_second = self.run_presentation("second")
        self._enter(Phase.AWAIT_RESPONSE, PROMPT_RESPONSE)

    def run_presentation(self, which: str) -> FtRecording:
        """Run one poke (lateral align, descend, record, return home)."""
        assert self.current_plan is not None
        plan = self.current_plan
        two_pins = plan.presentation.two_pins_side == which
        touch = self.config.touch
        lateral = (
            two_pin_lateral_motion(touch.motion_two_pins, plan.distance)
            if two_pins
            else touch.motion_single_pin
        )
        self.rig = rig.move_relative(self.rig, lateral, touch.movement_duration)
        self.rig, poke = rig.execute_poke(
            self.rig,
            touch.poking,
            touch.poking_duration,
            touch.threshold,
            self.finger,
            touch.event_time_wait,
            self.config.experiment.number_ftdata_recordings,
            self._noise_rng,
        )
        for sample in poke.recording.samples:
            self.console.emit(sample.console_line())
            self.ft_trace.append(sample)
        del self.ft_trace[:-100]
        self.rig = rig.move_global(self.rig, touch.init, touch.movement_duration)
        return poke.recording

    def _score_and_persist(self, response: Response) -> None:
        assert self.current_plan is not None and self._pending_first is not None
        plan = self.current_plan
        correct = evaluate_response(plan, response)
        self.console.emit(f"[DEMO] response: {'correct' if correct else 'wrong'}")
        record = TrialRecord(
            participant_id=self.participant.id,  # type: ignore[union-attr]
            trial_no=plan.index,
            label=plan.label,
            presentation=plan.presentation,
            ft_first=self._pending_first,
            ft_second=self._pending_second,
            distance=plan.distance,
            response=response,
            correct=correct,
        )
        self.records.append(record)
        persistence.append_trial_tmp(self._tmp_path(), record)
        self._write_manifest("in_progress")
        self._pending_first = None
        self._pending_second = None
        self._enter(Phase.TRIAL_COMPLETE, self.prompt, echo=False)

        assert self.scheduler is not None
        if self.scheduler.is_complete:
            self._complete()
        else:
            self._begin_next_trial()

    def _complete(self) -> None:
        self._enter(Phase.SESSION_COMPLETE, MSG_COMPLETED)
        self.end_reason = "complete"
        self._write_archive("complete")

    def _cancel(self, reason: str) -> None:
        self._enter(Phase.CANCELLED, reason)
        self.end_reason = reason
        if self.participant is not None:
            self._write_archive("cancelled")

    # ------------------------------------------------------------------
    # Persistence plumbing

    def _open_session_dir(self) -> None:
        assert self.participant is not None
        self._session_dir = self.data_root / self.participant.id
        self._session_dir.mkdir(parents=True, exist_ok=True)
        if not self._resumed:
            self._tmp_path().write_text("", encoding="utf-8")
        self._write_manifest("in_progress")

    def _tmp_path(self) -> Path:
        assert self._session_dir is not None
        return self._session_dir / "tmp.csv"

    def _write_manifest(self, status: str) -> None:
        assert self._session_dir is not None and self.participant is not None
        manifest = persistence.build_manifest(
            config=self.config,
            participant=self.participant,
            seed=self.seed,
            debug_mode=self.debug_mode,
            finger=self.finger,
            records=self.records,
            scheduler=self.scheduler,
            command_log=[event_to_dict(ev) for ev in self.command_log],
            status=status,
            resumed=self._resumed,
        )
        persistence.write_manifest(self._session_dir, manifest)

    def _write_archive(self, status: str) -> None:
        assert self.participant is not None and self._session_dir is not None
        self._write_manifest(status)
        archive = persistence.SessionArchive(
            data_name=self.config.data_name,
            participant=self.participant,
            trials=list(self.records),
            participant_ext=self.config.experiment.participant_ext_file,
            trial_ext=self.config.experiment.trial_ext_file,
        )
        self.archive_paths = persistence.write_archive(archive, self._session_dir)


def start_session(
    config: DemoConfig,
    finger: FingerModel | None = None,
    seed: int = 0,
    data_root: str | Path | None = None,
) -> Session:
    """Begin a fresh session; the first prompt is the debug-mode question."""
    return Session(config, finger, seed, data_root)


def submit_event(session: Session, ev: OperatorEvent) -> Session:
    session.submit_event(ev)
    return session


def resume_session(
    config: DemoConfig,
    session_dir: str | Path,
    finger: FingerModel | None = None,
    data_root: str | Path | None = None,
) -> Session:
    """Continue an interrupted session from its tmp.csv and manifest.

    Intake is skipped (the participant is read back from the manifest); the
    scheduler quotas are restored so the distance balance is preserved.  The
    random stream restarts at the stored seed, so the continuation is a fresh
    but still balanced draw.
    """
    session_dir = Path(session_dir)
    manifest = persistence.read_manifest(session_dir)
    records = persistence.read_trial_csv(
        session_dir / "tmp.csv", manifest=manifest, leading_count=False
    )

    sess = Session(
        config,
        finger if finger is not None else persistence.finger_from_manifest(manifest),
        seed=int(manifest["seed"]),
        data_root=data_root if data_root is not None else session_dir.parent,
    )
    sess.debug_mode = bool(manifest["debug_mode"])
    sess.participant = persistence.participant_from_manifest(manifest)
    sess.records = list(records)
    sess._resumed = True
    sess._resume_training_done = sum(1 for r in records if r.label is TrialLabel.TRAINING)
    sess._resume_real_distances = [
        r.distance for r in records if r.label is TrialLabel.TRIAL
    ]
    sess._session_dir = session_dir
    sess._enter(Phase.AWAIT_INIT_CONFIRM, PROMPT_MOVE_TO_INIT)
    return sess
