"""Balanced randomized trial sequencing.

Training trials come first; the one at ``training_index`` always presents the
maximum pin separation so the participant feels the easiest stimulus early.
Real trials sample the separation uniformly at random among those whose
per-distance presentation quota is not yet spent, which guarantees every
separation is presented exactly ``number_presentations`` times by the end.
Which poke carries the two pins is an independent fair coin each trial.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .config import ExperimentParams

NO_STEPPER_POSES_MSG = "No poses for the stepper motor"


class SchedulerError(Exception):
    pass


class NoStepperPosesError(SchedulerError):
    """The config defines no pin separations; the session cannot run."""

    def __init__(self) -> None:
        super().__init__(NO_STEPPER_POSES_MSG)


class SequenceComplete(SchedulerError):
    """All scheduled trials have been served."""


class TrialLabel(enum.Enum):
    TRAINING = "Training"
    TRIAL = "Trial"


class Presentation(enum.Enum):
    SINGLE_PIN_FIRST = "Single Pin First"
    TWO_PINS_FIRST = "Two Pins First"

    @property
    def two_pins_side(self) -> str:
        return "first" if self is Presentation.TWO_PINS_FIRST else "second"


@dataclass(frozen=True)
class TrialPlan:
    label: TrialLabel
    index: int  # 1-based within its label group
    distance: float  # m
    presentation: Presentation


class TrialScheduler:
    """Serves the trial sequence; deterministic for a given seed."""

    def __init__(self, params: ExperimentParams, distances: list[float], seed: int):
        if not distances:
            raise NoStepperPosesError()
        if len(set(distances)) != len(distances):
            raise SchedulerError("pin separations must be pairwise distinct")
        self.params = params
        self.distances = list(distances)
        self.seed = seed
        self._rng = random.Random(seed)
        self._quotas = {d: params.number_presentations for d in distances}
        self._training_emitted = 0
        self._real_emitted = 0

    @property
    def total_trials(self) -> int:
        return (
            self.params.number_training_trials
            + self.params.number_presentations * len(self.distances)
        )

    @property
    def total_real_trials(self) -> int:
        return self.params.number_presentations * len(self.distances)

    @property
    def emitted(self) -> int:
        return self._training_emitted + self._real_emitted

    @property
    def is_complete(self) -> bool:
        return self.emitted >= self.total_trials

    def remaining_quota(self) -> dict[float, int]:
        """Remaining presentations per distance, in configured order."""
        return {d: self._quotas[d] for d in self.distances}

    def presented_count(self, distance: float) -> int:
        return self.params.number_presentations - self._quotas[distance]

    def next_trial(self) -> TrialPlan:
        """Draw the next trial; raises :class:`SequenceComplete` when done.

        Training trials never consume quota.  The trial index restarts at 1
        when training ends.
        """
        if self.is_complete:
            raise SequenceComplete("all trials have been served")

        if self._training_emitted < self.params.number_training_trials:
            self._training_emitted += 1
            index = self._training_emitted
            if index == self.params.training_index:
                distance = max(self.distances)
            else:
                distance = self._rng.choice(self.distances)
            label = TrialLabel.TRAINING
        else:
            available = [d for d in self.distances if self._quotas[d] > 0]
            distance = self._rng.choice(available)
            self._quotas[distance] -= 1
            self._real_emitted += 1
            index = self._real_emitted
            label = TrialLabel.TRIAL

        presentation = (
            Presentation.SINGLE_PIN_FIRST
            if self._rng.random() < 0.5
            else Presentation.TWO_PINS_FIRST
        )
        return TrialPlan(label=label, index=index, distance=distance, presentation=presentation)

    def restore(self, training_done: int, real_distances_done: list[float]) -> None:
        """Fast-forward the counters to resume an interrupted session.

        The random stream restarts from the seed, so the continuation draws a
        fresh (still balanced) order; quotas reflect everything already
        presented.
        """
        if training_done > self.params.number_training_trials:
            raise SchedulerError("more training trials recorded than configured")
        self._training_emitted = training_done
        for d in real_distances_done:
            if d not in self._quotas:
                raise SchedulerError(f"recorded distance {d} is not configured")
            if self._quotas[d] <= 0:
                raise SchedulerError(f"quota for distance {d} already exhausted")
            self._quotas[d] -= 1
            self._real_emitted += 1


def build_scheduler(params: ExperimentParams, distances: list[float], seed: int) -> TrialScheduler:
    return TrialScheduler(params, distances, seed)
