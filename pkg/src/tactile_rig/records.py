"""Participant and trial records shared by the session engine and persistence."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .rig import FtRecording
from .scheduler import Presentation, TrialLabel


class Gender(enum.Enum):
    FEMALE = "FEMALE"
    MALE = "MALE"

    @property
    def display(self) -> str:
        return self.value.title()


class Response(enum.Enum):
    FIRST = "First"
    SECOND = "Second"


@dataclass(frozen=True)
class Participant:
    id: str
    name: str
    surname: str
    age: int
    gender: Gender
    notes: str = ""  # empty when the optional entry was skipped


def response_correct(presentation: Presentation, response: Response) -> bool:
    """True when the response names the poke that used two pins."""
    if presentation is Presentation.TWO_PINS_FIRST:
        return response is Response.FIRST
    return response is Response.SECOND


@dataclass(frozen=True)
class TrialRecord:
    """One completed trial: both recordings plus the participant's choice."""

    participant_id: str
    trial_no: int  # 1-based within its label group
    label: TrialLabel
    presentation: Presentation
    ft_first: FtRecording
    ft_second: FtRecording
    distance: float  # m
    response: Response
    correct: bool
