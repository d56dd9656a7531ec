"""Shared fixtures: the two shipped config files and scripted session drivers."""

from pathlib import Path

import pytest

from tactile_rig.config import DemoConfig, load_config
from tactile_rig.rig import FingerModel
from tactile_rig.session import (
    Confirm,
    Phase,
    SelectOption,
    Session,
    TextInput,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"
YOUNG_CONFIG = CONFIG_DIR / "GolemAppSymons_RobotDelta3SM.xml"
ELDERLY_CONFIG = CONFIG_DIR / "GolemAppSymons_RobotDelta3Sm_elderly.xml"

YOUNG_DISTANCES = (0.0001, 0.0003, 0.0006, 0.001, 0.0013, 0.0016, 0.002)
ELDERLY_DISTANCES = (0.001, 0.0013, 0.0016, 0.002, 0.0024, 0.003, 0.0036, 0.0043, 0.005, 0.006)


@pytest.fixture(scope="session")
def young_config() -> DemoConfig:
    return load_config(YOUNG_CONFIG)


@pytest.fixture(scope="session")
def elderly_config() -> DemoConfig:
    return load_config(ELDERLY_CONFIG)


DEFAULT_INTAKE = [
    TextInput("dfs"),
    TextInput("Ada"),
    TextInput("foo"),
    TextInput("31"),
    SelectOption("Female"),
    TextInput(""),
]


def drive_to_first_trial(session: Session, debug: bool = True) -> Session:
    """Debug choice, intake, and init confirmation."""
    session.submit_event(Confirm(debug))
    for ev in DEFAULT_INTAKE:
        session.submit_event(ev)
    session.submit_event(Confirm(True))
    return session


def drive_to_completion(session: Session, respond: str = "First", max_trials: int | None = None) -> Session:
    """Answer every break-point until the session ends (or max_trials responses)."""
    answered = 0
    while not session.is_terminal:
        if session.phase is Phase.AWAIT_STEPPER_MOVE:
            session.submit_event(Confirm(True))
        elif session.phase is Phase.AWAIT_RESPONSE:
            session.submit_event(SelectOption(respond))
            answered += 1
            if max_trials is not None and answered >= max_trials:
                return session
        else:
            raise AssertionError(f"unexpected resting phase {session.phase}")
    return session


def run_full_session(
    config: DemoConfig,
    seed: int,
    data_root,
    debug: bool = True,
    respond: str = "First",
    finger: FingerModel | None = None,
) -> Session:
    session = Session(config, finger, seed, data_root)
    drive_to_first_trial(session, debug=debug)
    return drive_to_completion(session, respond=respond)
