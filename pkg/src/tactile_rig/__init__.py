"""Tactile 2AFC experiment stack: session engine, simulated rig, and tooling."""

from .config import (
    DemoConfig,
    ExperimentParams,
    Pose3,
    StepperCommand,
    TouchParams,
    load_config,
    parse_demo_config,
    serialize_demo_config,
    validate_config,
)
from .records import Gender, Participant, Response, TrialRecord
from .rig import FingerModel, FtRecording, FtSample, RigState
from .scheduler import Presentation, TrialLabel, TrialPlan, TrialScheduler
from .session import (
    Confirm,
    Escape,
    OperatorEvent,
    Phase,
    SelectOption,
    Session,
    TextInput,
    resume_session,
    start_session,
)

__version__ = "0.1.0"
