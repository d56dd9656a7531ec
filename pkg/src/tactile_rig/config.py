"""Demo configuration model: parse, validate, and serialize the rig's XML config.

The configuration lives in a ``<demo>`` element somewhere under the document
root.  It holds the workspace poses, the stepper-motor separation commands
(one per pin distance), the touch motion parameters, and the experiment
bookkeeping parameters.  Separation entries that are commented out in the
XML are invisible to the parser, which is how alternative distance sets are
switched on and off.
"""

from __future__ import annotations

import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

WORKSPACE_BOUND = 0.5  # m, per-axis sanity bound on any pose component
MAX_PIN_SEPARATION = 0.01  # m, mechanical limit of the two-pin stepper


class ConfigError(Exception):
    """Base class for configuration failures."""


class ConfigParseError(ConfigError):
    """The XML itself could not be parsed."""


class ConfigSchemaError(ConfigError):
    """A mandatory element or attribute is missing."""


class ConfigValueError(ConfigError):
    """An attribute value has the wrong type."""


class ConfigWarning(UserWarning):
    """Unknown attribute or element encountered (ignored, forward compatible)."""


@dataclass(frozen=True)
class Pose3:
    """Cartesian offset or position in meters along the rig's x, y, z axes."""

    v1: float
    v2: float
    v3: float

    def __add__(self, other: "Pose3") -> "Pose3":
        return Pose3(self.v1 + other.v1, self.v2 + other.v2, self.v3 + other.v3)

    def components(self) -> tuple[float, float, float]:
        return (self.v1, self.v2, self.v3)


@dataclass(frozen=True)
class NamedPose:
    name: str
    pose: Pose3


@dataclass(frozen=True)
class StepperCommand:
    """One stepper-motor command; ``c1`` is the pin separation in meters.

    ``c2`` is reserved: it is parsed and preserved but has no effect.
    """

    c1: float
    c2: float = 0.0


@dataclass(frozen=True)
class Threshold:
    """Per-channel contact thresholds: forces in N, torques in N*m."""

    v1: float
    v2: float
    v3: float
    w1: float
    w2: float
    w3: float

    def channels(self) -> tuple[float, float, float, float, float, float]:
        return (self.v1, self.v2, self.v3, self.w1, self.w2, self.w3)


@dataclass(frozen=True)
class TouchParams:
    sensor_id: str
    event_time_wait: float  # s between FT readings
    movement_duration: float  # s minimum for free-space moves
    poking_duration: float  # s minimum for the downward poke
    threshold: Threshold
    motion_single_pin: Pose3
    motion_two_pins: Pose3
    poking: Pose3
    init: Pose3


@dataclass(frozen=True)
class ExperimentParams:
    participant_ext_file: str
    trial_ext_file: str
    number_training_trials: int
    training_index: int  # 1-based index of the max-distance training trial
    number_presentations: int  # per distance
    number_ftdata_recordings: int  # per contact
    data_path: str


@dataclass(frozen=True)
class DemoConfig:
    data_name: str
    wposes: tuple[NamedPose, ...]
    smposes: tuple[StepperCommand, ...]
    touch: TouchParams
    experiment: ExperimentParams

    @property
    def distances(self) -> tuple[float, ...]:
        """Pin separations in configured order."""
        return tuple(sm.c1 for sm in self.smposes)


@dataclass(frozen=True)
class Finding:
    """One violated invariant, located by a path into the config model."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, path: str, message: str) -> None:
        self.findings.append(Finding(path, message))

    def __str__(self) -> str:
        if self.ok:
            return "config ok"
        return "\n".join(str(f) for f in self.findings)


# Attribute spellings accepted on <experiment_data>; the long form is canonical
# and is what the serializer writes back.
_EXPERIMENT_ALIASES = {
    "number_training_trials": ("number_training_trials", "num_training_trials"),
    "training_index": ("training_index",),
    "number_presentations": ("number_presentations", "num_presentations"),
    "number_ftdata_recordings": ("number_ftdata_recordings", "num_ftdata_recordings"),
}

_POSE_ATTRS = ("v1", "v2", "v3")
_THRESHOLD_ATTRS = ("v1", "v2", "v3", "w1", "w2", "w3")


def _warn(path: str, message: str) -> None:
    warnings.warn(f"{path}: {message}", ConfigWarning, stacklevel=3)


def _require(elem: ET.Element, attr: str, path: str) -> str:
    value = elem.get(attr)
    if value is None:
        raise ConfigSchemaError(f"{path}: missing mandatory attribute '{attr}'")
    return value


def _require_float(elem: ET.Element, attr: str, path: str) -> float:
    raw = _require(elem, attr, path)
    try:
        return float(raw)
    except ValueError:
        raise ConfigValueError(f"{path}: attribute '{attr}' is not numeric: {raw!r}") from None


def _require_int(elem: ET.Element, attr: str, path: str, raw: str | None = None) -> int:
    if raw is None:
        raw = _require(elem, attr, path)
    try:
        return int(raw)
    except ValueError:
        raise ConfigValueError(f"{path}: attribute '{attr}' is not an integer: {raw!r}") from None


def _check_unknown(elem: ET.Element, known: tuple[str, ...], path: str) -> None:
    for attr in elem.attrib:
        if attr not in known:
            _warn(path, f"unknown attribute '{attr}' ignored")


def _parse_pose(elem: ET.Element, path: str, extra_known: tuple[str, ...] = ()) -> Pose3:
    pose = Pose3(*(_require_float(elem, a, path) for a in _POSE_ATTRS))
    _check_unknown(elem, _POSE_ATTRS + extra_known, path)
    return pose


def parse_demo_config(xml_text: str) -> DemoConfig:
    """Parse the demo configuration out of an XML document.

    The ``<demo>`` element may sit anywhere under the document root (or be
    the root itself).  XML comments are honored, so commented-out stepper
    entries never reach the model.  Unknown attributes and elements are
    ignored with a :class:`ConfigWarning`.

    Raises:
        ConfigParseError: malformed XML (message carries line/column).
        ConfigSchemaError: a mandatory element or attribute is missing.
        ConfigValueError: an attribute fails numeric conversion.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ConfigParseError(f"malformed XML at line {line}, column {col}: {exc.msg}") from None

    demo = root if root.tag == "demo" else root.find(".//demo")
    if demo is None:
        raise ConfigSchemaError("document contains no <demo> element")

    data_name = _require(demo, "data_name", "demo")
    _check_unknown(demo, ("data_name",), "demo")

    wposes: list[NamedPose] = []
    smposes: list[StepperCommand] = []
    touch: TouchParams | None = None
    experiment: ExperimentParams | None = None

    for child in demo:
        if not isinstance(child.tag, str):  # comments / processing instructions
            continue
        if child.tag == "wpose":
            idx = len(wposes)
            path = f"demo.wpose[{idx}]"
            name = _require(child, "name", path)
            wposes.append(NamedPose(name, _parse_pose(child, path, extra_known=("name",))))
        elif child.tag == "smpose":
            idx = len(smposes)
            path = f"demo.smpose[{idx}]"
            c1 = _require_float(child, "c1", path)
            c2 = float(child.get("c2", "0.0"))
            _check_unknown(child, ("name", "dim", "c1", "c2"), path)
            smposes.append(StepperCommand(c1, c2))
        elif child.tag == "touch":
            touch = _parse_touch(child)
        elif child.tag == "experiment_data":
            experiment = _parse_experiment(child)
        else:
            _warn("demo", f"unknown element <{child.tag}> ignored")

    if touch is None:
        raise ConfigSchemaError("demo: missing mandatory element <touch>")
    if experiment is None:
        raise ConfigSchemaError("demo: missing mandatory element <experiment_data>")

    return DemoConfig(
        data_name=data_name,
        wposes=tuple(wposes),
        smposes=tuple(smposes),
        touch=touch,
        experiment=experiment,
    )


def _parse_touch(elem: ET.Element) -> TouchParams:
    path = "demo.touch"
    sensor_id = _require(elem, "sensor", path)
    event_time_wait = _require_float(elem, "event_time_wait", path)
    movement_duration = _require_float(elem, "movement_duration", path)
    poking_duration = _require_float(elem, "poking_duration", path)
    _check_unknown(
        elem, ("sensor", "event_time_wait", "movement_duration", "poking_duration"), path
    )

    children: dict[str, ET.Element] = {}
    for child in elem:
        if not isinstance(child.tag, str):
            continue
        if child.tag in ("threshold", "motion_single_pin", "motion_two_pins", "poking", "init"):
            children[child.tag] = child
        else:
            _warn(path, f"unknown element <{child.tag}> ignored")

    for tag in ("threshold", "motion_single_pin", "motion_two_pins", "poking", "init"):
        if tag not in children:
            raise ConfigSchemaError(f"{path}: missing mandatory element <{tag}>")

    thr_elem = children["threshold"]
    thr_path = f"{path}.threshold"
    threshold = Threshold(*(_require_float(thr_elem, a, thr_path) for a in _THRESHOLD_ATTRS))
    _check_unknown(thr_elem, _THRESHOLD_ATTRS, thr_path)

    return TouchParams(
        sensor_id=sensor_id,
        event_time_wait=event_time_wait,
        movement_duration=movement_duration,
        poking_duration=poking_duration,
        threshold=threshold,
        motion_single_pin=_parse_pose(children["motion_single_pin"], f"{path}.motion_single_pin"),
        motion_two_pins=_parse_pose(children["motion_two_pins"], f"{path}.motion_two_pins"),
        poking=_parse_pose(children["poking"], f"{path}.poking"),
        init=_parse_pose(children["init"], f"{path}.init"),
    )


def _parse_experiment(elem: ET.Element) -> ExperimentParams:
    path = "demo.experiment_data"

    def aliased_int(canonical: str) -> int:
        for alias in _EXPERIMENT_ALIASES[canonical]:
            raw = elem.get(alias)
            if raw is not None:
                return _require_int(elem, alias, path, raw)
        raise ConfigSchemaError(f"{path}: missing mandatory attribute '{canonical}'")

    params = ExperimentParams(
        participant_ext_file=_require(elem, "participant_ext_file", path),
        trial_ext_file=_require(elem, "trial_ext_file", path),
        number_training_trials=aliased_int("number_training_trials"),
        training_index=aliased_int("training_index"),
        number_presentations=aliased_int("number_presentations"),
        number_ftdata_recordings=aliased_int("number_ftdata_recordings"),
        data_path=_require(elem, "path", path),
    )
    known = ("participant_ext_file", "trial_ext_file", "path") + tuple(
        alias for aliases in _EXPERIMENT_ALIASES.values() for alias in aliases
    )
    _check_unknown(elem, known, path)
    return params


def _validate_pose(report: ValidationReport, path: str, pose: Pose3) -> None:
    for axis, value in zip(_POSE_ATTRS, pose.components()):
        if value != value or value in (float("inf"), float("-inf")):
            report.add(f"{path}.{axis}", "component is not finite")
        elif abs(value) > WORKSPACE_BOUND:
            report.add(f"{path}.{axis}", f"|{value}| exceeds workspace bound {WORKSPACE_BOUND} m")


def validate_config(cfg: DemoConfig) -> ValidationReport:
    """Check every model invariant; an empty report means the config is runnable."""
    report = ValidationReport()

    for i, np_ in enumerate(cfg.wposes):
        path = f"demo.wpose[{i}]"
        if not np_.name:
            report.add(path, "pose name is empty")
        _validate_pose(report, path, np_.pose)

    if not cfg.smposes:
        report.add("demo.smpose", "no poses for the stepper motor")
    seen: dict[float, int] = {}
    for i, sm in enumerate(cfg.smposes):
        path = f"demo.smpose[{i}]"
        if sm.c1 < 0:
            report.add(path, f"c1 must be >= 0, got {sm.c1}")
        if sm.c1 > MAX_PIN_SEPARATION:
            report.add(path, f"c1 exceeds maximum separation {MAX_PIN_SEPARATION} m")
        if sm.c1 in seen:
            report.add(path, f"duplicate separation {sm.c1} (also at index {seen[sm.c1]})")
        else:
            seen[sm.c1] = i

    touch = cfg.touch
    for name in ("event_time_wait", "movement_duration", "poking_duration"):
        if getattr(touch, name) <= 0:
            report.add(f"demo.touch.{name}", "duration must be > 0")
    for axis, value in zip(_THRESHOLD_ATTRS, touch.threshold.channels()):
        if value <= 0:
            report.add(f"demo.touch.threshold.{axis}", "threshold must be > 0")
    for name in ("motion_single_pin", "motion_two_pins", "poking", "init"):
        _validate_pose(report, f"demo.touch.{name}", getattr(touch, name))

    exp = cfg.experiment
    if exp.number_training_trials < 0:
        report.add("demo.experiment_data.number_training_trials", "must be >= 0")
    if exp.number_training_trials > 0 and not (
        1 <= exp.training_index <= exp.number_training_trials
    ):
        report.add(
            "demo.experiment_data.training_index",
            f"must be in [1, {exp.number_training_trials}], got {exp.training_index}",
        )
    if exp.number_presentations < 1:
        report.add("demo.experiment_data.number_presentations", "must be >= 1")
    if exp.number_ftdata_recordings < 1:
        report.add("demo.experiment_data.number_ftdata_recordings", "must be >= 1")

    return report


def _fmt(value: float) -> str:
    return repr(value)


def _pose_attrs(pose: Pose3) -> str:
    return " ".join(f'{a}="{_fmt(v)}"' for a, v in zip(_POSE_ATTRS, pose.components()))


def serialize_demo_config(cfg: DemoConfig) -> str:
    """Render a validated config back to XML.

    Floats are written with ``repr`` so the round trip through
    :func:`parse_demo_config` reproduces the model exactly.  Raises
    :class:`ConfigError` citing the first violation if the config is invalid.
    """
    # Empty smposes is a deferred runtime error, not a structural one; such a
    # config is still well formed and must survive the round trip.
    blocking = [
        f for f in validate_config(cfg).findings
        if f.message != "no poses for the stepper motor"
    ]
    if blocking:
        raise ConfigError(f"refusing to serialize invalid config: {blocking[0]}")

    lines = ['<?xml version="1.0" encoding="utf-8"?>', "<golem>"]
    lines.append(f"  <demo data_name={quoteattr(cfg.data_name)}>")
    for np_ in cfg.wposes:
        lines.append(f"    <wpose name={quoteattr(np_.name)} {_pose_attrs(np_.pose)}/>")
    for sm in cfg.smposes:
        lines.append(
            f'    <smpose name="sm_commands" dim="2" c1="{_fmt(sm.c1)}" c2="{_fmt(sm.c2)}"/>'
        )
    t = cfg.touch
    lines.append(
        f"    <touch sensor={quoteattr(t.sensor_id)} "
        f'event_time_wait="{_fmt(t.event_time_wait)}" '
        f'movement_duration="{_fmt(t.movement_duration)}" '
        f'poking_duration="{_fmt(t.poking_duration)}">'
    )
    thr = " ".join(
        f'{a}="{_fmt(v)}"' for a, v in zip(_THRESHOLD_ATTRS, t.threshold.channels())
    )
    lines.append(f"      <threshold {thr}/>")
    for tag in ("motion_single_pin", "motion_two_pins", "poking", "init"):
        lines.append(f"      <{tag} {_pose_attrs(getattr(t, tag))}/>")
    lines.append("    </touch>")
    e = cfg.experiment
    lines.append(
        f"    <experiment_data participant_ext_file={quoteattr(e.participant_ext_file)} "
        f"trial_ext_file={quoteattr(e.trial_ext_file)} "
        f'number_training_trials="{e.number_training_trials}" '
        f'training_index="{e.training_index}" '
        f'number_presentations="{e.number_presentations}" '
        f'number_ftdata_recordings="{e.number_ftdata_recordings}" '
        f"path={quoteattr(e.data_path)}></experiment_data>"
    )
    lines.append("  </demo>")
    lines.append("</golem>")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> DemoConfig:
    """Read and parse a config file from disk."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_demo_config(f.read())
