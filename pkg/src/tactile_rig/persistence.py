"""Writers and readers for the session's on-disk formats.

A session directory ``<data_path>/<participant_id>/`` accumulates:

* ``tmp.csv``      -- one trial line appended (and flushed) per completed trial
* ``data.xml``     -- final index linking the two CSV files
* ``data-<id>-<surname>.csv`` -- one line of participant data
* ``data-<id>-trial.csv``     -- leading trial count, then one line per trial
* ``manifest.json``           -- sidecar with everything the CSV grammar cannot
  carry (seed, trial labels, touched flags, quotas, command log), so sessions
  can be replayed or resumed losslessly

Trial lines are comma-separated: ``ID,No,PRESENTATION`` then each FT block as
its reading count followed by ``count x 7`` numbers (timestamp + six
channels), then ``DISTANCE,RESPONSE``.  Forces, torques, and meters use six
decimal places; timestamps three, so written files are byte-stable.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from xml.etree import ElementTree as ET
from xml.sax.saxutils import quoteattr

from .config import DemoConfig, serialize_demo_config
from .records import Gender, Participant, Response, TrialRecord, response_correct
from .rig import FingerModel, FtRecording, FtSample
from .scheduler import Presentation, TrialLabel

if TYPE_CHECKING:
    from .scheduler import TrialScheduler

MANIFEST_NAME = "manifest.json"
TMP_NAME = "tmp.csv"

_PRESENTATION_STR = {
    Presentation.SINGLE_PIN_FIRST: "SinglePinFirst",
    Presentation.TWO_PINS_FIRST: "TwoPinsFirst",
}
_PRESENTATION_FROM_STR = {v: k for k, v in _PRESENTATION_STR.items()}


class PersistenceError(Exception):
    pass


class FormatError(PersistenceError):
    """A stored file does not match the expected grammar."""


@dataclass(frozen=True)
class SessionArchive:
    """The semantic content of one session's final archive."""

    data_name: str
    participant: Participant
    trials: list[TrialRecord]
    participant_ext: str = ".csv"
    trial_ext: str = ".csv"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SessionArchive):
            return NotImplemented
        return (
            self.data_name == other.data_name
            and self.participant == other.participant
            and list(self.trials) == list(other.trials)
            and self.participant_ext == other.participant_ext
            and self.trial_ext == other.trial_ext
        )


@dataclass(frozen=True)
class ArchivePaths:
    data_xml: Path
    participant_csv: Path
    trial_csv: Path
    manifest: Path


# ----------------------------------------------------------------------
# Trial line grammar


def _trial_fields(record: TrialRecord) -> list[str]:
    fields = [
        record.participant_id,
        str(record.trial_no),
        _PRESENTATION_STR[record.presentation],
    ]
    for recording in (record.ft_first, record.ft_second):
        fields.append(str(len(recording.samples)))
        for s in recording.samples:
            fields.append(f"{s.timestamp:.3f}")
            fields.extend(f"{v:.6f}" for v in s.channels())
    fields.append(f"{record.distance:.6f}")
    fields.append(record.response.value)
    return fields


class _FieldCursor:
    """Sequential reader over one trial's fields with located errors."""

    def __init__(self, fields: list[str], line_no: int):
        self.fields = fields
        self.line_no = line_no
        self.pos = 0

    def fail(self, message: str) -> FormatError:
        return FormatError(f"line {self.line_no}: {message}")

    def take(self, what: str) -> str:
        if self.pos >= len(self.fields):
            raise self.fail(f"truncated trial: expected {what}")
        value = self.fields[self.pos]
        self.pos += 1
        return value

    def take_int(self, what: str) -> int:
        raw = self.take(what)
        try:
            return int(raw)
        except ValueError:
            raise self.fail(f"{what} is not an integer: {raw!r}") from None

    def take_float(self, what: str) -> float:
        raw = self.take(what)
        try:
            return float(raw)
        except ValueError:
            raise self.fail(f"{what} is not numeric: {raw!r}") from None

    def done(self) -> None:
        if self.pos != len(self.fields):
            raise self.fail(f"unexpected trailing fields ({len(self.fields) - self.pos})")


def _parse_recording(cur: _FieldCursor, touched: bool, which: str) -> FtRecording:
    count = cur.take_int(f"{which} FT reading count")
    if count < 0:
        raise cur.fail(f"{which} FT reading count is negative")
    samples = []
    for i in range(count):
        what = f"{which} FT reading {i + 1}/{count}"
        timestamp = cur.take_float(f"{what} timestamp")
        channels = [cur.take_float(f"{what} channel {c}") for c in range(6)]
        samples.append(FtSample(touched, timestamp, *channels))
    return FtRecording(samples=tuple(samples), touched=touched)


def _parse_trial_fields(
    fields: list[str], line_no: int, touched_pair: tuple[bool, bool], label: TrialLabel
) -> TrialRecord:
    cur = _FieldCursor(fields, line_no)
    participant_id = cur.take("participant ID")
    trial_no = cur.take_int("trial number")
    pres_raw = cur.take("presentation")
    if pres_raw not in _PRESENTATION_FROM_STR:
        raise cur.fail(f"unknown presentation {pres_raw!r}")
    presentation = _PRESENTATION_FROM_STR[pres_raw]
    ft_first = _parse_recording(cur, touched_pair[0], "first")
    ft_second = _parse_recording(cur, touched_pair[1], "second")
    distance = cur.take_float("distance")
    resp_raw = cur.take("response")
    if resp_raw not in ("First", "Second"):
        raise cur.fail(f"unknown response {resp_raw!r}")
    response = Response(resp_raw)
    cur.done()
    return TrialRecord(
        participant_id=participant_id,
        trial_no=trial_no,
        label=label,
        presentation=presentation,
        ft_first=ft_first,
        ft_second=ft_second,
        distance=distance,
        response=response,
        correct=response_correct(presentation, response),
    )


def _write_row(fh, fields: list[str]) -> None:
    csv.writer(fh, lineterminator="\n").writerow(fields)


def append_trial_tmp(path: str | Path, record: TrialRecord) -> None:
    """Append one trial line and flush to disk before returning."""
    with open(path, "a", encoding="utf-8", newline="") as fh:
        _write_row(fh, _trial_fields(record))
        fh.flush()
        os.fsync(fh.fileno())


def read_trial_csv(
    path: str | Path,
    manifest: dict | None = None,
    leading_count: bool = True,
) -> list[TrialRecord]:
    """Parse a trial CSV back into records.

    The CSV grammar does not carry trial labels or touched flags; they are
    taken from the manifest when one is given (labels default to Trial and
    touched to False otherwise).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))

    labels = list((manifest or {}).get("labels", []))
    touched = list((manifest or {}).get("touched", []))

    declared: int | None = None
    trial_rows: list[tuple[int, list[str]]] = []  # (line number, fields)
    if leading_count:
        if not rows:
            raise FormatError("line 1: missing trial count header")
        head = rows[0]
        try:
            declared = int(head[0])
        except ValueError:
            raise FormatError(f"line 1: trial count is not an integer: {head[0]!r}") from None
        if declared < 0:
            raise FormatError("line 1: trial count is negative")
        if declared == 0:
            if len(head) > 1 or len(rows) > 1:
                raise FormatError("line 1: trial count is 0 but trial data follows")
            return []
        if len(head) == 1:
            raise FormatError("line 1: trial count declared but first trial is missing")
        trial_rows.append((1, head[1:]))
        for i, row in enumerate(rows[1:], start=2):
            trial_rows.append((i, row))
        if len(trial_rows) != declared:
            raise FormatError(
                f"line {len(rows)}: declared {declared} trials but found {len(trial_rows)}"
            )
    else:
        for i, row in enumerate(rows, start=1):
            if row:
                trial_rows.append((i, row))

    records = []
    for idx, (line_no, fields) in enumerate(trial_rows):
        label = TrialLabel(labels[idx]) if idx < len(labels) else TrialLabel.TRIAL
        pair = tuple(touched[idx]) if idx < len(touched) else (False, False)
        records.append(_parse_trial_fields(fields, line_no, pair, label))
    return records


# ----------------------------------------------------------------------
# Final archive


def _versioned(session_dir: Path, archive: SessionArchive) -> tuple[str, str, str]:
    """File names for the archive; suffixed if one already exists."""
    participant = archive.participant

    def names(suffix: str) -> tuple[str, str, str]:
        return (
            f"data{suffix}.xml",
            f"data-{participant.id}-{participant.surname}{suffix}{archive.participant_ext}",
            f"data-{participant.id}-trial{suffix}{archive.trial_ext}",
        )

    if not (session_dir / "data.xml").exists():
        return names("")
    k = 1
    while (session_dir / f"data-{k}.xml").exists():
        k += 1
    return names(f"-{k}")


def write_archive(archive: SessionArchive, session_dir: str | Path) -> ArchivePaths:
    """Write data.xml plus both CSV files; never overwrites an existing archive."""
    session_dir = Path(session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    xml_name, participant_name, trial_name = _versioned(session_dir, archive)

    p = archive.participant
    with open(session_dir / participant_name, "w", encoding="utf-8", newline="") as fh:
        _write_row(fh, [p.id, p.name, p.surname, str(p.age), p.gender.value, p.notes])

    with open(session_dir / trial_name, "w", encoding="utf-8", newline="") as fh:
        if not archive.trials:
            fh.write("0\n")
        else:
            head = [str(len(archive.trials))] + _trial_fields(archive.trials[0])
            _write_row(fh, head)
            for record in archive.trials[1:]:
                _write_row(fh, _trial_fields(record))

    xml_text = (
        '<?xml version="1.0" encoding="utf-8"?>\n'
        "\n"
        "<golem>\n"
        f"  <data data_name={quoteattr(archive.data_name)}>\n"
        f"    <participant ext_file={quoteattr(archive.participant_ext)} "
        f"filename={quoteattr(participant_name)}></participant>\n"
        f"    <trials ext_file={quoteattr(archive.trial_ext)} "
        f"filename={quoteattr(trial_name)}></trials>\n"
        "  </data>\n"
        "</golem>\n"
    )
    (session_dir / xml_name).write_text(xml_text, encoding="utf-8")

    return ArchivePaths(
        data_xml=session_dir / xml_name,
        participant_csv=session_dir / participant_name,
        trial_csv=session_dir / trial_name,
        manifest=session_dir / MANIFEST_NAME,
    )


def read_archive(session_dir: str | Path, xml_name: str = "data.xml") -> SessionArchive:
    """Read an archive back; inverse of :func:`write_archive`."""
    session_dir = Path(session_dir)
    xml_path = session_dir / xml_name
    try:
        root = ET.parse(xml_path).getroot()
    except ET.ParseError as exc:
        raise FormatError(f"{xml_path}: malformed XML: {exc}") from None

    data = root.find("data")
    if data is None:
        raise FormatError(f"{xml_path}: missing <data> element")
    participant_el = data.find("participant")
    trials_el = data.find("trials")
    if participant_el is None or trials_el is None:
        raise FormatError(f"{xml_path}: missing <participant> or <trials> element")

    with open(session_dir / participant_el.get("filename", ""), encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) != 1:
        raise FormatError("participant CSV must contain exactly one line")
    row = rows[0]
    if len(row) != 6:
        raise FormatError(f"participant line has {len(row)} fields, expected 6")
    try:
        participant = Participant(
            id=row[0], name=row[1], surname=row[2], age=int(row[3]),
            gender=Gender(row[4]), notes=row[5],
        )
    except ValueError as exc:
        raise FormatError(f"participant line: {exc}") from None

    manifest = None
    if (session_dir / MANIFEST_NAME).exists():
        manifest = read_manifest(session_dir)
    trials = read_trial_csv(session_dir / trials_el.get("filename", ""), manifest=manifest)

    return SessionArchive(
        data_name=data.get("data_name", ""),
        participant=participant,
        trials=trials,
        participant_ext=participant_el.get("ext_file", ".csv"),
        trial_ext=trials_el.get("ext_file", ".csv"),
    )


# ----------------------------------------------------------------------
# Manifest sidecar


def build_manifest(
    config: DemoConfig,
    participant: Participant,
    seed: int,
    debug_mode: bool,
    finger: FingerModel,
    records: list[TrialRecord],
    scheduler: "TrialScheduler | None",
    command_log: list[dict],
    status: str,
    resumed: bool = False,
) -> dict:
    if scheduler is not None:
        quota = [scheduler.remaining_quota()[d] for d in config.distances]
    else:
        quota = [config.experiment.number_presentations] * len(config.distances)
    return {
        "format": 1,
        "status": status,
        "resumed": resumed,
        "seed": seed,
        "debug_mode": debug_mode,
        "data_name": config.data_name,
        "participant": {
            "id": participant.id,
            "name": participant.name,
            "surname": participant.surname,
            "age": participant.age,
            "gender": participant.gender.value,
            "notes": participant.notes,
        },
        "finger": {
            "surface_height": finger.surface_height,
            "center_y": finger.center_y,
            "half_width": finger.half_width,
            "stiffness": finger.stiffness,
            "noise_std_force": finger.noise_std_force,
            "noise_std_torque": finger.noise_std_torque,
        },
        "distances": list(config.distances),
        "quota_remaining": quota,
        "labels": [r.label.value for r in records],
        "touched": [[r.ft_first.touched, r.ft_second.touched] for r in records],
        "command_log": command_log,
        "config_xml": serialize_demo_config(config),
    }


def write_manifest(session_dir: str | Path, manifest: dict) -> None:
    """Atomic replace so a crash mid-write never corrupts the manifest."""
    session_dir = Path(session_dir)
    tmp = session_dir / (MANIFEST_NAME + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, session_dir / MANIFEST_NAME)


def read_manifest(session_dir: str | Path) -> dict:
    path = Path(session_dir) / MANIFEST_NAME
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed manifest: {exc}") from None


def participant_from_manifest(manifest: dict) -> Participant:
    p = manifest["participant"]
    return Participant(
        id=p["id"], name=p["name"], surname=p["surname"], age=int(p["age"]),
        gender=Gender(p["gender"]), notes=p.get("notes", ""),
    )


def finger_from_manifest(manifest: dict) -> FingerModel:
    return FingerModel(**manifest["finger"])
