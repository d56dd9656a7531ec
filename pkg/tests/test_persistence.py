"""On-disk formats: round trips, golden bytes, and corruption reporting."""

import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactile_rig.config import parse_demo_config
from tactile_rig.persistence import (
    FormatError,
    SessionArchive,
    append_trial_tmp,
    read_archive,
    read_trial_csv,
    write_archive,
)
from tactile_rig.records import Gender, Participant, Response, TrialRecord
from tactile_rig.rig import FtRecording, FtSample
from tactile_rig.scheduler import Presentation, TrialLabel

from conftest import run_full_session

GOLDEN_DIR = Path(__file__).parent / "golden"

# The exact config and seed the committed golden files were generated from.
GOLDEN_CONFIG_XML = """\
<golem>
  <demo data_name="data.demo">
    <smpose name="sm_commands" dim="2" c1="0.001" c2="0.0"/>
    <touch sensor="FTDAQ+FTDAQ_Delta3" event_time_wait="0.10"
           movement_duration="2.0" poking_duration="5.0">
      <threshold v1="0.5" v2="0.5" v3="0.25" w1="0.1" w2="0.1" w3="0.1"/>
      <motion_single_pin v1="0.0" v2="+0.024" v3="0.0"/>
      <motion_two_pins v1="0.0" v2="-0.018" v3="0.0"/>
      <poking v1="0.0" v2="0.0" v3="-0.02"/>
      <init v1="-0.1" v2="0.0" v3="-0.075"/>
    </touch>
    <experiment_data participant_ext_file=".csv" trial_ext_file=".csv"
        number_training_trials="1" training_index="1" number_presentations="1"
        number_ftdata_recordings="10" path="./data/"></experiment_data>
  </demo>
</golem>
"""
GOLDEN_SEED = 2024


def make_participant(**overrides) -> Participant:
    base = dict(id="p7", name="Kim", surname="Vos", age=44, gender=Gender.MALE, notes="")
    base.update(overrides)
    return Participant(**base)


def make_recording(rng: random.Random, touched: bool, length: int = 3) -> FtRecording:
    samples = tuple(
        FtSample(
            touched,
            round(rng.uniform(0, 100), 3),
            *(round(rng.gauss(0, 0.3), 6) for _ in range(6)),
        )
        for _ in range(length)
    )
    return FtRecording(samples=samples, touched=touched)


def make_record(rng: random.Random, trial_no: int = 1, label=TrialLabel.TRIAL) -> TrialRecord:
    presentation = rng.choice(list(Presentation))
    response = rng.choice(list(Response))
    touched = rng.random() < 0.8
    from tactile_rig.records import response_correct

    return TrialRecord(
        participant_id="p7",
        trial_no=trial_no,
        label=label,
        presentation=presentation,
        ft_first=make_recording(rng, touched),
        ft_second=make_recording(rng, touched),
        distance=round(rng.uniform(0, 0.01), 6),
        response=response,
        correct=response_correct(presentation, response),
    )


def manifest_for(records) -> dict:
    return {
        "labels": [r.label.value for r in records],
        "touched": [[r.ft_first.touched, r.ft_second.touched] for r in records],
    }


class TestGoldenFixture:
    def test_seeded_run_matches_committed_bytes(self, tmp_path):
        config = parse_demo_config(GOLDEN_CONFIG_XML)
        session = run_full_session(config, GOLDEN_SEED, tmp_path)
        assert len(session.records) == 2
        for name in ("data.xml", "data-dfs-foo.csv", "data-dfs-trial.csv", "tmp.csv"):
            produced = (session.session_dir / name).read_bytes()
            expected = (GOLDEN_DIR / name).read_bytes()
            assert produced == expected, f"{name} drifted from the golden fixture"

    def test_golden_trial_csv_parses(self):
        records = read_trial_csv(GOLDEN_DIR / "data-dfs-trial.csv")
        assert len(records) == 2
        assert records[0].distance == 0.001
        assert all(len(r.ft_first.samples) == 10 for r in records)


class TestTmpFile:
    def test_append_accumulates_lines(self, tmp_path):
        rng = random.Random(0)
        path = tmp_path / "tmp.csv"
        path.write_text("")
        records = [make_record(rng, trial_no=i + 1) for i in range(5)]
        for i, record in enumerate(records, start=1):
            append_trial_tmp(path, record)
            assert path.read_text().count("\n") == i

    def test_appended_line_reparses_equal(self, tmp_path):
        rng = random.Random(1)
        record = make_record(rng)
        path = tmp_path / "tmp.csv"
        append_trial_tmp(path, record)
        back = read_trial_csv(path, manifest=manifest_for([record]), leading_count=False)
        assert back == [record]

    def test_full_session_tmp_line_count(self, young_config, tmp_path):
        from dataclasses import replace
        from tactile_rig.config import StepperCommand

        config = replace(
            young_config,
            smposes=(StepperCommand(0.001), StepperCommand(0.002)),
            experiment=replace(young_config.experiment, number_presentations=2),
        )
        session = run_full_session(config, 3, tmp_path)
        assert len(session.records) == 5
        assert (session.session_dir / "tmp.csv").read_text().count("\n") == 5


class TestArchiveRoundTrip:
    def test_synthetic_archive_round_trips(self, tmp_path):
        rng = random.Random(7)
        records = [make_record(rng, trial_no=i + 1) for i in range(4)]
        archive = SessionArchive("data.demo", make_participant(), records)
        paths = write_archive(archive, tmp_path)
        # labels/touched ride in the manifest; provide one alongside
        from tactile_rig.persistence import write_manifest

        write_manifest(tmp_path, manifest_for(records))
        assert read_archive(tmp_path) == archive

    def test_zero_trial_archive(self, tmp_path):
        archive = SessionArchive("data.demo", make_participant(), [])
        paths = write_archive(archive, tmp_path)
        assert paths.trial_csv.read_text() == "0\n"
        assert read_archive(tmp_path) == archive

    def test_engine_sessions_round_trip(self, young_config, tmp_path):
        from dataclasses import replace
        from tactile_rig.config import StepperCommand

        for seed in range(5):
            config = replace(
                young_config,
                smposes=tuple(StepperCommand(c) for c in (0.0005, 0.001, 0.002)[: 1 + seed % 3]),
                experiment=replace(
                    young_config.experiment,
                    number_presentations=1 + seed % 2,
                    number_training_trials=seed % 3,
                ),
            )
            root = tmp_path / f"s{seed}"
            session = run_full_session(
                config, seed, root, respond="First" if seed % 2 else "Second"
            )
            stored = read_archive(session.session_dir)
            in_memory = SessionArchive("data.demo", session.participant, session.records)
            assert stored == in_memory

    def test_filenames_follow_the_scheme(self, tmp_path):
        archive = SessionArchive("data.demo", make_participant(id="ab", surname="Cd"), [])
        paths = write_archive(archive, tmp_path)
        assert paths.data_xml.name == "data.xml"
        assert paths.participant_csv.name == "data-ab-Cd.csv"
        assert paths.trial_csv.name == "data-ab-trial.csv"
        xml = paths.data_xml.read_text()
        assert 'filename="data-ab-Cd.csv"' in xml
        assert 'filename="data-ab-trial.csv"' in xml
        assert 'data_name="data.demo"' in xml

    def test_existing_archive_gets_versioned_suffix(self, tmp_path):
        archive = SessionArchive("data.demo", make_participant(), [])
        first = write_archive(archive, tmp_path)
        second = write_archive(archive, tmp_path)
        third = write_archive(archive, tmp_path)
        assert first.data_xml.name == "data.xml"
        assert second.data_xml.name == "data-1.xml"
        assert third.data_xml.name == "data-2.xml"
        assert second.participant_csv.name == "data-p7-Vos-1.csv"
        assert first.data_xml.read_bytes() != b""  # original untouched
        assert 'filename="data-p7-trial-1.csv"' in second.data_xml.read_text()

    def test_notes_with_commas_quoted(self, tmp_path):
        participant = make_participant(notes="left hand, cold room")
        archive = SessionArchive("data.demo", participant, [])
        paths = write_archive(archive, tmp_path)
        line = paths.participant_csv.read_text()
        assert '"left hand, cold room"' in line
        assert read_archive(tmp_path).participant == participant


class TestPrecision:
    def test_channels_six_decimals_timestamps_three(self, tmp_path):
        record = make_record(random.Random(2))
        path = tmp_path / "tmp.csv"
        append_trial_tmp(path, record)
        fields = path.read_text().strip().split(",")
        ft_count = int(fields[3])
        first_reading = fields[4 : 4 + 7]
        assert len(first_reading[0].split(".")[1]) == 3  # timestamp
        for value in first_reading[1:]:
            assert len(value.split(".")[1]) == 6


class TestCorruption:
    def _write_rows(self, path: Path, text: str) -> Path:
        path.write_text(text)
        return path

    def test_truncated_ft_block(self, tmp_path):
        record = make_record(random.Random(3))
        path = tmp_path / "trial.csv"
        append_trial_tmp(path, record)
        fields = path.read_text().strip().split(",")
        broken = ",".join(["1"] + fields[:-10])  # leading count, then chopped line
        bad = self._write_rows(tmp_path / "broken.csv", broken + "\n")
        with pytest.raises(FormatError, match="line 1"):
            read_trial_csv(bad)

    def test_declared_count_mismatch(self, tmp_path):
        record = make_record(random.Random(4))
        path = tmp_path / "trial.csv"
        append_trial_tmp(path, record)
        line = path.read_text().strip()
        bad = self._write_rows(tmp_path / "bad.csv", "2," + line + "\n")
        with pytest.raises(FormatError, match="declared 2 trials but found 1"):
            read_trial_csv(bad)

    def test_zero_count_with_trailing_data(self, tmp_path):
        bad = self._write_rows(tmp_path / "bad.csv", "0,p7,1\n")
        with pytest.raises(FormatError, match="trial count is 0"):
            read_trial_csv(bad)

    def test_reading_count_not_integer(self, tmp_path):
        bad = self._write_rows(tmp_path / "bad.csv", "1,p7,1,SinglePinFirst,ten,0.0\n")
        with pytest.raises(FormatError, match="not an integer"):
            read_trial_csv(bad)

    def test_unknown_presentation(self, tmp_path):
        bad = self._write_rows(tmp_path / "bad.csv", "1,p7,1,BothPins,0,0,0.001,First\n")
        with pytest.raises(FormatError, match="BothPins"):
            read_trial_csv(bad)

    def test_trailing_fields_rejected(self, tmp_path):
        bad = self._write_rows(
            tmp_path / "bad.csv", "1,p7,1,SinglePinFirst,0,0,0.001000,First,extra\n"
        )
        with pytest.raises(FormatError, match="trailing"):
            read_trial_csv(bad)


# Property: any well-formed batch of records survives write + read.
_small_float = st.floats(min_value=-5, max_value=5, allow_nan=False).map(lambda x: round(x, 6))
_stamp = st.floats(min_value=0, max_value=9999, allow_nan=False).map(lambda x: round(x, 3))


@st.composite
def trial_records(draw, trial_no: int):
    touched = draw(st.booleans())
    presentation = draw(st.sampled_from(list(Presentation)))
    response = draw(st.sampled_from(list(Response)))
    from tactile_rig.records import response_correct

    def recording():
        n = draw(st.integers(min_value=0, max_value=3))
        samples = tuple(
            FtSample(touched, draw(_stamp), *(draw(_small_float) for _ in range(6)))
            for _ in range(n)
        )
        return FtRecording(samples=samples, touched=touched)

    return TrialRecord(
        participant_id=draw(st.text(st.characters(categories=("L", "N")), min_size=1, max_size=8)),
        trial_no=trial_no,
        label=draw(st.sampled_from(list(TrialLabel))),
        presentation=presentation,
        ft_first=recording(),
        ft_second=recording(),
        distance=draw(st.floats(min_value=0, max_value=0.01, allow_nan=False).map(lambda x: round(x, 6))),
        response=response,
        correct=response_correct(presentation, response),
    )


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_trial_csv_round_trip_property(tmp_path_factory, data):
    n = data.draw(st.integers(min_value=0, max_value=4))
    records = [data.draw(trial_records(i + 1)) for i in range(n)]
    root = tmp_path_factory.mktemp("csv")
    archive = SessionArchive("data.demo", make_participant(), records)
    write_archive(archive, root)
    from tactile_rig.persistence import write_manifest

    write_manifest(root, manifest_for(records))
    assert read_archive(root).trials == records
