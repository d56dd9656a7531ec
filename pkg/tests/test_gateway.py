"""Wire protocol, scripted runs, and command-log replay."""

import asyncio
import filecmp
import json
import time
from dataclasses import replace

import pytest
from websockets.asyncio.client import connect

from tactile_rig.config import StepperCommand
from tactile_rig.gateway import (
    ScriptError,
    replay_manifest,
    run_script,
    run_scripted,
    serve_session,
    session_snapshot,
)
from tactile_rig.records import Response
from tactile_rig.scheduler import Presentation
from tactile_rig.session import Phase, Session

from conftest import YOUNG_CONFIG, run_full_session


def full_debug_script(n_trials: int, respond: str = "First") -> list[dict]:
    """Deterministic command list: debug mode pauses at every stepper move."""
    script = [{"kind": "confirm", "yes": True}]
    script += [{"kind": "text", "text": t} for t in ["dfs", "Ada", "foo", "31"]]
    script += [{"kind": "select", "option": "Female"}, {"kind": "text", "text": ""}]
    script += [{"kind": "confirm", "yes": True}]
    for _ in range(n_trials):
        script.append({"kind": "confirm", "yes": True})
        script.append({"kind": "select", "option": respond})
    return script


class Operator:
    """Test client speaking the newline-delimited JSON frame protocol."""

    def __init__(self, ws):
        self.ws = ws
        self.last_seq = 0
        self._req = 0

    async def recv(self) -> dict:
        frame = json.loads(await asyncio.wait_for(self.ws.recv(), timeout=5))
        assert frame["seq"] > self.last_seq, "seq must increase strictly"
        self.last_seq = frame["seq"]
        return frame

    async def send(self, command: dict, request_id: str | None = None) -> str:
        self._req += 1
        rid = request_id or f"req-{self._req}"
        await self.ws.send(json.dumps({**command, "request_id": rid}) + "\n")
        return rid

    async def until_ack(self, rid: str) -> list[dict]:
        """Collect events until the one acknowledging rid (inclusive)."""
        events = []
        while True:
            frame = await self.recv()
            events.append(frame)
            if frame.get("ack") == rid:
                return events

    async def command(self, command: dict) -> list[dict]:
        return await self.until_ack(await self.send(command))


def run_gateway_scenario(config, seed, tmp_path, scenario):
    """Run an async operator scenario against a freshly served session."""

    async def main():
        session = Session(config, seed=seed, data_root=tmp_path)
        gw = await serve_session(session)
        try:
            async with connect(gw.address) as ws:
                await scenario(Operator(ws), session, gw)
        finally:
            await gw.stop()

    asyncio.run(main())


class TestServe:
    def test_first_event_is_snapshot_with_debug_prompt(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            frame = await op.recv()
            assert frame["kind"] == "snapshot"
            assert frame["seq"] == 1
            assert frame["payload"]["prompt"] == "Debug mode: YES (Continue Y/N)"
            assert frame["payload"]["phase"] == "AwaitDebugChoice"

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_cancel_at_init_breakpoint_emits_session_end(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            await op.command({"kind": "confirm", "yes": True})
            for text in ["dfs", "Ada", "foo", "31"]:
                await op.command({"kind": "text", "text": text})
            await op.command({"kind": "select", "option": "Female"})
            await op.command({"kind": "text", "text": ""})
            events = await op.command({"kind": "confirm", "yes": False})
            end = await op.recv()
            assert end["kind"] == "session_end"
            assert end["payload"]["reason"] == "cancelled"

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_duplicate_request_id_is_idempotent(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            rid = await op.send({"kind": "confirm", "yes": True}, request_id="dup")
            await op.until_ack(rid)
            assert session.phase is Phase.INTAKE
            await op.send({"kind": "confirm", "yes": True}, request_id="dup")
            frame = await op.recv()
            assert frame.get("ack") == "dup" and frame.get("duplicate")
            assert session.phase is Phase.INTAKE  # not applied twice
            assert session.intake_field == "id"

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_rejected_event_reports_phase_mismatch(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            events = await op.command({"kind": "select", "option": "First"})
            assert events[-1]["kind"] == "error"
            assert events[-1]["payload"]["code"] == "phase_mismatch"
            assert session.phase is Phase.AWAIT_DEBUG_CHOICE

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_malformed_frame_keeps_connection(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            await op.ws.send("not json at all\n")
            frame = await op.recv()
            assert frame["kind"] == "error"
            assert frame["payload"]["code"] == "malformed_frame"
            await op.command({"kind": "confirm", "yes": True})  # still usable
            assert session.phase is Phase.INTAKE

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_unknown_command_kind_rejected(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            events = await op.command({"kind": "dance"})
            assert events[-1]["kind"] == "error"
            assert events[-1]["payload"]["code"] == "bad_command"

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_second_operator_rejected(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            async with connect(gw.address) as intruder:
                frame = json.loads(await intruder.recv())
                assert frame["kind"] == "error"
                assert frame["payload"]["code"] == "operator_present"
            await op.command({"kind": "confirm", "yes": True})  # first still owns it

        run_gateway_scenario(young_config, 0, tmp_path, scenario)

    def test_reconnect_snapshot_restores_mid_session_state(self, young_config, tmp_path):
        async def main():
            session = Session(young_config, seed=5, data_root=tmp_path)
            gw = await serve_session(session)
            try:
                async with connect(gw.address) as ws:
                    op = Operator(ws)
                    await op.recv()
                    for cmd in full_debug_script(0):
                        await op.command(cmd)
                    await op.command({"kind": "confirm", "yes": True})  # first stepper
                    assert session.phase is Phase.AWAIT_RESPONSE
                # Operator console killed mid-trial; a fresh one reconnects.
                async with connect(gw.address) as ws:
                    op = Operator(ws)
                    frame = await op.recv()
                    payload = frame["payload"]
                    assert frame["kind"] == "snapshot"
                    assert payload["phase"] == "AwaitResponse"
                    assert payload["prompt"] == "[Demo] Response: First"
                    assert payload["response_enabled"] is True
                    assert payload["trial"]["label"] == "Training"
                    assert payload["ft_recent"]  # live trace survives the reload
            finally:
                await gw.stop()

        asyncio.run(main())

    def test_ft_live_and_trial_result_events_flow(self, young_config, tmp_path):
        async def scenario(op, session, gw):
            await op.recv()
            for cmd in full_debug_script(0):
                await op.command(cmd)
            events = await op.command({"kind": "confirm", "yes": True})
            kinds = [e["kind"] for e in events]
            assert "ft_live" in kinds
            ft = next(e for e in events if e["kind"] == "ft_live")
            assert set(ft["payload"]) == {"t", "fx", "fy", "fz", "tx", "ty", "tz", "touched"}
            events = await op.command({"kind": "select", "option": "First"})
            result = next(e for e in events if e["kind"] == "trial_result")
            assert result["payload"]["label"] == "Training"
            assert isinstance(result["payload"]["correct"], bool)

        run_gateway_scenario(young_config, 0, tmp_path, scenario)


class TestSnapshot:
    def test_snapshot_carries_stepper_card_and_quota(self, young_config, tmp_path):
        session = Session(young_config, seed=3, data_root=tmp_path)
        from conftest import drive_to_first_trial

        drive_to_first_trial(session)
        snap = session_snapshot(session)
        assert snap["phase"] == "AwaitStepperMove"
        assert snap["stepper"]["steps"] == pytest.approx(snap["stepper"]["mm"] * 363.0)
        assert len(snap["quota"]) == 7
        assert all(q["total"] == 10 for q in snap["quota"])
        assert snap["ft_threshold"] == 0.25


class TestScriptedRuns:
    def test_full_young_run_under_two_seconds(self, tmp_path):
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps(full_debug_script(71)))
        t0 = time.monotonic()
        session = run_scripted(YOUNG_CONFIG, script_path, seed=11, data_root=tmp_path)
        elapsed = time.monotonic() - t0
        assert session.phase is Phase.SESSION_COMPLETE
        assert len(session.records) == 71
        assert elapsed < 2.0
        assert session.archive_paths.data_xml.exists()

    def test_escape_after_three_trials(self, young_config, tmp_path):
        script = full_debug_script(3) + [{"kind": "escape"}]
        session = Session(young_config, seed=2, data_root=tmp_path)
        run_script(session, script)
        assert session.phase is Phase.CANCELLED
        assert len(session.records) == 3
        archive_trials = session.archive_paths.trial_csv.read_text().splitlines()
        assert len(archive_trials) == 3

    def test_always_first_matches_truth_table(self, young_config, tmp_path):
        session = Session(young_config, seed=8, data_root=tmp_path)
        run_script(session, full_debug_script(71, respond="First"))
        for record in session.records:
            assert record.response is Response.FIRST
            assert record.correct == (record.presentation is Presentation.TWO_PINS_FIRST)

    def test_script_phase_mismatch_reports_line(self, young_config, tmp_path):
        script = [{"kind": "confirm", "yes": True}, {"kind": "select", "option": "First"}]
        session = Session(young_config, seed=0, data_root=tmp_path)
        with pytest.raises(ScriptError, match="line 2"):
            run_script(session, script)

    def test_script_unknown_kind_reports_line(self, young_config, tmp_path):
        session = Session(young_config, seed=0, data_root=tmp_path)
        with pytest.raises(ScriptError, match="line 1"):
            run_script(session, [{"kind": "wiggle"}])


class TestReplay:
    def test_replay_reproduces_archive_bytes(self, young_config, tmp_path):
        config = replace(
            young_config,
            smposes=(StepperCommand(0.001), StepperCommand(0.002)),
            experiment=replace(young_config.experiment, number_presentations=2),
        )
        for seed in (1, 2, 3):
            original = run_full_session(config, seed, tmp_path / f"orig{seed}")
            replayed = replay_manifest(
                original.session_dir / "manifest.json", tmp_path / f"replay{seed}"
            )
            assert replayed.records == original.records
            for path in (
                original.archive_paths.data_xml,
                original.archive_paths.participant_csv,
                original.archive_paths.trial_csv,
            ):
                twin = replayed.session_dir / path.name
                assert filecmp.cmp(path, twin, shallow=False), path.name

    def test_replay_does_not_need_the_config_file(self, young_config, tmp_path):
        # The manifest embeds the config; only the manifest travels.
        original = run_full_session(
            replace(young_config, smposes=(StepperCommand(0.001),)),
            4,
            tmp_path / "orig",
        )
        replayed = replay_manifest(original.session_dir / "manifest.json", tmp_path / "replay")
        assert replayed.console.lines == original.console.lines
