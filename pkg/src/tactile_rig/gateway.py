"""Network and headless front doors for the session engine.

The wire protocol is newline-delimited JSON text frames over a WebSocket.
The operator console sends commands (``confirm``/``text``/``select``/
``escape``, each tagged with a ``request_id``); the gateway answers with a
stream of events (``snapshot``/``prompt``/``ft_live``/``trial_result``/
``session_end``/``error``) whose ``seq`` increases strictly per connection.
A snapshot always carries enough to rebuild the whole display, so a console
reconnecting mid-session recovers from its first frame.  Only one operator
may be connected at a time.

``run_scripted`` executes a pre-recorded list of operator commands with no
network involved; ``replay_manifest`` rebuilds a finished session from its
manifest and reproduces its archive byte for byte.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .config import DemoConfig, parse_demo_config
from .persistence import read_manifest
from .rig import FingerModel, stepper_steps
from .session import (
    Phase,
    PhaseMismatchError,
    Session,
    event_from_dict,
)

COMMAND_QUEUE_DEPTH = 16
FT_LIVE_PERIOD = 0.1  # s of virtual time between ft_live events (10 Hz)
SNAPSHOT_FT_WINDOW = 50


class GatewayError(Exception):
    pass


class ScriptError(GatewayError):
    """A scripted command was illegal for the session phase it met."""


def session_snapshot(session: Session) -> dict:
    """Everything a late-joining console needs to draw the current screen."""
    exp = session.config.experiment
    plan = session.current_plan
    snapshot: dict = {
        "phase": session.phase.value,
        "prompt": session.prompt,
        "debug_mode": session.debug_mode,
        "participant_id": session.participant.id if session.participant else None,
        "intake_field": None,
        "response_enabled": session.phase is Phase.AWAIT_RESPONSE,
        "records": len(session.records),
        "correct_count": sum(1 for r in session.records if r.correct),
        "last_correct": session.records[-1].correct if session.records else None,
        "ft_threshold": session.config.touch.threshold.v3,
        "ft_recent": [
            {
                "t": s.timestamp,
                "fx": s.fx, "fy": s.fy, "fz": s.fz,
                "tx": s.tx, "ty": s.ty, "tz": s.tz,
                "touched": s.touched,
            }
            for s in session.ft_trace[-SNAPSHOT_FT_WINDOW:]
        ],
        "trial": None,
        "stepper": None,
        "quota": None,
        "end_reason": session.end_reason,
    }
    snapshot["intake_field"] = session.intake_field
    if plan is not None:
        snapshot["trial"] = {
            "label": plan.label.value,
            "index": plan.index,
            "total": session.group_total(plan.label),
            "distance_mm": plan.distance * 1000.0,
            "presentation": plan.presentation.value,
        }
    if session.phase is Phase.AWAIT_STEPPER_MOVE and plan is not None:
        snapshot["stepper"] = {
            "mm": plan.distance * 1000.0,
            "steps": stepper_steps(plan.distance),
        }
    if session.scheduler is not None:
        quota = session.scheduler.remaining_quota()
        snapshot["quota"] = [
            {
                "distance_mm": d * 1000.0,
                "presented": exp.number_presentations - remaining,
                "total": exp.number_presentations,
                "available": remaining > 0,
            }
            for d, remaining in quota.items()
        ]
    return snapshot


class _EventFeed:
    """Tracks what has already been published for one session."""

    def __init__(self, session: Session):
        self.session = session
        self.console_idx = len(session.console.lines)
        self.records_idx = len(session.records)
        self.ft_idx = len(session.ft_trace)
        self.last_ft_time = float("-inf")

    def collect(self, ack: str | None = None, ok: bool = True) -> list[dict]:
        """Events produced since the last collect, ending with a snapshot."""
        session = self.session
        events: list[dict] = []

        for line in session.console.lines[self.console_idx:]:
            if not line.startswith("FT ["):
                events.append({"kind": "prompt", "payload": {"text": line}})
        self.console_idx = len(session.console.lines)

        for sample in session.ft_trace[self.ft_idx:]:
            if sample.timestamp >= self.last_ft_time + FT_LIVE_PERIOD - 1e-9:
                self.last_ft_time = sample.timestamp
                events.append(
                    {
                        "kind": "ft_live",
                        "payload": {
                            "t": sample.timestamp,
                            "fx": sample.fx, "fy": sample.fy, "fz": sample.fz,
                            "tx": sample.tx, "ty": sample.ty, "tz": sample.tz,
                            "touched": sample.touched,
                        },
                    }
                )
        self.ft_idx = len(session.ft_trace)

        for record in session.records[self.records_idx:]:
            events.append(
                {
                    "kind": "trial_result",
                    "payload": {
                        "trial_no": record.trial_no,
                        "label": record.label.value,
                        "presentation": record.presentation.value,
                        "distance_mm": record.distance * 1000.0,
                        "response": record.response.value,
                        "correct": record.correct,
                        "touched": [record.ft_first.touched, record.ft_second.touched],
                    },
                }
            )
        self.records_idx = len(session.records)

        snapshot = {"kind": "snapshot", "payload": session_snapshot(session)}
        if ack is not None:
            snapshot["ack"] = ack
            snapshot["ok"] = ok
        events.append(snapshot)

        if session.is_terminal:
            reason = "complete" if session.phase is Phase.SESSION_COMPLETE else "cancelled"
            events.append(
                {
                    "kind": "session_end",
                    "payload": {
                        "reason": reason,
                        "detail": session.end_reason,
                        "records": len(session.records),
                    },
                }
            )
        return events


class SessionGateway:
    """Serves one session to one operator over a WebSocket."""

    def __init__(
        self,
        session: Session,
        host: str = "127.0.0.1",
        port: int = 0,
        realtime: bool = False,
    ):
        self.session = session
        self.host = host
        self.port = port
        self.realtime = realtime  # pace event delivery against the virtual clock
        self._server = None
        self._operator = None  # the connection currently holding the session
        self._lock = asyncio.Lock()  # serializes command application

    async def start(self) -> None:
        self._server = await ws_serve(self._handler, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    @property
    def address(self) -> str:
        return f"ws://{self.host}:{self.port}"

    async def _handler(self, conn) -> None:
        if self._operator is not None:
            await self._send(conn, 1, {
                "kind": "error",
                "payload": {"code": "operator_present", "message": "another operator is connected"},
            })
            await conn.close()
            return

        self._operator = conn
        queue: asyncio.Queue = asyncio.Queue(maxsize=COMMAND_QUEUE_DEPTH)
        seq = 0
        seen: set[str] = set()  # request_ids already applied (duplicate-click guard)
        feed = _EventFeed(self.session)

        async def send_events(events: list[dict]) -> None:
            nonlocal seq
            for event in events:
                seq += 1
                await self._send(conn, seq, event)

        try:
            # Late joiners reconstruct their display from this first snapshot.
            feed.console_idx = len(self.session.console.lines)
            feed.records_idx = len(self.session.records)
            feed.ft_idx = len(self.session.ft_trace)
            await send_events(feed.collect())

            owner = asyncio.create_task(self._owner_loop(queue, feed, send_events, seen))
            try:
                async for message in conn:
                    try:
                        frame = json.loads(message)
                        if not isinstance(frame, dict):
                            raise ValueError("frame is not an object")
                    except ValueError as exc:
                        await send_events([{
                            "kind": "error",
                            "payload": {"code": "malformed_frame", "message": str(exc)},
                        }])
                        continue
                    try:
                        queue.put_nowait(frame)
                    except asyncio.QueueFull:
                        await send_events([{
                            "kind": "error",
                            "payload": {"code": "busy", "message": "command queue is full"},
                            "ack": frame.get("request_id"),
                        }])
            finally:
                owner.cancel()
                try:
                    await owner
                except asyncio.CancelledError:
                    pass
        except ConnectionClosed:
            pass
        finally:
            self._operator = None

    async def _owner_loop(self, queue, feed, send_events, seen) -> None:
        while True:
            frame = await queue.get()
            request_id = frame.get("request_id")
            if request_id is not None and request_id in seen:
                # Duplicate click: acknowledge again without re-applying.
                await send_events([{
                    "kind": "snapshot",
                    "payload": session_snapshot(self.session),
                    "ack": request_id,
                    "ok": True,
                    "duplicate": True,
                }])
                continue
            try:
                event = event_from_dict(frame)
            except (ValueError, KeyError) as exc:
                await send_events([{
                    "kind": "error",
                    "payload": {"code": "bad_command", "message": str(exc)},
                    "ack": request_id,
                }])
                continue
            async with self._lock:
                before = self.session.rig.sim_time
                try:
                    self.session.submit_event(event)
                except PhaseMismatchError as exc:
                    events = [{
                        "kind": "error",
                        "payload": {"code": "phase_mismatch", "message": str(exc)},
                        "ack": request_id,
                    }]
                else:
                    if self.realtime:
                        await asyncio.sleep(max(0.0, self.session.rig.sim_time - before))
                    events = feed.collect(ack=request_id)
            if request_id is not None:
                seen.add(request_id)
            await send_events(events)

    @staticmethod
    async def _send(conn, seq: int, event: dict) -> None:
        frame = dict(event)
        frame["seq"] = seq
        try:
            await conn.send(json.dumps(frame) + "\n")
        except ConnectionClosed:
            pass


async def serve_session(
    session: Session,
    host: str = "127.0.0.1",
    port: int = 0,
    realtime: bool = False,
) -> SessionGateway:
    """Start serving; returns once the socket is bound."""
    gateway = SessionGateway(session, host, port, realtime=realtime)
    await gateway.start()
    return gateway


# ----------------------------------------------------------------------
# Headless execution


def load_script(path: str | Path) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ScriptError("script file must contain a JSON list of commands")
    return data


def run_script(session: Session, script: list[dict]) -> Session:
    """Apply a list of command dicts; abort with phase and line on mismatch."""
    for line_no, frame in enumerate(script, start=1):
        try:
            event = event_from_dict(frame)
        except (ValueError, KeyError, TypeError) as exc:
            raise ScriptError(f"script line {line_no}: {exc}") from None
        try:
            session.submit_event(event)
        except PhaseMismatchError as exc:
            raise ScriptError(
                f"script line {line_no}: command illegal in phase "
                f"{session.phase.value}: {exc}"
            ) from None
    return session


def run_scripted(
    config_path: str | Path,
    script_path: str | Path,
    seed: int,
    data_root: str | Path | None = None,
    finger: FingerModel | None = None,
) -> Session:
    """Execute a whole session from a script file on the virtual clock."""
    config = parse_demo_config(Path(config_path).read_text(encoding="utf-8"))
    session = Session(config, finger, seed, data_root)
    return run_script(session, load_script(script_path))


def replay_manifest(
    manifest_path: str | Path,
    out_root: str | Path,
    config: DemoConfig | None = None,
) -> Session:
    """Re-run a session from its manifest's command log.

    With the same config, seed, and finger, the rebuilt archive is byte
    identical to the original.
    """
    manifest_path = Path(manifest_path)
    manifest = (
        read_manifest(manifest_path.parent)
        if manifest_path.name == "manifest.json"
        else json.loads(manifest_path.read_text(encoding="utf-8"))
    )
    if manifest.get("resumed"):
        raise GatewayError("resumed sessions carry a partial command log and cannot be replayed")
    if config is None:
        config = parse_demo_config(manifest["config_xml"])
    finger = FingerModel(**manifest["finger"])
    session = Session(config, finger, int(manifest["seed"]), data_root=out_root)
    return run_script(session, manifest["command_log"])
