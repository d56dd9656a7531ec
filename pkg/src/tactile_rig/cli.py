"""Command-line entry points.

``run`` drives a session either interactively on the terminal, headlessly
from a script file, or served over a WebSocket for the browser console.
``replay`` rebuilds a finished session from its manifest and verifies the
archive.  ``analyze`` prints per-distance accuracy and the threshold fit.
``validate-config`` checks a config file and reports every violation.

The environment variable ``TACTILE_RIG_DATA`` overrides the config's data
path for all commands that write session data.
"""

from __future__ import annotations

import argparse
import asyncio
import filecmp
import json
import os
import sys
import time
from pathlib import Path

from . import analysis, gateway, persistence
from .config import ConfigError, load_config, validate_config
from .session import (
    Confirm,
    Escape,
    Phase,
    PhaseMismatchError,
    SelectOption,
    Session,
    TextInput,
    resume_session,
)

DATA_ENV_VAR = "TACTILE_RIG_DATA"


def _data_root(args) -> str | None:
    return os.environ.get(DATA_ENV_VAR) or getattr(args, "data_root", None)


def _make_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int.from_bytes(os.urandom(8), "big")
    print(f"seed: {seed} (pass --seed {seed} to reproduce)")
    return seed


def _print_new_console(session: Session, start: int) -> int:
    for line in session.console.lines[start:]:
        print(line)
    return len(session.console.lines)


def _interactive_event(session: Session):
    """Read one line from the operator and map it onto an event."""
    try:
        line = input("> ").strip()
    except (EOFError, KeyboardInterrupt):
        return Escape()
    if line.lower() == "esc":
        return Escape()

    phase = session.phase
    if phase in (Phase.AWAIT_DEBUG_CHOICE, Phase.AWAIT_INIT_CONFIRM, Phase.AWAIT_STEPPER_MOVE):
        if line == "Y":
            return Confirm(True)
        if line == "N":
            return Confirm(False)
        print("press Y or N (capital), or 'esc' to quit")
        return None
    if phase is Phase.INTAKE:
        if session.intake_field == "gender":
            option = {"f": "Female", "female": "Female", "m": "Male", "male": "Male"}.get(
                line.lower()
            )
            if option is None:
                print("select F or M")
                return None
            return SelectOption(option)
        return TextInput(line)
    if phase is Phase.AWAIT_RESPONSE:
        option = {"1": "First", "first": "First", "2": "Second", "second": "Second"}.get(
            line.lower()
        )
        if option is None:
            print("select 1 (First) or 2 (Second)")
            return None
        return SelectOption(option)
    print(f"no input expected in phase {phase.value}")
    return None


def _run_interactive(session: Session) -> int:
    printed = 0
    printed = _print_new_console(session, printed)
    while not session.is_terminal:
        event = _interactive_event(session)
        if event is None:
            continue
        try:
            session.submit_event(event)
        except PhaseMismatchError as exc:
            print(f"rejected: {exc}")
        printed = _print_new_console(session, printed)
    if session.archive_paths:
        print(f"data saved under {session.archive_paths.data_xml.parent}")
    return 0


async def _run_served(session: Session, addr: str, realtime: bool) -> int:
    host, _, port_text = addr.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        print(f"invalid --serve address {addr!r}; expected HOST:PORT or :PORT", file=sys.stderr)
        return 2
    gw = await gateway.serve_session(session, host, port, realtime=realtime)
    print(f"serving operator console on {gw.address}", flush=True)
    try:
        while not session.is_terminal:
            await asyncio.sleep(0.2)
        # Give the console a moment to receive the session_end event.
        await asyncio.sleep(1.0)
    finally:
        await gw.stop()
    if session.archive_paths:
        print(f"data saved under {session.archive_paths.data_xml.parent}")
    return 0


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = _make_seed(args)
    data_root = _data_root(args)

    if args.resume:
        session = resume_session(config, args.resume, data_root=data_root)
        print(f"resuming session for participant {session.participant.id}")
    else:
        session = Session(config, seed=seed, data_root=data_root)

    if args.debug and not args.resume:
        session.submit_event(Confirm(True))

    if args.script:
        t0 = time.monotonic()
        gateway.run_script(session, gateway.load_script(args.script))
        elapsed = time.monotonic() - t0
        print(
            f"script complete: phase {session.phase.value}, "
            f"{len(session.records)} trials in {elapsed:.3f} s"
        )
        if session.archive_paths:
            print(f"data saved under {session.archive_paths.data_xml.parent}")
        return 0
    if args.serve:
        return asyncio.run(_run_served(session, args.serve, args.realtime))
    return _run_interactive(session)


def cmd_replay(args) -> int:
    manifest_path = Path(args.manifest)
    if manifest_path.is_dir():
        manifest_path = manifest_path / persistence.MANIFEST_NAME
    out_root = Path(args.out) if args.out else manifest_path.parent.parent / "replay"
    session = gateway.replay_manifest(manifest_path, out_root)
    print(f"replayed {len(session.records)} trials into {session.session_dir}")

    original_dir = manifest_path.parent
    ok = True
    if session.archive_paths is not None:
        for path in (
            session.archive_paths.data_xml,
            session.archive_paths.participant_csv,
            session.archive_paths.trial_csv,
        ):
            original = original_dir / path.name
            if not original.exists():
                print(f"  {path.name}: original missing, skipped")
                continue
            same = filecmp.cmp(original, path, shallow=False)
            ok = ok and same
            print(f"  {path.name}: {'identical' if same else 'DIFFERS'}")
    return 0 if ok else 1


def cmd_analyze(args) -> int:
    session_dir = Path(args.session_dir)
    try:
        archive = persistence.read_archive(session_dir)
    except (OSError, persistence.FormatError) as exc:
        print(f"cannot read archive: {exc}", file=sys.stderr)
        return 2

    summary = analysis.summarize(archive.trials, warn=lambda m: print(f"warning: {m}"))

    if args.json:
        payload = {
            "participant": archive.participant.id,
            "per_distance": [
                {
                    "distance_mm": s.distance * 1000.0,
                    "n": s.n,
                    "correct": s.n_correct,
                    "proportion": s.proportion,
                }
                for s in summary.per_distance
            ],
            "fit": (
                {
                    "threshold_mm": summary.fit.threshold * 1000.0,
                    "slope_per_mm": summary.fit.slope / 1000.0,
                    "nll": summary.fit.nll,
                }
                if summary.fit
                else None
            ),
            "fit_error": summary.fit_error,
        }
        print(json.dumps(payload, indent=2))
        return 0

    print(f"participant {archive.participant.id}: {len(archive.trials)} trials")
    print(f"{'distance [mm]':>14}  {'n':>4}  {'proportion':>10}")
    for s in summary.per_distance:
        print(f"{s.distance * 1000.0:>14.1f}  {s.n:>4}  {s.proportion:>10.3f}")
    if summary.fit:
        print(
            f"threshold (75% correct): {summary.fit.threshold * 1000.0:.3f} mm, "
            f"slope {summary.fit.slope / 1000.0:.3f} /mm"
        )
    else:
        print(f"no threshold fit: {summary.fit_error}")
    return 0


def cmd_validate_config(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    report = validate_config(config)
    if report.ok:
        print(
            f"ok: {len(config.wposes)} wposes, {len(config.smposes)} distances, "
            f"{config.experiment.number_presentations} presentations each"
        )
        return 0
    print(report, file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tactile-rig",
        description="2AFC pin-discrimination sessions on a simulated delta-robot rig",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a session (interactive, scripted, or served)")
    run.add_argument("--config", required=True, help="demo configuration XML")
    run.add_argument("--seed", type=int, default=None, help="RNG seed (default: entropy, logged)")
    run.add_argument("--debug", action="store_true", help="answer the debug question with Y")
    run.add_argument("--serve", metavar="ADDR", help="serve a WebSocket console on HOST:PORT")
    run.add_argument("--realtime", action="store_true", help="pace events against the wall clock")
    run.add_argument("--script", metavar="FILE", help="apply a JSON list of operator commands")
    run.add_argument("--resume", metavar="DIR", help="resume an interrupted session directory")
    run.add_argument("--data-root", help="where session data is written (overrides config)")
    run.set_defaults(func=cmd_run)

    replay = sub.add_parser("replay", help="re-run a session from its manifest")
    replay.add_argument("manifest", help="manifest.json (or its session directory)")
    replay.add_argument("--out", help="output root for the replayed archive")
    replay.set_defaults(func=cmd_replay)

    analyze = sub.add_parser("analyze", help="per-distance accuracy and threshold fit")
    analyze.add_argument("session_dir", help="session directory containing data.xml")
    group = analyze.add_mutually_exclusive_group()
    group.add_argument("--json", action="store_true", help="machine-readable output")
    group.add_argument("--table", action="store_true", help="human-readable table (default)")
    analyze.set_defaults(func=cmd_analyze)

    validate = sub.add_parser("validate-config", help="check a config file")
    validate.add_argument("config", help="demo configuration XML")
    validate.set_defaults(func=cmd_validate_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
