"""The armstack command: serve the robot, jog it, run motion scripts.

Exit codes are a stable contract: 0 success, 2 configuration errors,
3 transport or connection failures, 4 motion failures (unreachable pose or
joint limit, reported with the script line).
"""

from __future__ import annotations

import json
import math
import os
import sys
import threading
import time
from pathlib import Path

import click

from .description import RobotDescription, default_description, load_description
from .errors import ArmError, TransportError
from .kinematics import ToolPose
from .motion import DEFAULT_CARTESIAN_STEP_M, line_poses
from .scripting import ScriptError, load_script, plan_script
from .sessions import LocalSession, RemoteSession, config_from_state
from .simulator import VirtualBus
from .transport import SerialTransport, SimTransport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_MOTION = 4

DEFAULT_BIND = "127.0.0.1:8700"
DEFAULT_WS_URL = "ws://127.0.0.1:8700/ws"


def _fail(code: int, message: str) -> None:
    click.echo(f"armstack: {message}", err=True)
    sys.exit(code)


def _load_desc(path: str | None) -> RobotDescription:
    try:
        if path is None:
            return default_description()
        return load_description(path)
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"description file not found: {path}")
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"bad description: {exc}")


def _parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        _fail(EXIT_CONFIG, f"bad bind address {bind!r}, expected HOST:PORT")
    return host, int(port)


@click.group()
@click.version_option(package_name="armstack")
def main():
    """Control stack for the five-servo desktop arm."""


@main.command()
@click.option("--sim", is_flag=True, help="Serve the embedded virtual servo bus.")
@click.option("--serial", "serial_path", metavar="PATH", help="Serve real servos on this port.")
@click.option("--baud", type=int, default=None, help="Serial baud rate (default: description).")
@click.option("--bind", default=None, metavar="HOST:PORT", help="Listen address (env ARMSTACK_BIND).")
@click.option("--description", "description_path", metavar="FILE", default=None)
@click.option("--ui", "ui_dir", metavar="DIR", default=None, help="Static panel directory for /ui.")
@click.option("--rate", type=float, default=None, help="Control-loop rate override, Hz.")
def serve(sim, serial_path, baud, bind, description_path, ui_dir, rate):
    """Run the teleop service against the simulator or real hardware."""
    if sim == bool(serial_path):
        raise click.UsageError("exactly one of --sim or --serial is required")
    desc = _load_desc(description_path)
    host, port = _parse_bind(bind or os.environ.get("ARMSTACK_BIND") or DEFAULT_BIND)
    if ui_dir is None:
        bundled = Path("frontend/dist")
        ui_dir = bundled if bundled.is_dir() else None
    try:
        if sim:
            transport = SimTransport(VirtualBus.from_description(desc))
        else:
            transport = SerialTransport(serial_path, baud or desc.bus.baud)
    except TransportError as exc:
        _fail(EXIT_TRANSPORT, str(exc))
    from .service import run_service  # aiohttp import deferred

    try:
        run_service(desc, transport, host=host, port=port, ui_dir=ui_dir, rate_hz=rate)
    except TransportError as exc:
        _fail(EXIT_TRANSPORT, str(exc))
    except OSError as exc:
        _fail(EXIT_TRANSPORT, f"cannot bind {host}:{port}: {exc}")


@main.command()
@click.option("--connect", "url", default=DEFAULT_WS_URL, metavar="URL", show_default=True)
@click.option("--step", default=20, show_default=True, help="Jog increment in ticks.")
@click.option("--description", "description_path", metavar="FILE", default=None,
              help="Local description for gripper widths (default: fetch from the service).")
@click.option("--porcelain", is_flag=True, help="Machine-readable JSON lines on stdout.")
def jog(url, step, description_path, porcelain):
    """Interactive terminal teleop against a running service.

    Keys: 1-5 select a motor, + / - nudge it by the step, g / G close and
    open the gripper, s stops, q quits.
    """
    local_desc = _load_desc(description_path) if description_path else None
    try:
        session = RemoteSession(url)
    except TransportError as exc:
        _fail(EXIT_TRANSPORT, str(exc))
    try:
        _jog_repl(session, step, porcelain, local_desc)
    finally:
        session.close()
    sys.exit(EXIT_OK)


def _jog_repl(session: RemoteSession, step: int, porcelain: bool, local_desc=None) -> None:
    if local_desc is not None:
        width_closed = local_desc.gripper.width_closed_m
        width_open = local_desc.gripper.width_open_m
    else:
        desc = session.fetch_description()
        width_closed = desc["gripper"]["width_closed_m"]
        width_open = desc["gripper"]["width_open_m"]
    selected = 1
    sent = 0

    line_lock = threading.Lock()

    def emit(obj: dict) -> None:
        if porcelain:
            with line_lock:
                click.echo(json.dumps(obj))

    def show_state_line(state: dict) -> None:
        if porcelain:
            return
        pose = state["pose"]
        with line_lock:
            click.echo(
                f"\rmotor {selected}  x={pose['x']:+.3f} y={pose['y']:+.3f} "
                f"z={pose['z']:+.3f} pitch={pose['pitch']:+.3f} [{state['mode']}]   ",
                nl=False,
            )

    def send(msg: dict) -> None:
        nonlocal sent
        ack = session.submit(msg)
        sent += 1
        emit({"type": "ack", **ack})
        if not porcelain and not ack.get("ok"):
            with line_lock:
                click.echo(f"\n{msg['type']} rejected: {ack.get('code')}")

    # One pose line per state update, rewritten in place.
    session.set_state_listener(show_state_line)
    if not porcelain:
        click.echo("keys: 1-5 motor, +/- jog, g/G gripper, s stop, q quit")
    for key in _keystrokes():
        if key == "q":
            break
        if key in "12345":
            selected = int(key)
            emit({"type": "select", "joint": selected})
        elif key in "+=":
            send({"type": "jog", "joint": selected, "delta_ticks": step})
        elif key in "-_":
            send({"type": "jog", "joint": selected, "delta_ticks": -step})
        elif key == "g":
            send({"type": "gripper", "width_m": width_closed})
        elif key == "G":
            send({"type": "gripper", "width_m": width_open})
        elif key == "s":
            send({"type": "stop"})
    if sent:
        deadline = time.monotonic() + 5.0
        state = session.state()
        while time.monotonic() < deadline:
            state = session.wait_state(0.5)
            if state and state["mode"] == "idle":
                break
        emit({"type": "final", "state": state})
    if not porcelain:
        click.echo()


def _keystrokes():
    """Yield single characters; raw terminal when interactive, plain otherwise."""
    stdin = sys.stdin
    if stdin.isatty():
        import termios
        import tty

        fd = stdin.fileno()
        saved = termios.tcgetattr(fd)
        tty.setcbreak(fd)
        try:
            while True:
                ch = stdin.read(1)
                if not ch:
                    return
                yield ch
        finally:
            termios.tcsetattr(fd, termios.TCSADRAIN, saved)
    else:
        while True:
            ch = stdin.read(1)
            if not ch:
                return
            if not ch.isspace():
                yield ch


@main.group()
def script():
    """Run or check motion script files."""


@script.command("run")
@click.argument("script_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--sim", is_flag=True, help="Execute on an embedded simulator.")
@click.option("--connect", "url", default=None, metavar="URL", help="Execute on a running service.")
@click.option("--description", "description_path", metavar="FILE", default=None)
@click.option("--dry-run", is_flag=True, help="Plan and print durations, send nothing.")
@click.option("--porcelain", is_flag=True, help="Machine-readable JSON lines on stdout.")
def script_run(script_file, sim, url, description_path, dry_run, porcelain):
    """Execute SCRIPT_FILE command by command, waiting for each motion."""
    desc = _load_desc(description_path)
    try:
        commands = load_script(script_file)
    except ScriptError as exc:
        _fail(EXIT_CONFIG, f"{script_file}: {exc}")

    if dry_run:
        _dry_run(commands, desc, porcelain)
        sys.exit(EXIT_OK)

    if sim == bool(url):
        raise click.UsageError("exactly one of --sim or --connect is required")
    try:
        session = LocalSession(desc) if sim else RemoteSession(url)
    except TransportError as exc:
        _fail(EXIT_TRANSPORT, str(exc))
    try:
        _execute(session, commands, desc, porcelain)
    except ArmError as exc:
        _fail(EXIT_MOTION, str(exc))
    finally:
        session.close()
    sys.exit(EXIT_OK)


def _dry_run(commands, desc, porcelain) -> None:
    from .description import JointVector

    try:
        steps = plan_script(commands, desc, JointVector())
    except ArmError as exc:
        _fail(EXIT_MOTION, str(exc))
    total = 0.0
    for step in steps:
        total += step.duration
        if porcelain:
            click.echo(
                json.dumps(
                    {
                        "type": "plan",
                        "line": step.command.line_no,
                        "kind": step.command.kind,
                        "duration_s": round(step.duration, 4),
                    }
                )
            )
        else:
            click.echo(f"line {step.command.line_no:3d}  {step.command.kind:<12} {step.duration:7.3f} s")
    if porcelain:
        click.echo(json.dumps({"type": "plan_total", "duration_s": round(total, 4)}))
    else:
        click.echo(f"total {total:.3f} s over {len(steps)} commands")


def _execute(session, commands, desc, porcelain) -> None:
    def emit(obj: dict) -> None:
        if porcelain:
            click.echo(json.dumps(obj))

    def flush_states() -> None:
        for state in session.drain_states():
            emit({"type": "state", **{k: state[k] for k in ("seq", "mode", "joints", "pose")}})

    # Validate the whole script against the live starting configuration
    # before anything moves.
    start = config_from_state(session.state())
    plan_script(commands, desc, start)

    for cmd in commands:
        if cmd.kind == "wait":
            time.sleep(cmd.args[0])
            emit({"type": "cmd_done", "line": cmd.line_no, "kind": cmd.kind})
            continue
        if cmd.kind == "move_joints":
            msg = {"type": "goto_joints", "q": list(cmd.args[:4])}
            if len(cmd.args) == 5:
                msg["w"] = cmd.args[4]
            state = _submit_and_wait(session, msg, cmd)
        elif cmd.kind == "gripper":
            state = _submit_and_wait(session, {"type": "gripper", "width_m": cmd.args[0]}, cmd)
        else:  # move_line
            state = _run_line(session, cmd, emit)
        flush_states()
        pose = state["pose"]
        emit(
            {
                "type": "cmd_done",
                "line": cmd.line_no,
                "kind": cmd.kind,
                "pose": pose,
            }
        )
        if not porcelain:
            click.echo(
                f"line {cmd.line_no:3d}  {cmd.kind:<12} done at "
                f"x={pose['x']:+.3f} y={pose['y']:+.3f} z={pose['z']:+.3f}"
            )
    flush_states()


def _submit_and_wait(session, msg: dict, cmd) -> dict:
    ack = session.submit(msg)
    if not ack.get("ok"):
        raise ArmError(f"line {cmd.line_no}: service rejected {msg['type']}: {ack.get('code')} {ack.get('detail', '')}")
    return session.wait_done(ack["seq"])


def _run_line(session, cmd, emit) -> dict:
    state = session.state()
    p = state["pose"]
    p_from = ToolPose(p["x"], p["y"], p["z"], p["pitch"])
    p_to = ToolPose(*cmd.args[:4])
    step = cmd.args[4] if len(cmd.args) == 5 else DEFAULT_CARTESIAN_STEP_M
    for i, pose in enumerate(line_poses(p_from, p_to, step)):
        if i == 0:
            continue  # already there
        msg = {"type": "goto_pose", "x": pose.x, "y": pose.y, "z": pose.z, "pitch": pose.pitch}
        state = _submit_and_wait(session, msg, cmd)
        achieved = state["pose"]
        err = math.dist((pose.x, pose.y, pose.z), (achieved["x"], achieved["y"], achieved["z"]))
        emit(
            {
                "type": "waypoint",
                "line": cmd.line_no,
                "index": i,
                "target": {"x": pose.x, "y": pose.y, "z": pose.z, "pitch": pose.pitch},
                "pose": achieved,
                "err_m": err,
            }
        )
    return state


@script.command("check")
@click.argument("script_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--description", "description_path", metavar="FILE", default=None)
def script_check(script_file, description_path):
    """Parse and plan SCRIPT_FILE without executing; alias for run --dry-run."""
    desc = _load_desc(description_path)
    try:
        commands = load_script(script_file)
    except ScriptError as exc:
        _fail(EXIT_CONFIG, f"{script_file}: {exc}")
    _dry_run(commands, desc, porcelain=False)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
