"""Teleop service: a fixed-rate control loop plus a WebSocket/HTTP API.

Exactly one control-loop thread owns the bus. Network handlers talk to it
through a command mailbox (multi-producer queue) and a state broadcast
(latest-wins per subscriber); there is no other shared robot state.

Wire contract (see data/wire_schema_v1.json): commands arrive as JSON text
on /ws and are answered with {"ok": true, "seq": n} or
{"ok": false, "code": ...}; state objects stream at the loop rate. GET
/state returns the newest state, GET /description the loaded robot.
"""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import json
import queue
import threading
import time
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
from aiohttp import WSMsgType, web

from .buslink import BusLink
from .description import JointVector, RobotDescription, angle_to_ticks, ticks_to_angle
from .errors import ArmError, LimitViolation, TransportError, Unreachable
from .kinematics import (
    Branch,
    ToolPose,
    forward,
    gripper_angle_for_width,
    gripper_width_for_angle,
    inverse_analytic,
)
from .motion import Trajectory, check_limits, plan_joint_move
from .simulator import ADDR_OPERATING_MODE
from .transport import Transport

WIRE_VERSION = 1

CTRL_KEY = web.AppKey("ctrl", "ControlLoop")

_SETTLED_TICKS = 1  # |goal - present| at or below this counts as arrived


class Mode(str, Enum):
    IDLE = "idle"
    JOG = "jog"
    TRAJECTORY = "trajectory"
    FAULT = "fault"


def load_wire_schema() -> dict:
    text = resources.files("armstack.data").joinpath("wire_schema_v1.json").read_text("utf-8")
    return json.loads(text)


_SCHEMA = load_wire_schema()
_COMMAND_VALIDATORS = {
    name: jsonschema.Draft202012Validator(
        {"$defs": _SCHEMA["$defs"], "$ref": f"#/$defs/{name}"}
    )
    for name in ("jog", "goto_joints", "goto_pose", "gripper", "home", "stop", "set_speed_scale")
}


def _reject_constant(_value):
    raise ValueError("non-finite numbers are not valid JSON")


# Internal mailbox entries (already validated).
@dataclasses.dataclass(frozen=True)
class _Cmd:
    seq: int
    kind: str
    jog_joint: int = 0
    jog_delta: int = 0
    target: JointVector | None = None
    scale: float = 1.0
    clears_fault: bool = False  # only home and stop may lift the latch


class ControlLoop(threading.Thread):
    """Owns the bus: drains commands, runs trajectories, publishes state."""

    def __init__(
        self,
        transport: Transport,
        description: RobotDescription,
        rate_hz: float | None = None,
        read_timeout_s: float = 0.02,
    ):
        super().__init__(name="armstack-control", daemon=True)
        self.description = description
        self.rate_hz = rate_hz or description.bus.loop_hz
        self.dt = 1.0 / self.rate_hz
        self.transport = transport
        self.link = BusLink(transport, timeout_s=read_timeout_s)
        self._mailbox: queue.Queue[_Cmd] = queue.Queue()
        self._stop_evt = threading.Event()
        self._state_lock = threading.Condition()
        self._latest: dict[str, Any] | None = None
        self._listeners: list[Callable[[dict], None]] = []
        self._cmd_seq = 0
        self._cmd_lock = threading.Lock()
        # Loop-private state below; only the loop thread touches it after start.
        self._seq = 0
        self._t0 = time.monotonic()
        self._mode = Mode.IDLE
        self._fault: str | None = None
        self._speed_scale = 1.0
        self._traj: Trajectory | None = None
        self._traj_t = 0.0
        self._settling = False
        self._goal_ticks: dict[int, int] = {}
        self._goals_dirty = False
        self._presents: dict[int, int] = {}
        self._moving: dict[int, bool] = {}
        self._last_cmd_seq = 0
        self.jogs_dropped = 0

    # -- startup ------------------------------------------------------------

    def initialize(self) -> None:
        """Ping the chain and configure every servo; raises TransportError."""
        d = self.description
        for jc in d.joints:
            if self.link.ping(jc.motor_id, timeout_s=0.2) is None:
                raise TransportError(f"no response from servo id {jc.motor_id}")
        for jc in d.joints:
            self.link.write(jc.motor_id, ADDR_OPERATING_MODE, b"\x03")
            self.link.configure_profile_velocity(jc.motor_id, jc.vmax_rad_s, jc.ticks_per_rev)
        self.link.set_torque([jc.motor_id for jc in d.joints], True)
        if not self._read_servos():
            raise TransportError("initial position read failed")
        self._goal_ticks = dict(self._presents)
        self._publish()

    # -- public surface (any thread) -----------------------------------------

    def submit(self, text: str) -> dict:
        """Validate one command message; enqueue it and return the ack."""
        try:
            msg = json.loads(text, parse_constant=_reject_constant)
        except ValueError:
            return {"ok": False, "code": "bad_json"}
        if not isinstance(msg, dict) or msg.get("type") not in _COMMAND_VALIDATORS:
            return {"ok": False, "code": "unknown_type"}
        kind = msg["type"]
        errors = list(_COMMAND_VALIDATORS[kind].iter_errors(msg))
        if errors:
            return {"ok": False, "code": "bad_schema", "detail": errors[0].message}
        try:
            cmd = self._build_command(kind, msg)
        except _Reject as exc:
            return {"ok": False, "code": exc.code, "detail": exc.detail}
        self._mailbox.put(cmd)
        return {"ok": True, "seq": cmd.seq}

    def latest_state(self) -> dict | None:
        with self._state_lock:
            return self._latest

    def wait_for_state(self, predicate, timeout_s: float) -> dict | None:
        """Block until a published state satisfies predicate; None on timeout."""
        deadline = time.monotonic() + timeout_s
        with self._state_lock:
            while True:
                if self._latest is not None and predicate(self._latest):
                    return self._latest
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._state_lock.wait(remaining)

    def add_listener(self, callback: Callable[[dict], None]) -> None:
        with self._state_lock:
            self._listeners.append(callback)

    def remove_listener(self, callback: Callable[[dict], None]) -> None:
        with self._state_lock:
            if callback in self._listeners:
                self._listeners.remove(callback)

    def shutdown(self, join: bool = True) -> None:
        self._stop_evt.set()
        if join and self.is_alive():
            self.join(timeout=2.0)

    # -- command validation (caller thread) ----------------------------------

    def _next_seq(self) -> int:
        with self._cmd_lock:
            self._cmd_seq += 1
            return self._cmd_seq

    def _snapshot(self) -> tuple[Mode, dict[int, int], float]:
        with self._state_lock:
            mode = Mode(self._latest["mode"]) if self._latest else self._mode
            return mode, dict(self._goal_ticks), self._current_width()

    def _current_width(self) -> float:
        jc = self.description.gripper_joint
        ticks = self._presents.get(jc.motor_id, jc.center_ticks)
        return gripper_width_for_angle(ticks_to_angle(ticks, jc), self.description.gripper).value

    def _current_config(self) -> JointVector:
        d = self.description
        angles = [
            ticks_to_angle(self._presents.get(jc.motor_id, jc.center_ticks), jc)
            for jc in d.arm_joints
        ]
        return JointVector(*angles, w=self._current_width())

    def _build_command(self, kind: str, msg: dict) -> _Cmd:
        mode, goals, width = self._snapshot()
        faulted = mode is Mode.FAULT
        if kind == "stop":
            return _Cmd(self._next_seq(), "stop", clears_fault=True)
        if kind == "home":
            home = JointVector(0.0, 0.0, 0.0, 0.0, w=self._home_width())
            return _Cmd(self._next_seq(), "goto", target=home, clears_fault=True)
        if faulted:
            raise _Reject("fault_latched", self._fault or "bus fault")
        if kind == "set_speed_scale":
            return _Cmd(self._next_seq(), "scale", scale=float(msg["scale"]))
        if kind == "jog":
            if mode is Mode.TRAJECTORY:
                raise _Reject("busy", "jog refused while a trajectory is active")
            jc = self.description.joints[msg["joint"] - 1]
            target_ticks = goals.get(jc.motor_id, jc.center_ticks) + msg["delta_ticks"]
            angle = ticks_to_angle(target_ticks, jc)
            if not jc.limit_min_rad <= angle <= jc.limit_max_rad:
                raise _Reject(
                    "limit_violation",
                    f"jog target {angle:.4f} rad exceeds joint {msg['joint']} limits",
                )
            return _Cmd(self._next_seq(), "jog", jog_joint=msg["joint"], jog_delta=msg["delta_ticks"])
        if kind == "goto_joints":
            q = JointVector(*msg["q"], w=msg.get("w", width))
            report = check_limits(q, self.description)
            if not report.ok:
                raise _Reject("limit_violation", str(LimitViolation(report.entries)))
            return _Cmd(self._next_seq(), "goto", target=q)
        if kind == "goto_pose":
            pose = ToolPose(msg["x"], msg["y"], msg["z"], msg["pitch"])
            branch = Branch(msg["branch"]) if "branch" in msg else Branch.ELBOW_UP
            try:
                sol = inverse_analytic(pose, self.description, branch=branch)
            except Unreachable as exc:
                raise _Reject("unreachable", str(exc)) from exc
            except LimitViolation as exc:
                raise _Reject("limit_violation", str(exc)) from exc
            target = JointVector(*sol.q.angles, w=width)
            return _Cmd(self._next_seq(), "goto", target=target)
        # gripper
        g = self.description.gripper
        w = float(msg["width_m"])
        if not g.width_closed_m <= w <= g.width_open_m:
            raise _Reject("limit_violation", f"width {w} outside [{g.width_closed_m}, {g.width_open_m}]")
        q = dataclasses.replace(self._current_config(), w=w)
        return _Cmd(self._next_seq(), "goto", target=q)

    def _home_width(self) -> float:
        jc = self.description.gripper_joint
        return gripper_width_for_angle(ticks_to_angle(jc.center_ticks, jc), self.description.gripper).value

    # -- the loop itself ------------------------------------------------------

    def run(self) -> None:
        next_t = time.monotonic()
        while not self._stop_evt.is_set():
            self.tick_once(self.dt)
            next_t += self.dt
            delay = next_t - time.monotonic()
            if delay > 0:
                self._stop_evt.wait(delay)
            else:
                next_t = time.monotonic()  # fell behind; don't try to catch up

    def tick_once(self, dt: float) -> None:
        """One control period: commands, trajectory, bus I/O, state publish."""
        self._drain_mailbox()
        if self._traj is not None:
            self._advance_trajectory(dt)
        if self._goals_dirty and self._fault is None:
            self.link.write_goals(self._goal_ticks)
            self._goals_dirty = False
        tick = getattr(self.transport, "tick", None)
        if tick is not None:
            tick(dt)
        if not self._read_servos():
            self._enter_fault("bus timeout")
        self._update_mode()
        self._publish()

    def _drain_mailbox(self) -> None:
        jog_deltas: dict[int, int] = {}
        while True:
            try:
                cmd = self._mailbox.get_nowait()
            except queue.Empty:
                break
            self._last_cmd_seq = max(self._last_cmd_seq, cmd.seq)
            if self._fault is not None and not cmd.clears_fault:
                # Validated before the fault landed; the latch still wins.
                continue
            if cmd.kind == "stop":
                self._traj = None
                self._settling = False
                jog_deltas.clear()
                self._clear_fault()
                self._goal_ticks = dict(self._presents)
                self._goals_dirty = True
                self._mode = Mode.IDLE
            elif cmd.kind == "scale":
                self._speed_scale = cmd.scale
            elif cmd.kind == "jog":
                jog_deltas[cmd.jog_joint] = jog_deltas.get(cmd.jog_joint, 0) + cmd.jog_delta
            elif cmd.kind == "goto":
                if self._fault is not None:
                    self._clear_fault()
                    self._goal_ticks = dict(self._presents)
                try:
                    self._start_trajectory(cmd.target)
                except ArmError:
                    # Validated at submit time; a race (e.g. drift past a
                    # limit) must never kill the loop thread.
                    self._traj = None
        for joint, delta in jog_deltas.items():
            self._apply_jog(joint, delta)

    def _apply_jog(self, joint: int, delta: int) -> None:
        if self._fault is not None or self._traj is not None:
            self.jogs_dropped += 1
            return
        jc = self.description.joints[joint - 1]
        target = self._goal_ticks.get(jc.motor_id, jc.center_ticks) + delta
        angle = ticks_to_angle(target, jc)
        if not jc.limit_min_rad <= angle <= jc.limit_max_rad:
            self.jogs_dropped += 1
            return
        self._goal_ticks[jc.motor_id] = target
        self._goals_dirty = True
        self._mode = Mode.JOG

    def _start_trajectory(self, target: JointVector) -> None:
        start = self._current_config()
        # Present positions can sit a hair outside limits from rounding;
        # clamp the start so planning never rejects the robot's own pose.
        clamped = [
            min(max(a, jc.limit_min_rad), jc.limit_max_rad)
            for a, jc in zip(start.angles, self.description.arm_joints)
        ]
        g = self.description.gripper
        w = min(max(start.w, g.width_closed_m), g.width_open_m)
        start = JointVector(*clamped, w=w)
        self._traj = plan_joint_move(start, target, self.description)
        self._traj_t = 0.0
        self._settling = True
        self._mode = Mode.TRAJECTORY

    def _advance_trajectory(self, dt: float) -> None:
        self._traj_t += dt * self._speed_scale
        q, _ = self._traj.sample(self._traj_t)
        self._write_config_goals(q)
        if self._traj_t >= self._traj.duration:
            self._traj = None  # settling continues until the servos arrive

    def _write_config_goals(self, q: JointVector) -> None:
        d = self.description
        for jc, angle in zip(d.arm_joints, q.angles):
            self._goal_ticks[jc.motor_id] = angle_to_ticks(angle, jc)
        gjc = d.gripper_joint
        gangle = gripper_angle_for_width(q.w, d.gripper).value
        self._goal_ticks[gjc.motor_id] = angle_to_ticks(gangle, gjc)
        self._goals_dirty = True

    def _read_servos(self) -> bool:
        for jc in self.description.joints:
            result = self.link.read_present(jc.motor_id)
            if result is None:
                return False
            self._presents[jc.motor_id], self._moving[jc.motor_id] = result
        return True

    def _enter_fault(self, reason: str) -> None:
        if self._fault is None:
            self._fault = reason
            self._traj = None
            self._settling = False
            # Best effort: dead buses ignore this, half-dead ones stop moving.
            self.link.set_torque([jc.motor_id for jc in self.description.joints], False)
        self._mode = Mode.FAULT

    def _clear_fault(self) -> None:
        if self._fault is not None:
            self._fault = None
            self.link.set_torque([jc.motor_id for jc in self.description.joints], True)

    def _settled(self) -> bool:
        return all(
            abs(self._goal_ticks.get(sid, self._presents.get(sid, 0)) - self._presents.get(sid, 0))
            <= _SETTLED_TICKS
            for sid in self._presents
        )

    def _update_mode(self) -> None:
        if self._fault is not None:
            self._mode = Mode.FAULT
            return
        if self._traj is not None:
            self._mode = Mode.TRAJECTORY
            return
        if not self._settled():
            self._mode = Mode.TRAJECTORY if self._settling else Mode.JOG
            return
        self._settling = False
        self._mode = Mode.IDLE

    # -- state publication -----------------------------------------------------

    def _publish(self) -> None:
        d = self.description
        joints = []
        for jc in d.joints:
            ticks = self._presents.get(jc.motor_id, jc.center_ticks)
            angle = ticks_to_angle(ticks, jc)
            if jc is d.gripper_joint:
                pos = gripper_width_for_angle(angle, d.gripper).value
            else:
                pos = angle
            joints.append(
                {
                    "id": jc.motor_id,
                    "ticks": ticks,
                    "pos": pos,
                    "moving": bool(self._moving.get(jc.motor_id, False)),
                }
            )
        q = self._current_config()
        pose = forward(q, d)
        self._seq += 1
        state = {
            "v": WIRE_VERSION,
            "type": "state",
            "seq": self._seq,
            "t_ms": (time.monotonic() - self._t0) * 1000.0,
            "mode": self._mode.value,
            "joints": joints,
            "pose": {"x": pose.x, "y": pose.y, "z": pose.z, "pitch": pose.pitch},
            "speed_scale": self._speed_scale,
            "last_cmd_seq": self._last_cmd_seq,
            "fault": self._fault,
        }
        with self._state_lock:
            self._latest = state
            listeners = list(self._listeners)
            self._state_lock.notify_all()
        for callback in listeners:
            try:
                callback(state)
            except Exception:
                pass  # a broken subscriber must never stall the loop


class _Reject(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code)
        self.code = code
        self.detail = detail


def description_to_dict(d: RobotDescription) -> dict:
    return {
        "v": WIRE_VERSION,
        "name": d.name,
        "geometry": {
            "h0": d.h0,
            "a2": d.a2,
            "a3": d.a3,
            "a4": d.a4,
            "horizontal_reach": d.horizontal_reach,
            "vertical_reach": d.vertical_reach,
        },
        "bus": {"baud": d.bus.baud, "loop_hz": d.bus.loop_hz},
        "gripper": dataclasses.asdict(d.gripper),
        "joints": [dataclasses.asdict(jc) for jc in d.joints],
    }


def _put_latest(q: asyncio.Queue, item: dict) -> None:
    if q.full():
        try:
            q.get_nowait()
        except asyncio.QueueEmpty:
            pass
    q.put_nowait(item)


async def _send_states(ws: web.WebSocketResponse, state_q: asyncio.Queue) -> None:
    while True:
        state = await state_q.get()
        await ws.send_json(state)


async def _ws_handler(request: web.Request) -> web.WebSocketResponse:
    ctrl: ControlLoop = request.app[CTRL_KEY]
    ws = web.WebSocketResponse()
    await ws.prepare(request)
    loop = asyncio.get_running_loop()
    state_q: asyncio.Queue = asyncio.Queue(maxsize=1)

    def on_state(state: dict) -> None:
        loop.call_soon_threadsafe(_put_latest, state_q, state)

    ctrl.add_listener(on_state)
    sender = asyncio.create_task(_send_states(ws, state_q))
    try:
        async for msg in ws:
            if msg.type == WSMsgType.TEXT:
                await ws.send_json(ctrl.submit(msg.data))
            elif msg.type == WSMsgType.ERROR:
                break
    finally:
        ctrl.remove_listener(on_state)
        sender.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await sender
    return ws


async def _state_handler(request: web.Request) -> web.Response:
    state = request.app[CTRL_KEY].latest_state()
    if state is None:
        raise web.HTTPServiceUnavailable(text="no state published yet")
    return web.json_response(state)


async def _description_handler(request: web.Request) -> web.Response:
    return web.json_response(description_to_dict(request.app[CTRL_KEY].description))


async def _ui_index(request: web.Request) -> web.Response:
    raise web.HTTPFound("/ui/index.html")


def build_app(ctrl: ControlLoop, ui_dir: str | Path | None = None) -> web.Application:
    app = web.Application()
    app[CTRL_KEY] = ctrl
    app.router.add_get("/state", _state_handler)
    app.router.add_get("/description", _description_handler)
    app.router.add_get("/ws", _ws_handler)
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.router.add_get("/ui", _ui_index)
        app.router.add_get("/ui/", _ui_index)
        app.router.add_static("/ui", Path(ui_dir))
    return app


class TeleopService:
    """Control loop plus HTTP/WS front door, bound to one TCP address."""

    def __init__(
        self,
        description: RobotDescription,
        transport: Transport,
        host: str = "127.0.0.1",
        port: int = 8700,
        ui_dir: str | Path | None = None,
        rate_hz: float | None = None,
    ):
        self.description = description
        self.transport = transport
        self.host = host
        self.port = port
        self.ui_dir = ui_dir
        self.ctrl = ControlLoop(transport, description, rate_hz=rate_hz)
        self._runner: web.AppRunner | None = None

    async def start(self) -> None:
        self.ctrl.initialize()
        self.ctrl.start()
        app = build_app(self.ctrl, self.ui_dir)
        self._runner = web.AppRunner(app)
        await self._runner.setup()
        site = web.TCPSite(self._runner, self.host, self.port)
        await site.start()
        addresses = self._runner.addresses  # resolves the port when bound to 0
        if addresses:
            self.port = addresses[0][1]

    async def stop(self) -> None:
        if self._runner is not None:
            await self._runner.cleanup()
        self.ctrl.shutdown()
        self.transport.close()


def run_service(
    description: RobotDescription,
    transport: Transport,
    host: str,
    port: int,
    ui_dir: str | Path | None = None,
    rate_hz: float | None = None,
) -> None:
    """Blocking entry point: serve until interrupted."""

    async def main():
        service = TeleopService(
            description, transport, host=host, port=port, ui_dir=ui_dir, rate_hz=rate_hz
        )
        await service.start()
        # Flushed so wrappers watching a pipe see readiness immediately.
        print(f"armstack service on http://{service.host}:{service.port} (ws: /ws)", flush=True)
        stop = asyncio.Event()
        try:
            await stop.wait()
        finally:
            await service.stop()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
