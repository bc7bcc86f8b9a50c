import asyncio
import json
import math
import threading

import aiohttp
import pytest

from armstack.description import angle_to_ticks, ticks_to_angle
from armstack.kinematics import gripper_angle_for_width
from armstack.service import ControlLoop, TeleopService, load_wire_schema
from armstack.simulator import VirtualBus
from armstack.transport import SimTransport

DT = 0.02


class FlakyTransport:
    """SimTransport wrapper whose reads can be cut and restored."""

    def __init__(self, inner):
        self.inner = inner
        self.dead = False

    def write(self, data):
        if not self.dead:
            self.inner.write(data)

    def read(self, max_bytes, timeout_s):
        if self.dead:
            return b""
        return self.inner.read(max_bytes, timeout_s)

    def tick(self, dt):
        self.inner.tick(dt)

    def close(self):
        self.inner.close()


@pytest.fixture()
def ctrl(desc):
    transport = SimTransport(VirtualBus.from_description(desc))
    loop = ControlLoop(transport, desc, read_timeout_s=0.01)
    loop.initialize()
    yield loop
    transport.close()


def tick_until(ctrl, predicate, limit=2000):
    for _ in range(limit):
        ctrl.tick_once(DT)
        state = ctrl.latest_state()
        if predicate(state):
            return state
    raise AssertionError("condition not reached within the tick budget")


def submit(ctrl, **msg):
    return ctrl.submit(json.dumps(msg))


def test_idle_tick_publishes_without_goal_writes(ctrl):
    bus = ctrl.transport.bus
    assert bus.stats.goal_writes == 0
    first = ctrl.latest_state()
    ctrl.tick_once(DT)
    second = ctrl.latest_state()
    assert second["seq"] == first["seq"] + 1
    assert second["mode"] == "idle"
    assert bus.stats.goal_writes == 0


def test_jog_converges_to_spec_example(ctrl, desc):
    ack = submit(ctrl, type="jog", joint=1, delta_ticks=114)
    assert ack == {"ok": True, "seq": 1}
    state = tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= 1)
    assert state["joints"][0]["ticks"] == 2162
    yaw_deg = math.degrees(state["joints"][0]["pos"])
    assert yaw_deg == pytest.approx(10.0, abs=0.1)
    # Published ticks are read back from the servo registers, not echoed.
    assert ctrl.transport.bus.servos[1].present_position == 2162


def test_jog_coalesces_within_one_tick(ctrl):
    submit(ctrl, type="jog", joint=2, delta_ticks=30)
    submit(ctrl, type="jog", joint=2, delta_ticks=-10)
    state = tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= 2)
    assert state["joints"][1]["ticks"] == 2048 + 20


def test_jog_beyond_limit_rejected_whole(ctrl, desc):
    ack = submit(ctrl, type="jog", joint=4, delta_ticks=4000)
    assert ack["ok"] is False and ack["code"] == "limit_violation"
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["joints"][3]["ticks"] == 2048


def test_command_error_codes(ctrl):
    assert ctrl.submit("{nope")["code"] == "bad_json"
    assert ctrl.submit('{"type": "dance"}')["code"] == "unknown_type"
    assert submit(ctrl, type="jog", joint=9, delta_ticks=1)["code"] == "bad_schema"
    assert submit(ctrl, type="goto_pose", x=0.31, y=0.0, z=0.10, pitch=1.5708)["code"] == "unreachable"
    assert submit(ctrl, type="goto_joints", q=[0, 9, 0, 0])["code"] == "limit_violation"
    assert submit(ctrl, type="gripper", width_m=0.5)["code"] == "limit_violation"
    assert submit(ctrl, type="set_speed_scale", scale=0.0)["code"] == "bad_schema"
    assert submit(ctrl, type="set_speed_scale", scale=1.5)["code"] == "bad_schema"
    assert ctrl.submit(json.dumps({"type": "jog", "joint": 1}))["code"] == "bad_schema"


def test_rejected_commands_change_nothing(ctrl):
    before = ctrl.latest_state()
    submit(ctrl, type="goto_pose", x=0.31, y=0.0, z=0.10, pitch=1.5708)
    state = tick_until(ctrl, lambda s: s["seq"] >= before["seq"] + 3)
    assert state["pose"] == before["pose"]
    assert state["mode"] == "idle"


def test_goto_pose_reaches_target(ctrl, desc):
    ack = submit(ctrl, type="goto_pose", x=0.24, y=0.0, z=0.20, pitch=1.5708)
    assert ack["ok"]
    state = tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= ack["seq"])
    pose = state["pose"]
    err = math.dist((pose["x"], pose["y"], pose["z"]), (0.24, 0.0, 0.20))
    assert err < 0.002


def test_gripper_command_tracks_width_map(ctrl, desc):
    ack = submit(ctrl, type="gripper", width_m=0.02)
    assert ack["ok"]
    expected_angle = gripper_angle_for_width(0.02, desc.gripper).value
    expected_ticks = angle_to_ticks(expected_angle, desc.gripper_joint)
    state = tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= ack["seq"])
    assert abs(state["joints"][4]["ticks"] - expected_ticks) <= 1
    assert state["joints"][4]["pos"] == pytest.approx(0.02, abs=0.001)


def test_stop_freezes_goals_within_one_tick(ctrl):
    ack = submit(ctrl, type="goto_joints", q=[1.5, 0.0, 0.0, 0.0])
    for _ in range(15):
        ctrl.tick_once(DT)
    mid = ctrl.latest_state()
    assert mid["mode"] == "trajectory"
    submit(ctrl, type="stop")
    ctrl.tick_once(DT)
    state = ctrl.latest_state()
    assert state["mode"] == "idle"
    frozen = state["joints"][0]["ticks"]
    for _ in range(20):
        ctrl.tick_once(DT)
    assert abs(ctrl.latest_state()["joints"][0]["ticks"] - frozen) <= 1


def test_jog_during_trajectory_is_busy(ctrl):
    submit(ctrl, type="goto_joints", q=[1.2, 0.0, 0.0, 0.0])
    for _ in range(5):
        ctrl.tick_once(DT)
    ack = submit(ctrl, type="jog", joint=1, delta_ticks=10)
    assert ack["code"] == "busy"


def test_home_returns_to_vertical(ctrl):
    submit(ctrl, type="jog", joint=2, delta_ticks=200)
    tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= 1)
    ack = submit(ctrl, type="home")
    state = tick_until(ctrl, lambda s: s["mode"] == "idle" and s["last_cmd_seq"] >= ack["seq"])
    pose = state["pose"]
    assert math.dist((pose["x"], pose["y"], pose["z"]), (0.0, 0.0, 0.40)) < 0.002
    assert pose["pitch"] == pytest.approx(0.0, abs=0.01)


def test_speed_scale_slows_execution(ctrl):
    ack = submit(ctrl, type="goto_joints", q=[0.8, 0.0, 0.0, 0.0])
    full, _ = _ticks_to_idle(ctrl, ack["seq"])
    submit(ctrl, type="home")
    tick_until(ctrl, lambda s: s["mode"] == "idle" and s["joints"][0]["ticks"] == 2048)
    submit(ctrl, type="set_speed_scale", scale=0.5)
    ack = submit(ctrl, type="goto_joints", q=[0.8, 0.0, 0.0, 0.0])
    half, _ = _ticks_to_idle(ctrl, ack["seq"])
    assert half == pytest.approx(2 * full, rel=0.2)


def _ticks_to_idle(ctrl, seq, limit=3000):
    count = 0
    for _ in range(limit):
        ctrl.tick_once(DT)
        count += 1
        state = ctrl.latest_state()
        if state["mode"] == "idle" and state["last_cmd_seq"] >= seq:
            return count, state
    raise AssertionError("never became idle")


def test_seq_strictly_increases_and_pose_matches_fk(ctrl, desc):
    from armstack.kinematics import forward
    from armstack.sessions import config_from_state

    submit(ctrl, type="goto_joints", q=[0.5, 0.4, -0.8, 0.3])
    last = 0
    for _ in range(120):
        ctrl.tick_once(DT)
        state = ctrl.latest_state()
        assert state["seq"] > last
        last = state["seq"]
        pose = forward(config_from_state(state), desc)
        assert pose.x == pytest.approx(state["pose"]["x"], abs=1e-12)
        assert pose.z == pytest.approx(state["pose"]["z"], abs=1e-12)


def test_goal_writes_never_exceed_limits(ctrl, desc):
    # Hammer jogs toward the boundary; every accepted write must stay legal.
    for _ in range(80):
        submit(ctrl, type="jog", joint=4, delta_ticks=57)
        ctrl.tick_once(DT)
        goal = ctrl.transport.bus.servos[4].goal_position
        angle = ticks_to_angle(goal, desc.joints[3])
        assert desc.joints[3].limit_min_rad <= angle <= desc.joints[3].limit_max_rad


def test_bus_fault_latches_until_cleared(desc):
    flaky = FlakyTransport(SimTransport(VirtualBus.from_description(desc)))
    ctrl = ControlLoop(flaky, desc, read_timeout_s=0.01)
    ctrl.initialize()
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["mode"] == "idle"
    flaky.dead = True
    ctrl.tick_once(DT)
    state = ctrl.latest_state()
    assert state["mode"] == "fault"
    assert state["fault"] is not None
    # Still publishing while faulted.
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["seq"] == state["seq"] + 1
    # Motion commands bounce; no goal writes happen.
    ack = submit(ctrl, type="goto_joints", q=[0.5, 0, 0, 0])
    assert ack["code"] == "fault_latched"
    writes_before = flaky.inner.bus.stats.goal_writes
    ctrl.tick_once(DT)
    assert flaky.inner.bus.stats.goal_writes == writes_before
    # Bus comes back, but the latch holds until stop clears it.
    flaky.dead = False
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["mode"] == "fault"
    submit(ctrl, type="stop")
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["mode"] == "idle"
    ack = submit(ctrl, type="goto_joints", q=[0.3, 0, 0, 0])
    assert ack["ok"]
    flaky.close()


def test_wire_schema_validates_states(ctrl):
    import jsonschema

    schema = load_wire_schema()
    validator = jsonschema.Draft202012Validator(
        {"$defs": schema["$defs"], "$ref": "#/$defs/state"}
    )
    submit(ctrl, type="jog", joint=1, delta_ticks=40)
    for _ in range(30):
        ctrl.tick_once(DT)
        errors = list(validator.iter_errors(ctrl.latest_state()))
        assert errors == []


# --- integration over a live TCP port --------------------------------------


class ServiceUnderTest:
    def __init__(self, desc):
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self.loop.run_forever, daemon=True)
        self.thread.start()
        transport = SimTransport(VirtualBus.from_description(desc))
        self.svc = TeleopService(desc, transport, host="127.0.0.1", port=0)
        asyncio.run_coroutine_threadsafe(self.svc.start(), self.loop).result(15)
        self.port = self.svc.port

    def stop(self):
        asyncio.run_coroutine_threadsafe(self.svc.stop(), self.loop).result(10)
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(timeout=5)


@pytest.fixture(scope="module")
def live(desc):
    service = ServiceUnderTest(desc)
    yield service
    service.stop()


def _get(port, path):
    async def go():
        async with aiohttp.ClientSession() as session:
            async with session.get(f"http://127.0.0.1:{port}{path}") as resp:
                return resp.status, await resp.json()

    return asyncio.run(go())


def test_http_state_and_description(live, desc):
    status, state = _get(live.port, "/state")
    assert status == 200
    assert state["type"] == "state"
    status, described = _get(live.port, "/description")
    assert status == 200
    assert described["geometry"]["horizontal_reach"] == desc.horizontal_reach
    assert len(described["joints"]) == 5


def test_ws_home_command_moves_arm(live):
    async def go():
        async with aiohttp.ClientSession() as session:
            async with session.ws_connect(f"ws://127.0.0.1:{live.port}/ws") as ws:
                await ws.send_str(json.dumps({"type": "jog", "joint": 2, "delta_ticks": 150}))
                await ws.send_str(json.dumps({"type": "home"}))
                acks, final = [], None
                while len(acks) < 2:
                    data = json.loads((await ws.receive()).data)
                    if "ok" in data:
                        acks.append(data)
                home_seq = acks[1]["seq"]
                for _ in range(600):
                    data = json.loads((await ws.receive()).data)
                    if data.get("type") == "state" and data["last_cmd_seq"] >= home_seq and data["mode"] == "idle":
                        final = data
                        break
                return acks, final

    acks, final = asyncio.run(go())
    assert all(a["ok"] for a in acks)
    assert final is not None
    assert math.dist(
        (final["pose"]["x"], final["pose"]["y"], final["pose"]["z"]), (0.0, 0.0, 0.40)
    ) < 0.002


def test_two_clients_see_identical_ordered_streams(live):
    async def collect(session, n):
        states = []
        async with session.ws_connect(f"ws://127.0.0.1:{live.port}/ws") as ws:
            while len(states) < n:
                data = json.loads((await ws.receive()).data)
                if data.get("type") == "state":
                    states.append(data)
        return states

    async def go():
        async with aiohttp.ClientSession() as session:
            return await asyncio.gather(collect(session, 40), collect(session, 40))

    stream_a, stream_b = asyncio.run(go())
    for stream in (stream_a, stream_b):
        seqs = [s["seq"] for s in stream]
        assert seqs == sorted(set(seqs)), "per-client stream must be strictly increasing"
    by_seq = {s["seq"]: s for s in stream_a}
    for s in stream_b:
        if s["seq"] in by_seq:
            assert by_seq[s["seq"]] == s


def test_client_death_does_not_stop_motion(live):
    async def fire_and_die():
        async with aiohttp.ClientSession() as session:
            async with session.ws_connect(f"ws://127.0.0.1:{live.port}/ws") as ws:
                await ws.send_str(json.dumps({"type": "goto_joints", "q": [-0.9, 0.0, 0.0, 0.0]}))
                data = json.loads((await ws.receive()).data)
                while "ok" not in data:
                    data = json.loads((await ws.receive()).data)
                return data["seq"]

    seq = asyncio.run(fire_and_die())

    async def watch():
        async with aiohttp.ClientSession() as session:
            async with session.ws_connect(f"ws://127.0.0.1:{live.port}/ws") as ws:
                for _ in range(800):
                    data = json.loads((await ws.receive()).data)
                    if (
                        data.get("type") == "state"
                        and data["last_cmd_seq"] >= seq
                        and data["mode"] == "idle"
                    ):
                        return data
        return None

    final = asyncio.run(watch())
    assert final is not None
    assert final["joints"][0]["pos"] == pytest.approx(-0.9, abs=0.01)
    # Leave the arm home for any later test using the shared service.
    asyncio.run(_send_home(live.port))


async def _send_home(port):
    async with aiohttp.ClientSession() as session:
        async with session.ws_connect(f"ws://127.0.0.1:{port}/ws") as ws:
            await ws.send_str(json.dumps({"type": "home"}))
            for _ in range(800):
                data = json.loads((await ws.receive()).data)
                if data.get("type") == "state" and data["mode"] == "idle" and data["joints"][0]["ticks"] == 2048:
                    return


def test_command_validated_before_fault_cannot_lift_latch(desc):
    from armstack.description import JointVector
    from armstack.service import _Cmd

    flaky = FlakyTransport(SimTransport(VirtualBus.from_description(desc)))
    ctrl = ControlLoop(flaky, desc, read_timeout_s=0.01)
    ctrl.initialize()
    flaky.dead = True
    ctrl.tick_once(DT)
    assert ctrl.latest_state()["mode"] == "fault"
    flaky.dead = False
    # A goto that slipped into the mailbox before the fault was published
    # must not clear the latch when the loop finally drains it.
    ctrl._mailbox.put(_Cmd(99, "goto", target=JointVector(q1=0.5)))
    writes_before = flaky.inner.bus.stats.goal_writes
    for _ in range(5):
        ctrl.tick_once(DT)
    assert ctrl.latest_state()["mode"] == "fault"
    assert flaky.inner.bus.stats.goal_writes == writes_before
    flaky.close()
