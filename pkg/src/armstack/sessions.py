"""Client sessions for driving a control loop: in-process or over the wire.

Both sessions expose the same blocking surface (submit / state / wait_done /
drain_states) so the script runner and jog client do not care whether the
robot lives in this process or behind a WebSocket.
"""

from __future__ import annotations

import asyncio
import collections
import json
import threading

import aiohttp

from .description import JointVector, RobotDescription
from .errors import TransportError
from .service import ControlLoop
from .simulator import VirtualBus
from .transport import SimTransport


def config_from_state(state: dict) -> JointVector:
    """Rebuild the configuration vector from a published state object."""
    joints = state["joints"]
    return JointVector(
        joints[0]["pos"], joints[1]["pos"], joints[2]["pos"], joints[3]["pos"], w=joints[4]["pos"]
    )


class LocalSession:
    """An embedded simulator robot behind an in-process control loop."""

    def __init__(self, description: RobotDescription, rate_hz: float | None = None):
        self.description = description
        self.transport = SimTransport(VirtualBus.from_description(description))
        self.ctrl = ControlLoop(self.transport, description, rate_hz=rate_hz)
        self._states: collections.deque[dict] = collections.deque(maxlen=100_000)
        self.ctrl.initialize()
        self.ctrl.add_listener(self._states.append)
        self.ctrl.start()

    def submit(self, msg: dict) -> dict:
        return self.ctrl.submit(json.dumps(msg))

    def state(self) -> dict:
        return self.ctrl.latest_state()

    def wait_done(self, cmd_seq: int, timeout_s: float = 30.0) -> dict:
        state = self.ctrl.wait_for_state(
            lambda s: s["last_cmd_seq"] >= cmd_seq and s["mode"] == "idle", timeout_s
        )
        if state is None:
            raise TransportError(f"command {cmd_seq} did not finish within {timeout_s} s")
        return state

    def drain_states(self) -> list[dict]:
        out = []
        while self._states:
            out.append(self._states.popleft())
        return out

    def close(self) -> None:
        self.ctrl.shutdown()
        self.transport.close()


class RemoteSession:
    """A robot behind ws://host:port/ws; runs its own event-loop thread."""

    def __init__(self, url: str, connect_timeout_s: float = 5.0):
        self.url = url
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, daemon=True)
        self._thread.start()
        self._states: collections.deque[dict] = collections.deque(maxlen=100_000)
        self._latest: dict | None = None
        self._acks: asyncio.Queue | None = None
        self._state_evt = threading.Event()
        self._submit_lock = threading.Lock()
        self._state_listener = None
        try:
            self._run(self._connect(), timeout=connect_timeout_s + 1.0)
        except (aiohttp.ClientError, asyncio.TimeoutError, OSError) as exc:
            self._stop_loop()
            raise TransportError(f"cannot connect to {url}: {exc}") from exc

    def _run(self, coro, timeout: float = 30.0):
        return asyncio.run_coroutine_threadsafe(coro, self._loop).result(timeout)

    async def _connect(self):
        self._http = aiohttp.ClientSession()
        self._ws = await self._http.ws_connect(self.url, timeout=aiohttp.ClientWSTimeout(ws_close=5.0))
        self._acks = asyncio.Queue()
        self._receiver = asyncio.get_running_loop().create_task(self._receive())

    def set_state_listener(self, callback) -> None:
        """Called with every incoming state, from the session's own thread."""
        self._state_listener = callback

    async def _receive(self):
        async for msg in self._ws:
            if msg.type != aiohttp.WSMsgType.TEXT:
                break
            data = json.loads(msg.data)
            if data.get("type") == "state":
                self._latest = data
                self._states.append(data)
                self._state_evt.set()
                if self._state_listener is not None:
                    try:
                        self._state_listener(data)
                    except Exception:
                        pass
            else:
                await self._acks.put(data)

    async def _send_and_ack(self, msg: dict) -> dict:
        await self._ws.send_str(json.dumps(msg))
        return await asyncio.wait_for(self._acks.get(), timeout=10.0)

    def submit(self, msg: dict) -> dict:
        # One in-flight command at a time keeps ack pairing trivial.
        with self._submit_lock:
            return self._run(self._send_and_ack(msg))

    def state(self) -> dict | None:
        return self._latest

    def wait_state(self, timeout_s: float = 2.0) -> dict | None:
        """Block until any state frame arrives."""
        self._state_evt.clear()
        self._state_evt.wait(timeout_s)
        return self._latest

    def wait_done(self, cmd_seq: int, timeout_s: float = 30.0) -> dict:
        import time

        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            state = self._latest
            if state and state["last_cmd_seq"] >= cmd_seq and state["mode"] == "idle":
                return state
            self._state_evt.clear()
            self._state_evt.wait(0.5)
        raise TransportError(f"command {cmd_seq} did not finish within {timeout_s} s")

    def drain_states(self) -> list[dict]:
        out = []
        while self._states:
            out.append(self._states.popleft())
        return out

    def fetch_description(self) -> dict:
        base = self.url.replace("ws://", "http://").replace("wss://", "https://")
        base = base.rsplit("/ws", 1)[0]

        async def get():
            async with self._http.get(f"{base}/description") as resp:
                return await resp.json()

        return self._run(get())

    def _stop_loop(self):
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=2.0)

    def close(self) -> None:
        async def shutdown():
            await self._ws.close()
            await self._http.close()

        try:
            self._run(shutdown(), timeout=5.0)
        except Exception:
            pass
        self._stop_loop()
