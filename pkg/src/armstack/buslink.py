"""Host side of the servo bus: request/response transactions over a transport."""

from __future__ import annotations

import math
import time

from .protocol import (
    BROADCAST_ID,
    FrameBuffer,
    Instruction,
    InstructionPacket,
    StatusPacket,
    encode,
)
from .simulator import (
    ADDR_GOAL_POSITION,
    ADDR_MOVING,
    ADDR_PRESENT_POSITION,
    ADDR_PROFILE_VELOCITY,
    ADDR_TORQUE_ENABLE,
    VELOCITY_UNIT_REV_PER_MIN,
)
from .transport import Transport

_POLL_S = 0.002


class BusLink:
    """Synchronous request/response client for one bus transport.

    Single-owner: exactly one thread may use a link at a time, which is the
    control loop's job anyway.
    """

    def __init__(self, transport: Transport, timeout_s: float = 0.02):
        self.transport = transport
        self.timeout_s = timeout_s
        self._framer = FrameBuffer()

    def _collect(self, expected: int, timeout_s: float) -> list[StatusPacket]:
        """Read until `expected` status frames arrive or the timeout lapses."""
        deadline = time.monotonic() + timeout_s
        statuses: list[StatusPacket] = []
        first = True
        while len(statuses) < expected:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            data = self.transport.read(4096, remaining if first else _POLL_S)
            first = False
            if data:
                statuses += [p for p in self._framer.feed(data) if isinstance(p, StatusPacket)]
            else:
                # The simulator's read returns instantly; pace the retry so a
                # missing response costs the timeout, not a busy loop.
                time.sleep(min(_POLL_S, max(0.0, deadline - time.monotonic())))
        return statuses

    def _transact(self, packet: InstructionPacket, expected: int, timeout_s: float | None):
        self.transport.write(encode(packet))
        if expected == 0:
            return []
        return self._collect(expected, self.timeout_s if timeout_s is None else timeout_s)

    def ping(self, servo_id: int, timeout_s: float | None = None) -> StatusPacket | None:
        replies = self._transact(
            InstructionPacket(id=servo_id, instruction=Instruction.PING), 1, timeout_s
        )
        return replies[0] if replies else None

    def read(self, servo_id: int, address: int, length: int, timeout_s: float | None = None) -> bytes | None:
        """Read a register region; None on timeout or device error."""
        params = address.to_bytes(2, "little") + length.to_bytes(2, "little")
        replies = self._transact(
            InstructionPacket(id=servo_id, instruction=Instruction.READ, params=params),
            1,
            timeout_s,
        )
        if not replies or replies[0].error & 0x7F:
            return None
        return replies[0].params

    def write(self, servo_id: int, address: int, data: bytes, timeout_s: float | None = None) -> StatusPacket | None:
        params = address.to_bytes(2, "little") + data
        replies = self._transact(
            InstructionPacket(id=servo_id, instruction=Instruction.WRITE, params=params),
            1,
            timeout_s,
        )
        return replies[0] if replies else None

    def sync_write(self, address: int, size: int, values: dict[int, bytes]) -> None:
        """Broadcast per-servo register data; no responses by design."""
        body = b"".join(bytes([sid]) + data for sid, data in sorted(values.items()))
        params = address.to_bytes(2, "little") + size.to_bytes(2, "little") + body
        self._transact(
            InstructionPacket(id=BROADCAST_ID, instruction=Instruction.SYNC_WRITE, params=params),
            0,
            None,
        )

    # -- convenience wrappers used by the control loop ---------------------

    def read_present(self, servo_id: int) -> tuple[int, bool] | None:
        """PresentPosition and Moving in one region read; None on timeout."""
        data = self.read(servo_id, ADDR_MOVING, ADDR_PRESENT_POSITION - ADDR_MOVING + 4)
        if data is None:
            return None
        present = int.from_bytes(data[-4:], "little")
        return present, bool(data[0])

    def write_goals(self, goals: dict[int, int]) -> None:
        self.sync_write(
            ADDR_GOAL_POSITION, 4, {sid: int(v).to_bytes(4, "little") for sid, v in goals.items()}
        )

    def set_torque(self, servo_ids, enabled: bool) -> None:
        for servo_id in servo_ids:
            self.write(servo_id, ADDR_TORQUE_ENABLE, b"\x01" if enabled else b"\x00")

    def configure_profile_velocity(self, servo_id: int, vmax_rad_s: float, ticks_per_rev: int) -> None:
        """Cap servo speed just above the planner's bound so setpoints track."""
        ticks_per_s = vmax_rad_s * ticks_per_rev / math.tau
        unit = VELOCITY_UNIT_REV_PER_MIN * ticks_per_rev / 60.0
        counts = max(1, math.ceil(ticks_per_s / unit))
        self.write(servo_id, ADDR_PROFILE_VELOCITY, counts.to_bytes(4, "little"))
