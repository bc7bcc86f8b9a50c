"""Byte-accurate virtual servo bus.

N virtual position-mode servos with a register table and a constant-speed
motion integrator answer real instruction frames, so every layer above the
transport runs unmodified with no hardware attached. Deliberate divergence
from real servos: motion follows a rectangular (constant-velocity) profile
driven by ProfileVelocity only; acceleration shaping belongs to the motion
planner, and responses have zero latency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .description import RobotDescription
from .protocol import (
    BROADCAST_ID,
    FrameBuffer,
    Instruction,
    InstructionPacket,
    StatusPacket,
    encode,
)

MODEL_NUMBER = 1060  # XL430-class
FIRMWARE_VERSION = 44

# Register-count velocity unit: 0.229 rev/min per count, 0 = unlimited.
VELOCITY_UNIT_REV_PER_MIN = 0.229

ERR_NONE = 0x00
ERR_INSTRUCTION = 0x02
ERR_DATA_RANGE = 0x04
ERR_DATA_LENGTH = 0x05
ERR_ACCESS = 0x07


class Register(NamedTuple):
    name: str
    address: int
    size: int
    writable: bool
    default: int


REGISTERS = (
    Register("id", 7, 1, True, 1),
    Register("operating_mode", 11, 1, True, 3),
    Register("torque_enable", 64, 1, True, 0),
    Register("led", 65, 1, True, 0),
    Register("profile_velocity", 112, 4, True, 0),
    Register("goal_position", 116, 4, True, 2048),
    Register("moving", 122, 1, False, 0),
    Register("present_position", 132, 4, False, 2048),
)

_BY_ADDRESS = {reg.address: reg for reg in REGISTERS}
_BY_NAME = {reg.name: reg for reg in REGISTERS}

ADDR_ID = _BY_NAME["id"].address
ADDR_OPERATING_MODE = _BY_NAME["operating_mode"].address
ADDR_TORQUE_ENABLE = _BY_NAME["torque_enable"].address
ADDR_PROFILE_VELOCITY = _BY_NAME["profile_velocity"].address
ADDR_GOAL_POSITION = _BY_NAME["goal_position"].address
ADDR_MOVING = _BY_NAME["moving"].address
ADDR_PRESENT_POSITION = _BY_NAME["present_position"].address

_TABLE_SIZE = 256


class VirtualServo:
    """One bus device: a register table plus a constant-speed integrator."""

    def __init__(
        self,
        servo_id: int,
        ticks_per_rev: int = 4096,
        initial_ticks: int = 2048,
        reject_goal_when_torque_off: bool = False,
    ):
        self.ticks_per_rev = ticks_per_rev
        self.reject_goal_when_torque_off = reject_goal_when_torque_off
        self._store = bytearray(_TABLE_SIZE)
        for reg in REGISTERS:
            self._poke(reg.address, reg.size, reg.default)
        self._poke(ADDR_ID, 1, servo_id)
        self._poke(ADDR_GOAL_POSITION, 4, initial_ticks)
        self._poke(ADDR_PRESENT_POSITION, 4, initial_ticks)
        self._position = float(initial_ticks)

    # -- raw table access ------------------------------------------------

    def _poke(self, address: int, size: int, value: int) -> None:
        self._store[address : address + size] = int(value).to_bytes(size, "little", signed=False)

    def _peek(self, address: int, size: int) -> int:
        return int.from_bytes(self._store[address : address + size], "little")

    @property
    def servo_id(self) -> int:
        return self._peek(ADDR_ID, 1)

    @property
    def present_position(self) -> int:
        return self._peek(ADDR_PRESENT_POSITION, 4)

    @property
    def goal_position(self) -> int:
        return self._peek(ADDR_GOAL_POSITION, 4)

    @property
    def torque_enabled(self) -> bool:
        return self._peek(ADDR_TORQUE_ENABLE, 1) != 0

    @property
    def moving(self) -> bool:
        return self._peek(ADDR_MOVING, 1) != 0

    def read_region(self, address: int, length: int) -> tuple[int, bytes]:
        """Read `length` bytes starting at `address`; returns (error, data)."""
        if length == 0 or address < 0 or address + length > _TABLE_SIZE:
            return ERR_DATA_RANGE, b""
        return ERR_NONE, bytes(self._store[address : address + length])

    def write_register(self, address: int, data: bytes) -> int:
        """Write one whole register; returns the protocol error code."""
        reg = _BY_ADDRESS.get(address)
        if reg is None or len(data) != reg.size:
            return ERR_DATA_RANGE
        if not reg.writable:
            return ERR_ACCESS
        value = int.from_bytes(data, "little")
        if reg.address == ADDR_GOAL_POSITION:
            if not 0 <= value < self.ticks_per_rev:
                return ERR_DATA_RANGE
            if not self.torque_enabled and self.reject_goal_when_torque_off:
                return ERR_ACCESS
        self._store[address : address + reg.size] = data
        self._refresh_moving()
        return ERR_NONE

    # -- dynamics ---------------------------------------------------------

    def _speed_ticks_per_s(self) -> float:
        counts = self._peek(ADDR_PROFILE_VELOCITY, 4)
        if counts == 0:
            return float("inf")
        return counts * VELOCITY_UNIT_REV_PER_MIN * self.ticks_per_rev / 60.0

    def _refresh_moving(self) -> None:
        gap = abs(self.goal_position - self.present_position)
        tracking = self.torque_enabled and gap > 1
        self._poke(ADDR_MOVING, 1, 1 if tracking else 0)

    def step(self, dt: float) -> None:
        """Advance the integrator: approach the goal at the profile speed."""
        if self.torque_enabled:
            target = float(self.goal_position)
            delta = target - self._position
            limit = self._speed_ticks_per_s() * dt
            if abs(delta) <= limit:
                self._position = target
            else:
                self._position += limit if delta > 0 else -limit
            self._poke(ADDR_PRESENT_POSITION, 4, round(self._position))
        self._refresh_moving()


@dataclass
class BusStats:
    frames: int = 0
    pings: int = 0
    reads: int = 0
    writes: int = 0
    sync_writes: int = 0
    goal_writes: int = 0
    errors_returned: int = 0
    unknown_id_drops: int = 0
    protocol_violations: int = 0


@dataclass
class VirtualBus:
    """A daisy chain of virtual servos behind a single byte stream."""

    servos: dict[int, VirtualServo] = field(default_factory=dict)
    stats: BusStats = field(default_factory=BusStats)

    def __post_init__(self):
        self._framer = FrameBuffer()

    @classmethod
    def from_servos(cls, servos) -> "VirtualBus":
        bus = cls()
        for servo in servos:
            if servo.servo_id in bus.servos:
                raise ValueError(f"duplicate servo id on bus: {servo.servo_id}")
            bus.servos[servo.servo_id] = servo
        return bus

    @classmethod
    def from_description(cls, d: RobotDescription) -> "VirtualBus":
        """Five servos wired per the description, parked at their center ticks."""
        return cls.from_servos(
            VirtualServo(jc.motor_id, ticks_per_rev=jc.ticks_per_rev, initial_ticks=jc.center_ticks)
            for jc in d.joints
        )

    @property
    def framer_diagnostics(self) -> int:
        return self._framer.crc_errors + self._framer.bad_lengths

    def handle(self, data: bytes) -> bytes:
        """Feed raw host bytes in; get the concatenated status responses out."""
        out = bytearray()
        for packet in self._framer.feed(data):
            if not isinstance(packet, InstructionPacket):
                self.stats.protocol_violations += 1
                continue
            self.stats.frames += 1
            out += self._dispatch(packet)
        return bytes(out)

    def step(self, dt: float) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        for servo in self.servos.values():
            servo.step(dt)

    # -- instruction handling ----------------------------------------------

    def _dispatch(self, packet: InstructionPacket) -> bytes:
        if packet.instruction == Instruction.SYNC_WRITE:
            self._sync_write(packet.params)
            return b""
        if packet.id == BROADCAST_ID:
            if packet.instruction == Instruction.PING:
                self.stats.pings += 1
                return b"".join(
                    self._ping_status(sid) for sid in sorted(self.servos)
                )
            self.stats.protocol_violations += 1
            return b""
        servo = self.servos.get(packet.id)
        if servo is None:
            self.stats.unknown_id_drops += 1
            return b""
        if packet.instruction == Instruction.PING:
            self.stats.pings += 1
            return self._ping_status(packet.id)
        if packet.instruction == Instruction.READ:
            self.stats.reads += 1
            return self._read(servo, packet)
        if packet.instruction == Instruction.WRITE:
            self.stats.writes += 1
            return self._write(servo, packet)
        # Unknown instruction: real devices answer with an instruction error.
        self.stats.protocol_violations += 1
        return self._status(packet.id, ERR_INSTRUCTION)

    def _status(self, servo_id: int, error: int, params: bytes = b"") -> bytes:
        if error != ERR_NONE:
            self.stats.errors_returned += 1
        return encode(StatusPacket(id=servo_id, error=error, params=params))

    def _ping_status(self, servo_id: int) -> bytes:
        params = MODEL_NUMBER.to_bytes(2, "little") + bytes([FIRMWARE_VERSION])
        return self._status(servo_id, ERR_NONE, params)

    def _read(self, servo: VirtualServo, packet: InstructionPacket) -> bytes:
        if len(packet.params) != 4:
            return self._status(packet.id, ERR_DATA_LENGTH)
        address = int.from_bytes(packet.params[0:2], "little")
        length = int.from_bytes(packet.params[2:4], "little")
        error, data = servo.read_region(address, length)
        return self._status(packet.id, error, data)

    def _write(self, servo: VirtualServo, packet: InstructionPacket) -> bytes:
        if len(packet.params) < 3:
            return self._status(packet.id, ERR_DATA_LENGTH)
        address = int.from_bytes(packet.params[0:2], "little")
        error = self._apply_write(servo, address, packet.params[2:])
        if error == ERR_NONE and address == ADDR_GOAL_POSITION:
            self.stats.goal_writes += 1
        return self._status(packet.id, error)

    def _apply_write(self, servo: VirtualServo, address: int, data: bytes) -> int:
        if address == ADDR_ID:
            if len(data) != 1:
                return ERR_DATA_RANGE
            new_id = data[0]
            old_id = servo.servo_id
            if not 1 <= new_id <= 253 or (new_id != old_id and new_id in self.servos):
                return ERR_DATA_RANGE
            error = servo.write_register(address, data)
            if error == ERR_NONE and new_id != old_id:
                self.servos[new_id] = self.servos.pop(old_id)
            return error
        return servo.write_register(address, data)

    def _sync_write(self, params: bytes) -> None:
        self.stats.sync_writes += 1
        if len(params) < 4:
            self.stats.protocol_violations += 1
            return
        address = int.from_bytes(params[0:2], "little")
        length = int.from_bytes(params[2:4], "little")
        body = params[4:]
        if length == 0 or len(body) % (1 + length) != 0:
            self.stats.protocol_violations += 1
            return
        for offset in range(0, len(body), 1 + length):
            servo_id = body[offset]
            servo = self.servos.get(servo_id)
            if servo is None:
                self.stats.unknown_id_drops += 1
                continue
            error = servo.write_register(address, body[offset + 1 : offset + 1 + length])
            if error == ERR_NONE and address == ADDR_GOAL_POSITION:
                self.stats.goal_writes += 1
            elif error != ERR_NONE:
                self.stats.errors_returned += 1
