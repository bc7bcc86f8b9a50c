"""Servo-bus frame codec: instruction/status packets, byte stuffing, framing.

Wire layout (little-endian multi-byte fields):

    FF FF FD 00 | id | len_l len_h | instr | params... | crc_l crc_h

len counts everything after the length field (instruction byte, stuffed
params, 2 CRC bytes). Status frames use the fixed instruction byte 0x55
followed by an error byte. Any FF FF FD inside params is stuffed to
FF FF FD FD before the length and CRC are computed.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Union

from .crc import crc16

HEADER = b"\xff\xff\xfd\x00"
BROADCAST_ID = 0xFE
MAX_UNICAST_ID = 0xFD
STATUS_INSTRUCTION = 0x55
MAX_PARAMS_LEN = 65528
# Frames above this size are treated as noise by the framer; far above
# anything a five-servo arm produces, it only bounds memory.
MAX_FRAME_LEN = 1024

_STUFF_PATTERN = b"\xff\xff\xfd"
_STUFFED_PATTERN = b"\xff\xff\xfd\xfd"


class Instruction(enum.IntEnum):
    PING = 0x01
    READ = 0x02
    WRITE = 0x03
    SYNC_WRITE = 0x83


class FrameError(ValueError):
    """A byte string is not a well-formed frame."""


class CrcError(FrameError):
    """Frame checksum mismatch."""


@dataclass(frozen=True)
class InstructionPacket:
    id: int
    instruction: int
    params: bytes = b""

    def validate(self) -> None:
        if not 0 <= self.id <= BROADCAST_ID:
            raise ValueError(f"id out of range: {self.id}")
        if self.instruction == STATUS_INSTRUCTION:
            raise ValueError("0x55 is reserved for status frames")
        if not 0 <= self.instruction <= 0xFF:
            raise ValueError(f"instruction out of range: {self.instruction}")
        if len(self.params) > MAX_PARAMS_LEN:
            raise ValueError("oversize packet")
        if self.id == BROADCAST_ID and self.instruction not in (
            Instruction.PING,
            Instruction.SYNC_WRITE,
        ):
            raise ValueError("broadcast id is only valid for Ping and SyncWrite")


@dataclass(frozen=True)
class StatusPacket:
    id: int
    error: int
    params: bytes = b""

    def validate(self) -> None:
        if not 0 <= self.id <= MAX_UNICAST_ID:
            raise ValueError(f"id out of range: {self.id}")
        if not 0 <= self.error <= 0xFF:
            raise ValueError(f"error byte out of range: {self.error}")
        if len(self.params) > MAX_PARAMS_LEN:
            raise ValueError("oversize packet")


Packet = Union[InstructionPacket, StatusPacket]


def stuff(params: bytes) -> bytes:
    """Escape header-colliding byte runs inside a params payload."""
    return params.replace(_STUFF_PATTERN, _STUFFED_PATTERN)


def destuff(params: bytes) -> bytes:
    return params.replace(_STUFFED_PATTERN, _STUFF_PATTERN)


def encode(packet: Packet) -> bytes:
    """Serialize a packet to a complete wire frame."""
    packet.validate()
    stuffed = stuff(packet.params)
    if isinstance(packet, StatusPacket):
        length = len(stuffed) + 4
        body = bytes((packet.id, length & 0xFF, length >> 8, STATUS_INSTRUCTION, packet.error))
    else:
        length = len(stuffed) + 3
        body = bytes((packet.id, length & 0xFF, length >> 8, int(packet.instruction)))
    frame = HEADER + body + stuffed
    return frame + crc16(frame).to_bytes(2, "little")


def decode(frame: bytes) -> Packet:
    """Parse one complete frame; raises FrameError / CrcError on bad input."""
    if len(frame) < 10:
        raise FrameError(f"frame too short: {len(frame)} bytes")
    if frame[:4] != HEADER:
        raise FrameError("bad header")
    length = frame[5] | (frame[6] << 8)
    if 7 + length != len(frame):
        raise FrameError(f"length field {length} does not match frame size {len(frame)}")
    expected = frame[-2] | (frame[-1] << 8)
    actual = crc16(frame[:-2])
    if actual != expected:
        raise CrcError(f"crc mismatch: expected {expected:#06x}, computed {actual:#06x}")
    packet_id = frame[4]
    instruction = frame[7]
    if instruction == STATUS_INSTRUCTION:
        if length < 4:
            raise FrameError("status frame missing error byte")
        return StatusPacket(id=packet_id, error=frame[8], params=destuff(frame[9:-2]))
    try:
        value: int = Instruction(instruction)
    except ValueError:
        value = instruction  # instruction set is open for extension
    return InstructionPacket(id=packet_id, instruction=value, params=destuff(frame[8:-2]))


class FramerDiagnostic(NamedTuple):
    kind: str        # "crc_mismatch" or "bad_length"
    stream_offset: int


class FrameBuffer:
    """Incremental framer over an arbitrary byte stream.

    Emits every well-formed frame exactly once, in order, regardless of how
    the stream is chunked. Noise is skipped; a frame failing its CRC is
    recorded as a diagnostic and the scanner resynchronizes at the next
    header. Buffered data is bounded by the maximum frame length.
    """

    def __init__(self, max_frame_len: int = MAX_FRAME_LEN):
        self.max_frame_len = max_frame_len
        self.crc_errors = 0
        self.bad_lengths = 0
        self.diagnostics: deque[FramerDiagnostic] = deque(maxlen=128)
        self._buf = bytearray()
        self._stream_pos = 0  # absolute offset of _buf[0]

    def _drop(self, n: int) -> None:
        del self._buf[:n]
        self._stream_pos += n

    def feed(self, data: bytes) -> list[Packet]:
        self._buf += data
        out: list[Packet] = []
        while True:
            start = self._buf.find(HEADER)
            if start < 0:
                # Keep only a potential partial header.
                if len(self._buf) > 3:
                    self._drop(len(self._buf) - 3)
                break
            if start > 0:
                self._drop(start)
            if len(self._buf) < 7:
                break
            length = self._buf[5] | (self._buf[6] << 8)
            total = 7 + length
            if length < 3 or total > self.max_frame_len:
                self.bad_lengths += 1
                self.diagnostics.append(FramerDiagnostic("bad_length", self._stream_pos))
                self._drop(1)
                continue
            if len(self._buf) < total:
                break
            frame = bytes(self._buf[:total])
            if crc16(frame[:-2]) != (frame[-2] | (frame[-1] << 8)):
                self.crc_errors += 1
                self.diagnostics.append(FramerDiagnostic("crc_mismatch", self._stream_pos))
                self._drop(1)
                continue
            out.append(decode(frame))
            self._drop(total)
        return out

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
