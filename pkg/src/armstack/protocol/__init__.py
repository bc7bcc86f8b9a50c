"""Servo bus protocol: frame codec, CRC, incremental framer, captures."""

from .capture import BUS_TO_HOST, HOST_TO_BUS, CaptureRecord, read_capture, write_capture
from .crc import CRC_BACKEND, crc16
from .packets import (
    BROADCAST_ID,
    HEADER,
    MAX_FRAME_LEN,
    MAX_PARAMS_LEN,
    STATUS_INSTRUCTION,
    CrcError,
    FrameBuffer,
    FrameError,
    FramerDiagnostic,
    Instruction,
    InstructionPacket,
    Packet,
    StatusPacket,
    decode,
    destuff,
    encode,
    stuff,
)

__all__ = [
    "BROADCAST_ID",
    "BUS_TO_HOST",
    "CRC_BACKEND",
    "CaptureRecord",
    "CrcError",
    "FrameBuffer",
    "FrameError",
    "FramerDiagnostic",
    "HEADER",
    "HOST_TO_BUS",
    "Instruction",
    "InstructionPacket",
    "MAX_FRAME_LEN",
    "MAX_PARAMS_LEN",
    "Packet",
    "STATUS_INSTRUCTION",
    "StatusPacket",
    "crc16",
    "decode",
    "destuff",
    "encode",
    "read_capture",
    "stuff",
    "write_capture",
]
