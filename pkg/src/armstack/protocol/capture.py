"""Bus traffic capture files: length-prefixed, timestamped byte chunks.

Record layout after the 4-byte magic, repeated until EOF:

    f64 LE timestamp_s | u8 direction | u32 LE length | payload bytes

direction 0 is host-to-bus, 1 is bus-to-host. Captures replay through
FrameBuffer in tests and when debugging bus traces offline.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, NamedTuple

MAGIC = b"DXC1"
HOST_TO_BUS = 0
BUS_TO_HOST = 1

_RECORD_HEAD = struct.Struct("<dBI")


class CaptureRecord(NamedTuple):
    timestamp_s: float
    direction: int
    data: bytes


class CaptureError(ValueError):
    """Capture file is malformed."""


def write_capture(path: str | Path, records: Iterable[CaptureRecord]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for rec in records:
            fh.write(_RECORD_HEAD.pack(rec.timestamp_s, rec.direction, len(rec.data)))
            fh.write(rec.data)


def read_capture(path: str | Path) -> list[CaptureRecord]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CaptureError("bad capture magic")
    records = []
    pos = 4
    while pos < len(blob):
        if pos + _RECORD_HEAD.size > len(blob):
            raise CaptureError("truncated record header")
        timestamp_s, direction, length = _RECORD_HEAD.unpack_from(blob, pos)
        pos += _RECORD_HEAD.size
        if pos + length > len(blob):
            raise CaptureError("truncated record payload")
        records.append(CaptureRecord(timestamp_s, direction, bytes(blob[pos : pos + length])))
        pos += length
    return records
