"""Throughput comparison of the CRC backends.

Run:  python benchmarks/bench_crc.py

The frame checksum is the byte-level hot loop of the whole stack (every
frame, both directions, plus resync scans), so it is the one kernel shipped
as a compiled extension. This prints MB/s for the compiled kernel (when
built), the pure-Python table fallback, and the bit-at-a-time formulation
for scale.
"""

import os
import time

from armstack.protocol import CRC_BACKEND
from armstack.protocol._crc_py import crc16 as crc16_py

try:
    from armstack.protocol._crc import crc16 as crc16_cy
except ImportError:
    crc16_cy = None


def crc16_bitwise(data: bytes, crc: int = 0) -> int:
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005 if crc & 0x8000 else crc << 1) & 0xFFFF
    return crc


def measure(fn, payload: bytes, min_seconds: float = 0.5) -> float:
    """Returns MB/s over at least min_seconds of work."""
    n = 0
    start = time.perf_counter()
    elapsed = 0.0
    while elapsed < min_seconds:
        fn(payload)
        n += 1
        elapsed = time.perf_counter() - start
    return len(payload) * n / elapsed / 1e6


def main() -> None:
    print(f"selected backend: {CRC_BACKEND}")
    backends = [("python table", crc16_py)]
    if crc16_cy is not None:
        backends.insert(0, ("cython", crc16_cy))
    for size in (16, 256, 4096, 1 << 20):
        payload = os.urandom(size)
        ref = crc16_py(payload)
        row = [f"{size:>8} B"]
        for name, fn in backends:
            assert fn(payload) == ref
            row.append(f"{name}: {measure(fn, payload):9.2f} MB/s")
        if size <= 4096:
            assert crc16_bitwise(payload) == ref
            row.append(f"bitwise: {measure(crc16_bitwise, payload, 0.2):6.3f} MB/s")
        print("  ".join(row))


if __name__ == "__main__":
    main()
