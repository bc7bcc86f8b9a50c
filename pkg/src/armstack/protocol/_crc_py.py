"""Pure-Python CRC-16 backend (polynomial 0x8005, MSB-first, init 0).

Used whenever the compiled extension is unavailable; same contract as
armstack.protocol._crc.
"""

POLYNOMIAL = 0x8005


def _build_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ POLYNOMIAL) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_TABLE = _build_table()


def crc16(data: bytes, crc: int = 0) -> int:
    """Accumulate the checksum of data over an optional running value."""
    table = _TABLE
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[((crc >> 8) ^ b) & 0xFF]
    return crc
