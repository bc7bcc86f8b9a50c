# cython: boundscheck=False, wraparound=False
"""Compiled CRC-16 kernel (polynomial 0x8005, MSB-first, init 0).

The checksum runs over every frame in both bus directions, so this is the
one byte-level loop worth compiling; armstack.protocol._crc_py is the
drop-in fallback.
"""

from libc.stdint cimport uint8_t, uint16_t

cdef uint16_t TABLE[256]


cdef void _fill_table() noexcept:
    cdef unsigned int byte, crc
    cdef int bit
    for byte in range(256):
        crc = byte << 8
        for bit in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x8005) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
        TABLE[byte] = <uint16_t>crc


_fill_table()


def crc16(const uint8_t[::1] data, unsigned int crc=0):
    """Accumulate the checksum of data over an optional running value."""
    cdef Py_ssize_t i, n = data.shape[0]
    cdef uint16_t c = <uint16_t>crc
    with nogil:
        for i in range(n):
            c = <uint16_t>((c << 8) ^ TABLE[((c >> 8) ^ data[i]) & 0xFF])
    return c
