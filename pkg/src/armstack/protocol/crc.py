"""CRC backend selection: compiled kernel when built, pure Python otherwise."""

try:
    from armstack.protocol._crc import crc16
    CRC_BACKEND = "cython"
except ImportError:
    from armstack.protocol._crc_py import crc16
    CRC_BACKEND = "python"

__all__ = ["crc16", "CRC_BACKEND"]
