"""Byte transports: the virtual bus and a posix serial port.

Both expose the same write/read/close surface so the control loop never
knows whether hardware is attached. Serial defaults are 8N1; the baud comes
from the robot description.
"""

from __future__ import annotations

import os
import select
import time
from typing import Protocol, runtime_checkable

from .errors import TransportError
from .simulator import VirtualBus


@runtime_checkable
class Transport(Protocol):
    def write(self, data: bytes) -> None: ...

    def read(self, max_bytes: int, timeout_s: float) -> bytes: ...

    def close(self) -> None: ...


class SimTransport:
    """Loopback transport that owns a virtual bus.

    Responses appear immediately after write(); tick() advances simulated
    time, which the control loop calls once per cycle.
    """

    def __init__(self, bus: VirtualBus):
        self.bus = bus
        self._rx = bytearray()
        self._closed = False

    def write(self, data: bytes) -> None:
        if self._closed:
            raise TransportError("transport is closed")
        self._rx += self.bus.handle(data)

    def read(self, max_bytes: int, timeout_s: float) -> bytes:
        out = bytes(self._rx[:max_bytes])
        del self._rx[:max_bytes]
        return out

    def tick(self, dt: float) -> None:
        self.bus.step(dt)

    def close(self) -> None:
        self._closed = True


class SerialTransport:
    """Raw 8N1 serial port via termios; posix only."""

    def __init__(self, path: str, baud: int = 57600):
        import termios

        try:
            speed = getattr(termios, f"B{baud}")
        except AttributeError:
            raise TransportError(f"unsupported baud rate: {baud}") from None
        try:
            self._fd = os.open(path, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
        except OSError as exc:
            raise TransportError(f"cannot open serial port {path}: {exc}") from exc
        try:
            attrs = termios.tcgetattr(self._fd)
            attrs[0] = 0                                    # iflag: raw input
            attrs[1] = 0                                    # oflag: raw output
            attrs[2] = termios.CS8 | termios.CREAD | termios.CLOCAL
            attrs[3] = 0                                    # lflag: no echo/canonical
            attrs[4] = speed
            attrs[5] = speed
            attrs[6][termios.VMIN] = 0
            attrs[6][termios.VTIME] = 0
            termios.tcsetattr(self._fd, termios.TCSANOW, attrs)
            termios.tcflush(self._fd, termios.TCIOFLUSH)
        except termios.error as exc:
            os.close(self._fd)
            raise TransportError(f"cannot configure serial port {path}: {exc}") from exc
        self.path = path

    def write(self, data: bytes) -> None:
        view = memoryview(data)
        while view:
            view = view[os.write(self._fd, view):]

    def read(self, max_bytes: int, timeout_s: float) -> bytes:
        ready, _, _ = select.select([self._fd], [], [], timeout_s)
        if not ready:
            return b""
        return os.read(self._fd, max_bytes)

    def close(self) -> None:
        os.close(self._fd)


class DelayedTransport:
    """Wraps a transport and delays responses; useful for latency testing."""

    def __init__(self, inner: Transport, delay_s: float):
        self.inner = inner
        self.delay_s = delay_s

    def write(self, data: bytes) -> None:
        self.inner.write(data)

    def read(self, max_bytes: int, timeout_s: float) -> bytes:
        time.sleep(min(self.delay_s, timeout_s))
        return self.inner.read(max_bytes, max(0.0, timeout_s - self.delay_s))

    def tick(self, dt: float) -> None:
        tick = getattr(self.inner, "tick", None)
        if tick is not None:
            tick(dt)

    def close(self) -> None:
        self.inner.close()
