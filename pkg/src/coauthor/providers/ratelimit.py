"""Request pacing for provider clients."""

from __future__ import annotations

import threading
import time
from typing import Callable


class RateLimiter:
    """Spaces grants 1/rps apart so at most rps requests start per second.

    Clock and sleep are injectable so tests can drive a fake timeline.
    """

    def __init__(
        self,
        rps: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rps <= 0:
            raise ValueError("rps must be positive")
        self.interval = 1.0 / rps
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot: float | None = None

    def acquire(self) -> float:
        """Block until a slot is free; returns the granted start time."""
        with self._lock:
            now = self._clock()
            slot = now if self._next_slot is None else max(now, self._next_slot)
            self._next_slot = slot + self.interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)
        return slot
