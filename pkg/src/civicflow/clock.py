"""Clock sources.

All temporal behaviour in the system reads time through a ``Clock`` so tests
can drive timers deterministically with :class:`SimulatedClock`.
Timestamps are seconds since epoch as floats; durations are plain seconds.
"""

from __future__ import annotations

import time


class Clock:
    """Wall clock. ``now()`` is monotonic non-decreasing for our purposes."""

    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class SimulatedClock(Clock):
    """Manually advanced clock for tests; never moves backwards."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        self.advance(seconds)

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot advance a clock backwards")
        self._now += seconds
        return self._now

    def set(self, timestamp: float) -> float:
        if timestamp < self._now:
            raise ValueError("cannot set a clock backwards")
        self._now = float(timestamp)
        return self._now


MINUTE = 60
HOUR = 60 * MINUTE
DAY = 24 * HOUR
