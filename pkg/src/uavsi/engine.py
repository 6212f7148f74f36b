"""Deterministic discrete-event engine.

Time is an integer count of microseconds since simulation start. Events
that share a firing time run in insertion order.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Callable, Iterator

US_PER_MS = 1_000
US_PER_S = 1_000_000

DEFAULT_SEED = 42


class SchedulingInPast(ValueError):
    pass


def ms_to_us(ms: float) -> int:
    """Convert milliseconds to whole microseconds, rounding half up."""
    return int((Decimal(repr(float(ms))) * US_PER_MS).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def s_to_us(s: float) -> int:
    return int((Decimal(repr(float(s))) * US_PER_S).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int = -1
    kind: str = field(default="call", compare=False)
    data: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class Sample:
    time: int
    entity: str
    metric: str
    value: float


class MetricSink:
    """Append-only store of time-stamped samples."""

    def __init__(self) -> None:
        self.samples: list[Sample] = []

    def record(self, time: int, entity: str, metric: str, value: float) -> None:
        if self.samples and time < self.samples[-1].time:
            raise ValueError(f"sample at {time} us precedes last sample at {self.samples[-1].time} us")
        self.samples.append(Sample(time, entity, metric, float(value)))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def select(self, entity: str | None = None, metric: str | None = None) -> list[Sample]:
        return [
            s for s in self.samples
            if (entity is None or s.entity == entity) and (metric is None or s.metric == metric)
        ]


Handler = Callable[["Engine", Event], None]


class Engine:
    """Single-threaded event loop with a seeded random generator.

    Handlers are registered per event kind. The built-in ``call`` kind
    invokes ``data`` (a zero-argument callable) directly.
    """

    def __init__(self, seed: int = DEFAULT_SEED, topology: Any = None) -> None:
        self.seed = seed
        self.rng = random.Random(seed)
        self.topology = topology
        self.sink = MetricSink()
        self._clock = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._next_seq = 0
        self._handlers: dict[str, Handler] = {"call": lambda engine, ev: ev.data()}
        self.executed = 0

    def now(self) -> int:
        return self._clock

    def register(self, kind: str, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: Event) -> Event:
        if event.fire_at < self._clock:
            raise SchedulingInPast(f"event at {event.fire_at} us scheduled at now={self._clock} us")
        if event.kind not in self._handlers:
            raise KeyError(f"no handler registered for event kind {event.kind!r}")
        event.seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._queue, (event.fire_at, event.seq, event))
        return event

    def call_at(self, fire_at: int, fn: Callable[[], None]) -> Event:
        return self.schedule(Event(fire_at, kind="call", data=fn))

    def call_in(self, delay_us: int, fn: Callable[[], None]) -> Event:
        return self.call_at(self._clock + delay_us, fn)

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, horizon: int) -> MetricSink:
        while self._queue and self._queue[0][0] <= horizon:
            _, _, event = heapq.heappop(self._queue)
            self._clock = event.fire_at
            self._handlers[event.kind](self, event)
            self.executed += 1
        # Clock always lands on the horizon, even if the queue ran dry earlier.
        self._clock = max(self._clock, horizon)
        return self.sink
