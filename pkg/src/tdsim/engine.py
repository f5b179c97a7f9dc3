"""Deterministic discrete-event core.

The simulation clock is an integer number of microseconds so that periodic
schedules (1 ms slots, 100 ms decision ticks, 80 s episodes) stay exact and
runs replay bit for bit. Events fire in (time, insertion order) order, which
makes same-instant ordering a property of who scheduled first rather than of
heap internals.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    """Convert seconds to the integer microsecond clock."""
    return round(seconds * US_PER_S)


def to_s(us: int) -> float:
    return us / US_PER_S


class ContractViolation(RuntimeError):
    """An internal invariant was broken (programming error, not bad input)."""


class EventKind(Enum):
    FRAME_GENERATION = "frame-generation"
    TTI_TICK = "tti-tick"
    ORCHESTRATOR_TICK = "orchestrator-tick"
    PACKET_DELIVERY = "packet-delivery"
    EPISODE_END = "episode-end"


@dataclass(frozen=True)
class SimEvent:
    fire_us: int
    sequence_id: int
    kind: EventKind
    payload: Any = None


class Simulator:
    """Event queue with a monotonically advancing integer clock.

    Handlers are registered per event kind and may schedule further events
    at or after the current time; scheduling in the past raises
    ContractViolation.
    """

    def __init__(self) -> None:
        self.now_us: int = 0
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq: int = 0
        self._handlers: dict[EventKind, Callable[[SimEvent], None]] = {}
        self.dispatched: int = 0

    def on(self, kind: EventKind, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_us: int, kind: EventKind, payload: Any = None) -> SimEvent:
        if fire_us < self.now_us:
            raise ContractViolation(
                f"schedule {kind.value} at {fire_us} us before now {self.now_us} us"
            )
        event = SimEvent(fire_us, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, (fire_us, event.sequence_id, event))
        return event

    def run_until(self, t_end_us: int) -> int:
        """Dispatch every event with fire time <= t_end_us; returns the count.

        The clock lands exactly on t_end_us afterwards even if no event fired.
        """
        if t_end_us < self.now_us:
            raise ContractViolation(
                f"run_until {t_end_us} us before now {self.now_us} us"
            )
        n = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end_us:
            fire_us, _, event = heapq.heappop(heap)
            if fire_us < self.now_us:
                raise ContractViolation("event queue produced a past event")
            self.now_us = fire_us
            handler = self._handlers.get(event.kind)
            if handler is None:
                raise ContractViolation(f"no handler for {event.kind.value}")
            handler(event)
            n += 1
        self.now_us = t_end_us
        self.dispatched += n
        return n


_MASK64 = (1 << 64) - 1


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RngStream:
    """A named, independently seeded numpy Generator."""

    label: str
    seed: int
    rng: np.random.Generator = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.rng is None:
            ss = np.random.SeedSequence([self.seed & _MASK64, _label_entropy(self.label)])
            self.rng = np.random.Generator(np.random.PCG64(ss))


def make_stream(label: str, seed: int) -> RngStream:
    """Derive an independent stream for one purpose (channel, traffic, ...).

    Streams with the same (label, seed) are identical; distinct labels never
    collide because the label enters the seed material, so adding a new
    purpose later cannot shift existing streams.
    """
    return RngStream(label=label, seed=seed)


def derive_seed(master_seed: int, *tokens: int | str) -> int:
    """Stable 64-bit child seed from a master seed and a token path.

    Used for per-episode seeds keyed by (phase, episode index) so that the
    test phase sees the same channels regardless of how long training ran.
    """
    entropy: list[int] = [master_seed & _MASK64]
    for tok in tokens:
        if isinstance(tok, str):
            entropy.append(_label_entropy(tok))
        else:
            entropy.append(int(tok) & _MASK64)
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, np.uint64)[0])
