"""Discrete-event core: integer-nanosecond clock, ordered event queue, seeded streams.

All simulation time is kept in integer nanoseconds so that event ordering is
exact and runs are bit-reproducible across platforms. Seconds appear only at
the configuration and reporting boundaries.
"""

from __future__ import annotations

import hashlib
import heapq
import random

NS_PER_S = 1_000_000_000


class ConfigurationError(Exception):
    """Bad scenario configuration. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SimulationLogicError(Exception):
    """Internal contract violation (e.g. scheduling into the past). Aborts the run."""


def to_ticks(seconds: float) -> int:
    """Convert seconds to integer nanosecond ticks, rounding half-up."""
    if seconds < 0:
        raise SimulationLogicError(f"negative duration: {seconds}")
    return int(seconds * NS_PER_S + 0.5)


def to_seconds(ticks: int) -> float:
    return ticks / NS_PER_S


def _derive_seed(master_seed: int, stream_id: str) -> int:
    material = f"{master_seed}:{stream_id}".encode()
    return int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")


class RngStream:
    """Independent random stream for one stochastic consumer.

    Derived by hashing (master seed, stream label), so adding or re-ordering
    other consumers never perturbs this stream's draws.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        self._rng = random.Random(_derive_seed(seed, stream_id))

    def random(self) -> float:
        return self._rng.random()

    def expovariate(self, rate: float) -> float:
        return self._rng.expovariate(rate)

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def shuffle(self, seq: list) -> None:
        self._rng.shuffle(seq)

    def sample(self, population, k: int) -> list:
        return self._rng.sample(population, k)

    def choice(self, seq):
        return self._rng.choice(seq)


def sample_exponential(stream: RngStream, mean_s: float) -> int:
    """Draw an Exp(1/mean_s) delay and return it as ticks."""
    if mean_s <= 0:
        raise ConfigurationError("mean_s", f"exponential mean must be > 0, got {mean_s}")
    return to_ticks(stream.expovariate(1.0 / mean_s))


def sample_poisson_interarrival(stream: RngStream, rate_per_s: float) -> int:
    """Draw the next gap of a Poisson process with the given rate, in ticks."""
    if rate_per_s <= 0:
        raise ConfigurationError("rate_per_s", f"Poisson rate must be > 0, got {rate_per_s}")
    return to_ticks(stream.expovariate(rate_per_s))


class Simulation:
    """Sequential event dispatcher.

    Events are (fire_at, seq, payload) tuples ordered by time then insertion;
    payloads implement process(sim). Subclasses hold the scenario state.
    """

    def __init__(self, master_seed: int = 0):
        self.master_seed = master_seed
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self._stopped = False
        self._streams: dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        st = self._streams.get(stream_id)
        if st is None:
            st = RngStream(self.master_seed, stream_id)
            self._streams[stream_id] = st
        return st

    def schedule(self, fire_at: int, payload) -> None:
        if fire_at < self.now:
            raise SimulationLogicError(
                f"schedule into the past: fire_at={fire_at} < clock={self.now}"
            )
        heapq.heappush(self._heap, (fire_at, self._seq, payload))
        self._seq += 1

    def schedule_in(self, delay_ticks: int, payload) -> None:
        self.schedule(self.now + delay_ticks, payload)

    def stop(self) -> None:
        self._stopped = True

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, end_ticks: int) -> int:
        """Dispatch every event with fire_at <= end_ticks; returns the final clock.

        The clock only advances through dispatched events, so an empty queue
        returns immediately with the clock unchanged.
        """
        heap = self._heap
        while heap and not self._stopped and heap[0][0] <= end_ticks:
            fire_at, _, payload = heapq.heappop(heap)
            self.now = fire_at
            payload.process(self)
        return self.now
