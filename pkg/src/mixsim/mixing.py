"""Mix-node behavior: capacity-limited service, mixing disciplines, mass propagation.

A node is a deterministic single server (1/capacity seconds per packet) in
front of a mixing stage. The mixing stage is either a threshold batch or a
memoryless pool; every departure moves adversary probability mass by the
uniform-pool rule (a departure carries total/n, the pool keeps the rest).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .engine import (NS_PER_S, ConfigurationError, RngStream, SimulationLogicError,
                     sample_exponential, sample_poisson_interarrival)

REAL = "real"
COVER = "cover"
TARGET = "target"


@dataclass
class Packet:
    pid: int
    kind: str
    route: object                 # topology.Route
    created_at: int
    size_bytes: int = 0
    sender_tag: Optional[str] = None   # "A"/"B" in unlinkability rounds
    hop_index: int = -1                # index of the hop the packet is at; -1 before injection
    delivered_at: Optional[int] = None
    target_mass: float = 0.0
    mass_a: float = 0.0
    mass_b: float = 0.0


@dataclass(frozen=True)
class ThresholdBatch:
    batch_size: int
    timeout_s: Optional[float] = None   # off by default; partial flushes are an exploration knob

    name = "threshold_batch"

    def validate(self):
        if self.batch_size <= 0:
            raise ConfigurationError("strategy.batch_size", "must be a positive integer")
        if self.timeout_s is not None and self.timeout_s <= 0:
            raise ConfigurationError("strategy.timeout_s", "must be > 0 when set")


@dataclass(frozen=True)
class PoissonPool:
    mean_delay_s: float

    name = "poisson_pool"

    def validate(self):
        if self.mean_delay_s <= 0:
            raise ConfigurationError("strategy.mean_delay_s", "must be > 0")


@dataclass(frozen=True)
class RandomPickQueue:
    pick_rate_per_s: Optional[float] = None   # None -> node capacity

    name = "random_pick_queue"

    def validate(self):
        if self.pick_rate_per_s is not None and self.pick_rate_per_s <= 0:
            raise ConfigurationError("strategy.pick_rate_per_s", "must be > 0 when set")


class UniformPool:
    """Multiset of packets whose adversary masses stay uniform by exchangeability.

    Only the totals are tracked while packets sit in the pool; a departing
    packet takes total/n of every mass kind and the pool keeps the remainder,
    still uniform over the survivors.
    """

    def __init__(self):
        self.packets: list = []
        self.total_target = 0.0
        self.total_a = 0.0
        self.total_b = 0.0

    def __len__(self) -> int:
        return len(self.packets)

    def admit(self, packet: Packet) -> None:
        self.packets.append(packet)
        self.total_target += packet.target_mass
        self.total_a += packet.mass_a
        self.total_b += packet.mass_b

    def uniform_share(self) -> float:
        return self.total_target / len(self.packets) if self.packets else 0.0

    def depart(self, packet: Optional[Packet] = None,
               stream: Optional[RngStream] = None) -> Packet:
        """Remove and return one packet, applying the total/n mass rule.

        With packet=None a uniformly random resident is picked (random-pick
        discipline); otherwise the given resident leaves (its exponential
        clock fired). Both cases carry the same uniform share.
        """
        n = len(self.packets)
        if n == 0:
            raise SimulationLogicError("departure from an empty pool")
        if packet is None:
            idx = stream.randrange(n)
            packet = self.packets[idx]
            self.packets[idx] = self.packets[-1]
            self.packets.pop()
        else:
            self.packets.remove(packet)
        share_t = self.total_target / n
        share_a = self.total_a / n
        share_b = self.total_b / n
        packet.target_mass = share_t
        packet.mass_a = share_a
        packet.mass_b = share_b
        self.total_target -= share_t
        self.total_a -= share_a
        self.total_b -= share_b
        if not self.packets:
            self.total_target = 0.0
            self.total_a = 0.0
            self.total_b = 0.0
        return packet

    def zero_sender_masses(self) -> None:
        self.total_a = 0.0
        self.total_b = 0.0


def average_batch_masses(batch: list) -> None:
    """Uniformly shuffled flush: every output carries the batch-average masses."""
    n = len(batch)
    if n == 0:
        return
    avg_t = sum(p.target_mass for p in batch) / n
    avg_a = sum(p.mass_a for p in batch) / n
    avg_b = sum(p.mass_b for p in batch) / n
    for p in batch:
        p.target_mass = avg_t
        p.mass_a = avg_a
        p.mass_b = avg_b


class MixNode:
    """Capacity-limited mix: FIFO deterministic server feeding a mixing stage."""

    def __init__(self, node_id: str, strategy, capacity_per_s: float, stream: RngStream):
        if capacity_per_s <= 0:
            raise ConfigurationError("run.capacity_per_s", "must be > 0")
        strategy.validate()
        self.id = node_id
        self.strategy = strategy
        self.capacity_per_s = capacity_per_s
        self.service_ticks = max(1, int(NS_PER_S / capacity_per_s + 0.5))
        self.stream = stream
        self.busy_until = 0
        self.service_queue: deque = deque()
        self.pool = UniformPool()
        self.batch: list = []
        self._pick_scheduled = False
        self._batch_generation = 0
        if isinstance(strategy, RandomPickQueue):
            self.pick_rate = strategy.pick_rate_per_s or capacity_per_s
        else:
            self.pick_rate = None

    def queue_len(self) -> int:
        return len(self.service_queue)

    def on_arrival(self, packet: Packet, sim) -> None:
        """Enqueue for service; completion waits behind all queued predecessors."""
        done = max(sim.now, self.busy_until) + self.service_ticks
        self.busy_until = done
        self.service_queue.append(packet)
        sim.schedule(done, _ServiceDone(self))

    def service_done(self, sim) -> None:
        packet = self.service_queue.popleft()
        self.pool_admit(packet, sim)

    def pool_admit(self, packet: Packet, sim) -> None:
        strategy = self.strategy
        if isinstance(strategy, ThresholdBatch):
            self.batch.append(packet)
            if len(self.batch) >= strategy.batch_size:
                self._batch_generation += 1
                sim.schedule(sim.now, _BatchFlush(self, full=True))
            elif strategy.timeout_s is not None and len(self.batch) == 1:
                sim.schedule(sim.now + int(strategy.timeout_s * NS_PER_S + 0.5),
                             _BatchFlush(self, full=False, generation=self._batch_generation))
        elif isinstance(strategy, PoissonPool):
            self.pool.admit(packet)
            delay = sample_exponential(self.stream, strategy.mean_delay_s)
            sim.schedule(sim.now + delay, _PoolDeparture(self, packet))
        else:
            self.pool.admit(packet)
            self._ensure_pick(sim)

    def _ensure_pick(self, sim) -> None:
        if not self._pick_scheduled and len(self.pool):
            gap = sample_poisson_interarrival(self.stream, self.pick_rate)
            sim.schedule(sim.now + gap, _PoolDeparture(self, None))
            self._pick_scheduled = True

    def pool_depart(self, packet: Optional[Packet], sim) -> None:
        if packet is None:
            self._pick_scheduled = False
        departing = self.pool.depart(packet, self.stream)
        sim.forward(departing)
        if packet is None:
            self._ensure_pick(sim)

    def batch_flush(self, sim, full: bool, generation: int = -1) -> None:
        if not full:
            # timeout flush: stale if a threshold flush already drained this buffer
            if generation != self._batch_generation or not self.batch:
                return
            self._batch_generation += 1
        batch = self.batch
        self.batch = []
        average_batch_masses(batch)
        self.stream.shuffle(batch)
        for p in batch:
            sim.forward(p)

    def live_mass(self) -> float:
        """Target mass currently held by this node (service queue, buffer, pool)."""
        mass = sum(p.target_mass for p in self.service_queue)
        mass += sum(p.target_mass for p in self.batch)
        mass += self.pool.total_target
        return mass

    def live_packets(self):
        yield from self.service_queue
        yield from self.batch
        yield from self.pool.packets


@dataclass(frozen=True)
class _ServiceDone:
    node: MixNode

    def process(self, sim):
        self.node.service_done(sim)


@dataclass(frozen=True)
class _PoolDeparture:
    node: MixNode
    packet: Optional[Packet]

    def process(self, sim):
        self.node.pool_depart(self.packet, sim)


@dataclass(frozen=True)
class _BatchFlush:
    node: MixNode
    full: bool
    generation: int = -1

    def process(self, sim):
        self.node.batch_flush(sim, self.full, self.generation)
