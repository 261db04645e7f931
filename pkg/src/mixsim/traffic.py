"""Client sending behavior, message fragmentation, and cover traffic generation."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import ConfigurationError, sample_poisson_interarrival
from .scenario import COVER_CLIENTS, COVER_NODES, FIXED_PAIRS


def fragment_count(message_size_bytes: int, packet_payload_bytes: int) -> int:
    """Number of packets a message splits into (each routed independently)."""
    if packet_payload_bytes <= 0:
        raise ConfigurationError("clients.packet_payload_bytes", "must be > 0")
    if message_size_bytes <= 0:
        raise ConfigurationError("clients.message_size_bytes", "must be > 0")
    return math.ceil(message_size_bytes / packet_payload_bytes)


def fragment_sizes(message_size_bytes: int, packet_payload_bytes: int) -> list:
    n = fragment_count(message_size_bytes, packet_payload_bytes)
    sizes = [packet_payload_bytes] * (n - 1)
    sizes.append(message_size_bytes - packet_payload_bytes * (n - 1))
    return sizes


class ClientProcess:
    """One sender emitting messages as a Poisson process.

    Each message epoch fragments into packets that are injected immediately,
    every fragment on a freshly sampled route.
    """

    def __init__(self, index: int, sim):
        self.index = index
        self.sim = sim
        cfg = sim.scenario.clients
        self.rate = cfg.send_rate_per_s
        self.send_stream = sim.stream(f"client/{index}/send")
        self.route_stream = sim.stream(f"client/{index}/route")
        self.recv_stream = sim.stream(f"client/{index}/recv")

    def start(self) -> None:
        gap = sample_poisson_interarrival(self.send_stream, self.rate)
        self.sim.schedule_in(gap, _ClientSend(self))

    def pick_receiver(self) -> str:
        sim = self.sim
        n = sim.scenario.clients.num_clients
        if n == 1 or sim.scenario.clients.receiver_selection == FIXED_PAIRS:
            peer = (self.index + 1) % n
        else:
            peer = self.recv_stream.randrange(n - 1)
            if peer >= self.index:
                peer += 1
        return sim.receiver_endpoint(peer)

    def on_send(self) -> None:
        sim = self.sim
        receiver = self.pick_receiver()
        cfg = sim.scenario.clients
        for size in fragment_sizes(cfg.message_size_bytes, cfg.packet_payload_bytes):
            sim.inject_real(self.index, receiver, size, self.route_stream)
        gap = sample_poisson_interarrival(self.send_stream, self.rate)
        self.sim.schedule_in(gap, _ClientSend(self))


class CoverProcess:
    """Cover generation by one origin entity (a client or a mix node).

    Cover packets are pool-indistinguishable from real ones but carry zero
    target mass and head for a designated sink.
    """

    def __init__(self, origin_kind: str, origin_id, sim):
        self.origin_kind = origin_kind
        self.origin_id = origin_id
        self.sim = sim
        self.rate = sim.scenario.cover.rate_per_origin_per_s
        self.stream = sim.stream(f"cover/{origin_kind}/{origin_id}")

    def start(self) -> None:
        if self.rate <= 0:
            return
        gap = sample_poisson_interarrival(self.stream, self.rate)
        self.sim.schedule_in(gap, _CoverSend(self))

    def on_send(self) -> None:
        sim = self.sim
        if self.origin_kind == COVER_CLIENTS:
            sim.inject_cover_from_client(self.origin_id, self.stream)
        else:
            sim.inject_cover_from_node(self.origin_id, self.stream)
        gap = sample_poisson_interarrival(self.stream, self.rate)
        sim.schedule_in(gap, _CoverSend(self))


@dataclass(frozen=True)
class _ClientSend:
    client: ClientProcess

    def process(self, sim):
        self.client.on_send()


@dataclass(frozen=True)
class _CoverSend:
    cover: CoverProcess

    def process(self, sim):
        self.cover.on_send()


def build_cover_processes(sim) -> list:
    cover = sim.scenario.cover
    if cover.origin == COVER_CLIENTS and cover.rate_per_origin_per_s > 0:
        return [CoverProcess(COVER_CLIENTS, i, sim)
                for i in range(sim.scenario.clients.num_clients)]
    if cover.origin == COVER_NODES and cover.rate_per_origin_per_s > 0:
        return [CoverProcess(COVER_NODES, node_id, sim) for node_id in sim.topology.node_ids]
    return []
