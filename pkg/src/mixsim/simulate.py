"""Single-run assembly: builds a scenario into a live simulation and executes it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import topology as topo
from .engine import Simulation, to_ticks
from .metrics import MetricsLedger, make_sample
from .mixing import COVER, REAL, TARGET, MixNode, Packet
from .scenario import (METRIC_ENTROPY, METRIC_UNLINKABILITY, Scenario)
from .traffic import ClientProcess, build_cover_processes


class MixnetSimulation(Simulation):
    """One seeded, single-threaded simulation of a configured mix network."""

    def __init__(self, scenario: Scenario, seed: int):
        super().__init__(master_seed=seed)
        self.scenario = scenario
        self.seed = seed
        self.topology = topo.build(scenario.topology)
        self.ledger = MetricsLedger()
        self.live: dict[int, Packet] = {}
        self._next_pid = 0

        capacity = scenario.run.capacity_per_s
        self.nodes = {
            node_id: MixNode(node_id, scenario.strategy, capacity,
                             self.stream(f"node/{node_id}/mix"))
            for node_id in self.topology.node_ids
        }

        self.cascade_assignment = None
        if scenario.topology.family == topo.MULTI_CASCADE:
            rates = [scenario.clients.send_rate_per_s] * scenario.clients.num_clients
            self.cascade_assignment = topo.assign_cascades(
                rates, capacity, scenario.topology.num_cascades,
                scenario.topology.auto_grow_cascades)
            used = max(self.cascade_assignment) + 1 if self.cascade_assignment else 0
            if used > scenario.topology.num_cascades:
                grown = topo.TopologyConfig(
                    family=topo.MULTI_CASCADE, num_cascades=used,
                    cascade_length=scenario.topology.cascade_length)
                self.topology = topo.build(grown)
                self.nodes = {
                    node_id: MixNode(node_id, scenario.strategy, capacity,
                                     self.stream(f"node/{node_id}/mix"))
                    for node_id in self.topology.node_ids
                }

        self.clients = [ClientProcess(i, self) for i in range(scenario.clients.num_clients)]
        self.covers = build_cover_processes(self)

        # metric bookkeeping
        self._entropy_target_injected = False
        self._entropy_finalized = False
        self._round_index = -1
        self._round_target_pid: Optional[int] = None
        self._round_sampled = False

    # -- identifiers ------------------------------------------------------

    def client_sender_id(self, client_index: int) -> str:
        if self.topology.family == topo.P2P:
            return self.topology.peers[client_index]
        return f"u{client_index}"

    def receiver_endpoint(self, client_index: int) -> str:
        if self.topology.family == topo.P2P:
            return self.topology.peers[client_index]
        return f"sink{client_index}"

    # -- packet injection --------------------------------------------------

    def _new_pid(self) -> int:
        pid = self._next_pid
        self._next_pid += 1
        return pid

    def _sample_client_route(self, client_index: int, receiver: str, route_stream):
        cascade_index = 0
        if self.cascade_assignment is not None:
            cascade_index = self.cascade_assignment[client_index]
        return topo.sample_route(self.topology, self.client_sender_id(client_index),
                                 receiver, route_stream, cascade_index)

    def _round_sender_masses(self, client_index: int) -> tuple:
        """Sender hypothesis masses for packets sent during an unlinkability round."""
        run = self.scenario.run
        if run.metric != METRIC_UNLINKABILITY or self._round_index < 0:
            return 0.0, 0.0
        u = run.unlinkability
        if client_index == u.sender_a:
            return 1.0, 0.0
        if client_index == u.sender_b:
            return 0.0, 1.0
        return 0.0, 0.0

    def inject_real(self, client_index: int, receiver: str, size_bytes: int,
                    route_stream) -> Packet:
        route = self._sample_client_route(client_index, receiver, route_stream)
        mass_a, mass_b = self._round_sender_masses(client_index)
        packet = Packet(pid=self._new_pid(), kind=REAL, route=route, created_at=self.now,
                        size_bytes=size_bytes, mass_a=mass_a, mass_b=mass_b)
        self.ledger.packets_real += 1
        self._inject(packet)
        return packet

    def inject_cover_from_client(self, client_index: int, stream) -> Packet:
        route = self._sample_client_route(client_index, "cover-sink", stream)
        packet = Packet(pid=self._new_pid(), kind=COVER, route=route, created_at=self.now,
                        size_bytes=self.scenario.clients.packet_payload_bytes)
        self.ledger.packets_cover += 1
        self._inject(packet)
        return packet

    def inject_cover_from_node(self, node_id: str, stream) -> Packet:
        route = topo.node_cover_route(self.topology, node_id, stream)
        packet = Packet(pid=self._new_pid(), kind=COVER, route=route, created_at=self.now,
                        size_bytes=self.scenario.clients.packet_payload_bytes)
        self.ledger.packets_cover += 1
        self._inject(packet)
        return packet

    def inject_target(self, client_index: int, receiver: str, target_mass: float) -> Packet:
        route = self._sample_client_route(client_index, receiver, self.stream("target/route"))
        mass_a, mass_b = self._round_sender_masses(client_index)
        packet = Packet(pid=self._new_pid(), kind=TARGET, route=route, created_at=self.now,
                        size_bytes=self.scenario.clients.packet_payload_bytes,
                        target_mass=target_mass, mass_a=mass_a, mass_b=mass_b)
        self.ledger.packets_real += 1
        self._inject(packet)
        return packet

    def _inject(self, packet: Packet) -> None:
        packet.hop_index = 0
        self.live[packet.pid] = packet
        self.nodes[packet.route.hops[0]].on_arrival(packet, self)

    # -- movement ----------------------------------------------------------

    def forward(self, packet: Packet) -> None:
        packet.hop_index += 1
        if packet.hop_index >= len(packet.route.hops):
            self._deliver(packet)
        else:
            self.nodes[packet.route.hops[packet.hop_index]].on_arrival(packet, self)

    def _deliver(self, packet: Packet) -> None:
        packet.delivered_at = self.now
        self.live.pop(packet.pid, None)
        if packet.kind != COVER:
            self.ledger.record_latency(packet.created_at, packet.delivered_at)
        self.ledger.record_delivery_mass(packet.pid, packet.target_mass)

        run = self.scenario.run
        if run.metric == METRIC_UNLINKABILITY and packet.pid == self._round_target_pid:
            self.ledger.unlink_samples.append(
                make_sample(packet.mass_a, packet.mass_b, self._round_index,
                            floor=run.mass_floor))
            self._round_sampled = True
            self._round_target_pid = None
        elif (run.metric == METRIC_ENTROPY and self._entropy_target_injected
              and not self._entropy_finalized
              and 1.0 - self.ledger.delivered_mass_total < run.residual_cutoff):
            self._finalize_entropy()
            self.stop()

    # -- residual mass -----------------------------------------------------

    def residual_mass(self) -> float:
        """Target mass still inside the network, swept from live node state."""
        return sum(node.live_mass() for node in self.nodes.values())

    def _finalize_entropy(self) -> None:
        self.ledger.residual_mass = self.residual_mass()
        self.ledger.finalize_entropy(self.ledger.residual_mass,
                                     self.scenario.run.residual_cutoff)
        self._entropy_finalized = True

    # -- unlinkability rounds ------------------------------------------------

    def _zero_sender_masses(self) -> None:
        for packet in self.live.values():
            packet.mass_a = 0.0
            packet.mass_b = 0.0
        for node in self.nodes.values():
            node.pool.zero_sender_masses()

    def start_round(self, index: int) -> None:
        u = self.scenario.run.unlinkability
        if self._round_index >= 0 and not self._round_sampled:
            self.ledger.censored_rounds += 1
        self._round_sampled = True   # previous round is closed either way
        self._round_target_pid = None
        if index >= u.rounds:
            self.stop()
            return
        self._round_index = index
        self._round_sampled = False
        self._zero_sender_masses()
        coin = self.stream("unlink/coin").random() < 0.5
        sender = u.sender_a if coin else u.sender_b
        receiver_index = min(set(range(self.scenario.clients.num_clients))
                             - {u.sender_a, u.sender_b})
        self.schedule(self.now + to_ticks(u.target_offset_s),
                      _InjectRoundTarget(index, sender, receiver_index))

    def inject_round_target(self, index: int, sender: int, receiver_index: int) -> None:
        if index != self._round_index:
            return   # stale: the round already closed
        target = self.inject_target(sender, self.receiver_endpoint(receiver_index),
                                    target_mass=0.0)
        self._round_target_pid = target.pid

    # -- orchestration -------------------------------------------------------

    def setup(self) -> None:
        for client in self.clients:
            client.start()
        for cover in self.covers:
            cover.start()
        run = self.scenario.run
        warmup = to_ticks(run.warmup_s)
        if run.metric == METRIC_ENTROPY:
            self.schedule(warmup, _InjectEntropyTarget())
        elif run.metric == METRIC_UNLINKABILITY:
            period = to_ticks(run.unlinkability.round_period_s)
            for k in range(run.unlinkability.rounds + 1):
                self.schedule(warmup + k * period, _RoundBoundary(k))

    def execute(self) -> MetricsLedger:
        self.setup()
        self.run_until(to_ticks(self.scenario.run.horizon_s))
        run = self.scenario.run
        if run.metric == METRIC_ENTROPY and not self._entropy_finalized:
            self._finalize_entropy()
        elif run.metric == METRIC_UNLINKABILITY:
            if self._round_index >= 0 and not self._round_sampled:
                self.ledger.censored_rounds += 1
                self._round_sampled = True
            self.ledger.residual_mass = self.residual_mass()
        else:
            self.ledger.residual_mass = self.residual_mass()
        return self.ledger


@dataclass(frozen=True)
class _InjectEntropyTarget:
    def process(self, sim: MixnetSimulation):
        receiver = sim.receiver_endpoint(1 % sim.scenario.clients.num_clients)
        sim.inject_target(0, receiver, target_mass=1.0)
        sim._entropy_target_injected = True


@dataclass(frozen=True)
class _RoundBoundary:
    index: int

    def process(self, sim: MixnetSimulation):
        sim.start_round(self.index)


@dataclass(frozen=True)
class _InjectRoundTarget:
    index: int
    sender: int
    receiver_index: int

    def process(self, sim: MixnetSimulation):
        sim.inject_round_target(self.index, self.sender, self.receiver_index)


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    ledger: MetricsLedger
    num_cascades_used: int = 0


def run_single(scenario: Scenario, seed: int) -> RunResult:
    sim = MixnetSimulation(scenario, seed)
    ledger = sim.execute()
    used = 0
    if sim.cascade_assignment is not None and sim.cascade_assignment:
        used = max(sim.cascade_assignment) + 1
    return RunResult(scenario=scenario, seed=seed, ledger=ledger, num_cascades_used=used)
