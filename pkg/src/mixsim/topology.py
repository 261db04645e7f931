"""Node graphs for the four topology families and per-packet route sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .engine import ConfigurationError, RngStream

CASCADE = "cascade"
MULTI_CASCADE = "multi_cascade"
STRATIFIED = "stratified"
P2P = "p2p"

FAMILIES = (CASCADE, MULTI_CASCADE, STRATIFIED, P2P)


@dataclass(frozen=True)
class TopologyConfig:
    family: str
    total_nodes: Optional[int] = None          # cascade, p2p
    num_cascades: Optional[int] = None         # multi_cascade
    cascade_length: Optional[int] = None       # multi_cascade
    num_layers: Optional[int] = None           # stratified
    nodes_per_layer: Optional[int] = None      # stratified
    route_length: Optional[int] = None         # p2p
    auto_grow_cascades: bool = False           # multi_cascade provisioning escape hatch

    def validate(self) -> None:
        def need(name: str):
            value = getattr(self, name)
            if value is None or value <= 0:
                raise ConfigurationError(f"topology.{name}",
                                         f"required positive integer for family '{self.family}'")
            return value

        if self.family == CASCADE:
            need("total_nodes")
        elif self.family == MULTI_CASCADE:
            need("num_cascades")
            need("cascade_length")
        elif self.family == STRATIFIED:
            need("num_layers")
            need("nodes_per_layer")
        elif self.family == P2P:
            need("total_nodes")
            rl = need("route_length")
            if rl >= self.total_nodes:
                raise ConfigurationError("topology.route_length",
                                         f"route_length {rl} must be < total_nodes {self.total_nodes}")
        else:
            raise ConfigurationError("topology.family",
                                     f"unknown family '{self.family}', expected one of {FAMILIES}")


@dataclass(frozen=True)
class Route:
    hops: tuple
    sender: str
    receiver: str

    def __post_init__(self):
        if len(set(self.hops)) != len(self.hops):
            raise SimulationRouteError(f"repeated node in route {self.hops}")


class SimulationRouteError(Exception):
    pass


@dataclass
class Topology:
    family: str
    node_ids: list = field(default_factory=list)
    cascades: list = field(default_factory=list)   # list of chains (cascade has exactly one)
    layers: list = field(default_factory=list)     # stratified
    peers: list = field(default_factory=list)      # p2p relay ids == peer ids
    route_length: int = 0

    def successors(self, node_id: str) -> list:
        """Admissible next hops after node_id (empty at an exit position)."""
        if self.family in (CASCADE, MULTI_CASCADE):
            for chain in self.cascades:
                if node_id in chain:
                    i = chain.index(node_id)
                    return chain[i + 1:i + 2]
            return []
        if self.family == STRATIFIED:
            for li, layer in enumerate(self.layers):
                if node_id in layer:
                    return list(self.layers[li + 1]) if li + 1 < len(self.layers) else []
            return []
        # p2p: any other peer is admissible
        return [p for p in self.peers if p != node_id]

    def edge_count(self) -> int:
        return sum(len(self.successors(n)) for n in self.node_ids)

    def layer_of(self, node_id: str) -> int:
        for li, layer in enumerate(self.layers):
            if node_id in layer:
                return li
        raise KeyError(node_id)


def build(config: TopologyConfig) -> Topology:
    """Materialize the node set and successor relation for one topology family."""
    config.validate()
    if config.family == CASCADE:
        chain = [f"n{i}" for i in range(config.total_nodes)]
        return Topology(family=CASCADE, node_ids=list(chain), cascades=[chain])
    if config.family == MULTI_CASCADE:
        cascades = [[f"c{k}n{i}" for i in range(config.cascade_length)]
                    for k in range(config.num_cascades)]
        nodes = [n for chain in cascades for n in chain]
        return Topology(family=MULTI_CASCADE, node_ids=nodes, cascades=cascades)
    if config.family == STRATIFIED:
        layers = [[f"l{li}n{i}" for i in range(config.nodes_per_layer)]
                  for li in range(config.num_layers)]
        nodes = [n for layer in layers for n in layer]
        return Topology(family=STRATIFIED, node_ids=nodes, layers=layers)
    peers = [f"p{i}" for i in range(config.total_nodes)]
    return Topology(family=P2P, node_ids=list(peers), peers=peers,
                    route_length=config.route_length)


def sample_route(topology: Topology, sender: str, receiver: str,
                 stream: RngStream, cascade_index: int = 0) -> Route:
    """Sample one packet's path through the mix nodes.

    Cascade families use the (assigned) chain verbatim; stratified picks one
    node per layer uniformly; p2p picks route_length distinct relays excluding
    the sender and (when it is a peer) the receiver.
    """
    if sender == receiver:
        raise SimulationRouteError(f"sender and receiver coincide: {sender}")
    if topology.family in (CASCADE, MULTI_CASCADE):
        return Route(hops=tuple(topology.cascades[cascade_index]),
                     sender=sender, receiver=receiver)
    if topology.family == STRATIFIED:
        hops = tuple(layer[stream.randrange(len(layer))] for layer in topology.layers)
        return Route(hops=hops, sender=sender, receiver=receiver)
    candidates = [p for p in topology.peers if p != sender and p != receiver]
    if len(candidates) < topology.route_length:
        raise ConfigurationError(
            "topology.route_length",
            f"p2p network too small: {len(candidates)} eligible relays "
            f"for route_length {topology.route_length}")
    return Route(hops=tuple(stream.sample(candidates, topology.route_length)),
                 sender=sender, receiver=receiver)


def node_cover_route(topology: Topology, node_id: str, stream: RngStream) -> Route:
    """Route for node-origin cover: starts at the node itself, then the remaining hops."""
    if topology.family in (CASCADE, MULTI_CASCADE):
        for chain in topology.cascades:
            if node_id in chain:
                i = chain.index(node_id)
                return Route(hops=tuple(chain[i:]), sender=node_id, receiver="cover-sink")
        raise KeyError(node_id)
    if topology.family == STRATIFIED:
        li = topology.layer_of(node_id)
        hops = [node_id]
        for layer in topology.layers[li + 1:]:
            hops.append(layer[stream.randrange(len(layer))])
        return Route(hops=tuple(hops), sender=node_id, receiver="cover-sink")
    candidates = [p for p in topology.peers if p != node_id]
    if len(candidates) < topology.route_length - 1:
        raise ConfigurationError("topology.route_length", "p2p network too small for node cover")
    hops = [node_id] + stream.sample(candidates, topology.route_length - 1)
    return Route(hops=tuple(hops), sender=node_id, receiver="cover-sink")


def assign_cascades(client_rates: list, node_capacity_per_s: float,
                    num_cascades: int, auto_grow: bool = False) -> list:
    """Pack clients onto parallel cascades in index order.

    A cascade is full once the sum of its assigned client rates reaches the
    node capacity; the next client then opens the next cascade. Raises when
    demand exceeds the provisioned cascades unless auto_grow is set.
    """
    if node_capacity_per_s <= 0:
        raise ConfigurationError("run.capacity_per_s", "capacity must be > 0")
    assignments = []
    cascade = 0
    load = 0.0
    for rate in client_rates:
        if rate > node_capacity_per_s:
            raise ConfigurationError("clients.send_rate_per_s",
                                     f"single client rate {rate} exceeds cascade capacity")
        if load + rate > node_capacity_per_s + 1e-9:
            cascade += 1
            load = 0.0
        assignments.append(cascade)
        load += rate
    used = cascade + 1 if assignments else 0
    if used > num_cascades and not auto_grow:
        total = sum(client_rates)
        raise ConfigurationError(
            "topology.num_cascades",
            f"offered load {total}/s needs {used} cascades "
            f"(capacity {node_capacity_per_s}/s each) but only {num_cascades} provisioned; "
            f"set auto_grow_cascades to allow growth")
    return assignments


def cascades_needed(total_rate_per_s: float, node_capacity_per_s: float) -> int:
    return int(math.ceil(total_rate_per_s / node_capacity_per_s)) if total_rate_per_s > 0 else 0
