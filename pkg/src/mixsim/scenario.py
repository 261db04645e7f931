"""Scenario configuration: JSON schema, strict validation, desk/paper profiles.

Unknown keys are hard errors everywhere; a silently ignored typo would
invalidate an experiment.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Optional

from . import topology as topo
from .engine import ConfigurationError
from .mixing import PoissonPool, RandomPickQueue, ThresholdBatch

METRIC_ENTROPY = "entropy"
METRIC_UNLINKABILITY = "unlinkability"
METRIC_LATENCY = "latency_only"
METRICS = (METRIC_ENTROPY, METRIC_UNLINKABILITY, METRIC_LATENCY)

FIXED_PAIRS = "fixed_pairs"
UNIFORM_RANDOM = "uniform_random"

COVER_CLIENTS = "clients"
COVER_NODES = "nodes"
COVER_OFF = "off"

# Profiles supply defaults for the knobs that set the experiment scale. The
# paper-scale profile is provided for completeness but is slow; desk scale
# keeps full sweeps in the minutes range.
PROFILES = {
    "desk": {"capacity_per_s": 100.0, "batch_size": 100,
             "mean_delay_s": 0.1, "send_rate_per_s": 1.0},
    "paper": {"capacity_per_s": 1000.0, "batch_size": 1000,
              "mean_delay_s": 0.1, "send_rate_per_s": 1.0},
}


@dataclass(frozen=True)
class ClientConfig:
    num_clients: int
    send_rate_per_s: float
    message_size_bytes: int = 1024
    packet_payload_bytes: int = 1024
    receiver_selection: str = FIXED_PAIRS


@dataclass(frozen=True)
class CoverConfig:
    origin: str = COVER_OFF
    rate_per_origin_per_s: float = 0.0


@dataclass(frozen=True)
class UnlinkabilityConfig:
    rounds: int = 100
    round_period_s: float = 2.0
    target_offset_s: float = 0.5     # target departs this long after the round opens,
                                     # once both senders' round traffic is in the pools
    compose_rounds: int = 1          # R in the composed advantage R * eps_hat
    delta_threshold_nats: float = 0.0
    sender_a: int = 0                # client indices of the two candidate senders
    sender_b: int = 1


@dataclass(frozen=True)
class RunConfig:
    horizon_s: float
    warmup_s: float
    seeds: tuple
    metric: str
    capacity_per_s: float
    residual_cutoff: float = 1e-3
    mass_floor: float = 1e-9
    unlinkability: Optional[UnlinkabilityConfig] = None


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    topology: topo.TopologyConfig
    strategy: object
    clients: ClientConfig
    cover: CoverConfig
    run: RunConfig

    @property
    def strategy_name(self) -> str:
        return self.strategy.name


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigurationError(f"{path}.{key}", "required field missing")
    return section[key]


def _check_keys(section: dict, allowed: set, path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(f"{path}.{sorted(unknown)[0]}", "unknown key")


def _pos_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ConfigurationError(path, f"expected positive integer, got {value!r}")
    return value

def _nonneg_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ConfigurationError(path, f"expected non-negative integer, got {value!r}")
    return value


def _pos_real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ConfigurationError(path, f"expected positive number, got {value!r}")
    return float(value)


def _nonneg_real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        raise ConfigurationError(path, f"expected non-negative number, got {value!r}")
    return float(value)


def _parse_topology(section: dict, num_clients: int) -> topo.TopologyConfig:
    family = _require(section, "family", "topology")
    if family not in topo.FAMILIES:
        raise ConfigurationError("topology.family",
                                 f"unknown family {family!r}, expected one of {topo.FAMILIES}")
    allowed_by_family = {
        topo.CASCADE: {"family", "total_nodes"},
        topo.MULTI_CASCADE: {"family", "num_cascades", "cascade_length", "auto_grow_cascades"},
        topo.STRATIFIED: {"family", "num_layers", "nodes_per_layer"},
        topo.P2P: {"family", "total_nodes", "route_length"},
    }
    _check_keys(section, allowed_by_family[family], "topology")
    kwargs = {"family": family}
    for key in allowed_by_family[family] - {"family", "auto_grow_cascades"}:
        if key in section:
            kwargs[key] = _pos_int(section[key], f"topology.{key}")
    if family == topo.MULTI_CASCADE:
        grow = section.get("auto_grow_cascades", False)
        if not isinstance(grow, bool):
            raise ConfigurationError("topology.auto_grow_cascades", "expected boolean")
        kwargs["auto_grow_cascades"] = grow
    if family == topo.P2P:
        # peers double as clients; total_nodes may be left implicit
        kwargs.setdefault("total_nodes", num_clients)
        if kwargs["total_nodes"] != num_clients:
            raise ConfigurationError(
                "topology.total_nodes",
                f"p2p peers ({kwargs['total_nodes']}) must equal clients.num_clients ({num_clients})")
    config = topo.TopologyConfig(**kwargs)
    config.validate()
    return config


def _parse_strategy(section: dict, profile: dict):
    discipline = _require(section, "discipline", "strategy")
    if discipline == "threshold_batch":
        _check_keys(section, {"discipline", "batch_size", "timeout_s"}, "strategy")
        batch = section.get("batch_size", profile["batch_size"])
        timeout = section.get("timeout_s")
        strategy = ThresholdBatch(
            batch_size=_pos_int(batch, "strategy.batch_size"),
            timeout_s=None if timeout is None else _pos_real(timeout, "strategy.timeout_s"))
    elif discipline == "poisson_pool":
        _check_keys(section, {"discipline", "mean_delay_s"}, "strategy")
        delay = section.get("mean_delay_s", profile["mean_delay_s"])
        strategy = PoissonPool(mean_delay_s=_pos_real(delay, "strategy.mean_delay_s"))
    elif discipline == "random_pick_queue":
        _check_keys(section, {"discipline", "pick_rate_per_s"}, "strategy")
        rate = section.get("pick_rate_per_s")
        strategy = RandomPickQueue(
            pick_rate_per_s=None if rate is None else _pos_real(rate, "strategy.pick_rate_per_s"))
    else:
        raise ConfigurationError(
            "strategy.discipline",
            f"unknown discipline {discipline!r}, expected threshold_batch | "
            f"poisson_pool | random_pick_queue")
    strategy.validate()
    return strategy


def _parse_clients(section: dict, profile: dict) -> ClientConfig:
    _check_keys(section, {"num_clients", "send_rate_per_s", "message_size_bytes",
                          "packet_payload_bytes", "receiver_selection"}, "clients")
    num = _pos_int(_require(section, "num_clients", "clients"), "clients.num_clients")
    rate = _pos_real(section.get("send_rate_per_s", profile["send_rate_per_s"]),
                     "clients.send_rate_per_s")
    selection = section.get("receiver_selection", FIXED_PAIRS)
    if selection not in (FIXED_PAIRS, UNIFORM_RANDOM):
        raise ConfigurationError("clients.receiver_selection",
                                 f"expected {FIXED_PAIRS!r} or {UNIFORM_RANDOM!r}")
    return ClientConfig(
        num_clients=num,
        send_rate_per_s=rate,
        message_size_bytes=_pos_int(section.get("message_size_bytes", 1024),
                                    "clients.message_size_bytes"),
        packet_payload_bytes=_pos_int(section.get("packet_payload_bytes", 1024),
                                      "clients.packet_payload_bytes"),
        receiver_selection=selection)


def _parse_cover(section: dict) -> CoverConfig:
    _check_keys(section, {"origin", "rate_per_origin_per_s"}, "cover")
    origin = section.get("origin", COVER_OFF)
    if origin not in (COVER_CLIENTS, COVER_NODES, COVER_OFF):
        raise ConfigurationError("cover.origin", f"expected clients | nodes | off, got {origin!r}")
    rate = _nonneg_real(section.get("rate_per_origin_per_s", 0.0), "cover.rate_per_origin_per_s")
    if origin == COVER_OFF:
        rate = 0.0
    return CoverConfig(origin=origin, rate_per_origin_per_s=rate)


def _parse_unlinkability(section: dict) -> UnlinkabilityConfig:
    _check_keys(section, {"rounds", "round_period_s", "target_offset_s", "compose_rounds",
                          "delta_threshold_nats", "sender_a", "sender_b"}, "run.unlinkability")
    period = _pos_real(section.get("round_period_s", 2.0), "run.unlinkability.round_period_s")
    offset = _nonneg_real(section.get("target_offset_s", period / 4.0),
                          "run.unlinkability.target_offset_s")
    cfg = UnlinkabilityConfig(
        rounds=_pos_int(section.get("rounds", 100), "run.unlinkability.rounds"),
        round_period_s=period,
        target_offset_s=offset,
        compose_rounds=_pos_int(section.get("compose_rounds", 1),
                                "run.unlinkability.compose_rounds"),
        delta_threshold_nats=_nonneg_real(section.get("delta_threshold_nats", 0.0),
                                          "run.unlinkability.delta_threshold_nats"),
        sender_a=_nonneg_int(section.get("sender_a", 0), "run.unlinkability.sender_a"),
        sender_b=_nonneg_int(section.get("sender_b", 1), "run.unlinkability.sender_b"))
    if cfg.sender_a == cfg.sender_b:
        raise ConfigurationError("run.unlinkability.sender_b", "senders must differ")
    if cfg.target_offset_s >= cfg.round_period_s:
        raise ConfigurationError("run.unlinkability.target_offset_s",
                                 "target offset must fall inside the round period")
    return cfg


def _parse_run(section: dict, profile: dict) -> RunConfig:
    _check_keys(section, {"horizon_s", "warmup_s", "seeds", "metric", "capacity_per_s",
                          "residual_cutoff", "mass_floor", "unlinkability"}, "run")
    horizon = _pos_real(_require(section, "horizon_s", "run"), "run.horizon_s")
    warmup = _nonneg_real(section.get("warmup_s", 0.0), "run.warmup_s")
    if warmup >= horizon:
        raise ConfigurationError("run.warmup_s", f"warmup {warmup} must be < horizon {horizon}")
    seeds_raw = _require(section, "seeds", "run")
    if not isinstance(seeds_raw, list) or not seeds_raw:
        raise ConfigurationError("run.seeds", "expected a non-empty list of integers")
    seeds = tuple(_nonneg_int(s, "run.seeds") for s in seeds_raw)
    metric = section.get("metric", METRIC_ENTROPY)
    if metric not in METRICS:
        raise ConfigurationError("run.metric", f"expected one of {METRICS}, got {metric!r}")
    unlink = None
    if metric == METRIC_UNLINKABILITY:
        unlink = _parse_unlinkability(section.get("unlinkability", {}))
    elif "unlinkability" in section:
        raise ConfigurationError("run.unlinkability", "only valid with metric=unlinkability")
    return RunConfig(
        horizon_s=horizon,
        warmup_s=warmup,
        seeds=seeds,
        metric=metric,
        capacity_per_s=_pos_real(section.get("capacity_per_s", profile["capacity_per_s"]),
                                 "run.capacity_per_s"),
        residual_cutoff=_pos_real(section.get("residual_cutoff", 1e-3), "run.residual_cutoff"),
        mass_floor=_pos_real(section.get("mass_floor", 1e-9), "run.mass_floor"),
        unlinkability=unlink)


def parse_scenario(raw: dict, profile_name: str = "desk") -> Scenario:
    if profile_name not in PROFILES:
        raise ConfigurationError("profile", f"unknown profile {profile_name!r}")
    profile = PROFILES[profile_name]
    if not isinstance(raw, dict):
        raise ConfigurationError("config", "top-level JSON value must be an object")
    _check_keys(raw, {"scenario_id", "topology", "strategy", "clients", "cover", "run"}, "config")
    for key in ("topology", "strategy", "clients", "run"):
        if key not in raw:
            raise ConfigurationError(key, "required section missing")
        if not isinstance(raw[key], dict):
            raise ConfigurationError(key, "expected an object")
    clients = _parse_clients(raw["clients"], profile)
    scenario = Scenario(
        scenario_id=str(raw.get("scenario_id", "scenario")),
        topology=_parse_topology(raw["topology"], clients.num_clients),
        strategy=_parse_strategy(raw["strategy"], profile),
        clients=clients,
        cover=_parse_cover(raw.get("cover", {})),
        run=_parse_run(raw["run"], profile))
    _cross_validate(scenario)
    return scenario


def _cross_validate(scenario: Scenario) -> None:
    t = scenario.topology
    if t.family == topo.P2P:
        # sender and receiver are excluded from relay selection
        spare = t.total_nodes - t.route_length
        if scenario.clients.receiver_selection == FIXED_PAIRS and spare < 2:
            raise ConfigurationError("topology.total_nodes",
                                     "p2p needs route_length + 2 peers for sender and receiver")
    if scenario.run.metric == METRIC_UNLINKABILITY:
        u = scenario.run.unlinkability
        if max(u.sender_a, u.sender_b) >= scenario.clients.num_clients:
            raise ConfigurationError("run.unlinkability.sender_a",
                                     "designated senders must be valid client indices")
        needed = scenario.run.warmup_s + u.rounds * u.round_period_s
        if scenario.run.horizon_s < needed:
            raise ConfigurationError(
                "run.horizon_s",
                f"horizon {scenario.run.horizon_s}s too short for {u.rounds} rounds of "
                f"{u.round_period_s}s after warmup (needs >= {needed}s)")


def load_scenario(path: str, profile_name: str = "desk") -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError("config", f"invalid JSON: {exc}") from exc
    return parse_scenario(raw, profile_name)


def override_field(raw: dict, path: str, value) -> dict:
    """Return a copy of the raw config dict with one dotted field replaced."""
    updated = copy.deepcopy(raw)
    parts = path.split(".")
    cursor = updated
    for part in parts[:-1]:
        nxt = cursor.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            cursor[part] = nxt
        cursor = nxt
    cursor[parts[-1]] = value
    return updated
