"""Experiment orchestration: seeded runs, parameter sweeps, bisection searches, CSV."""

from __future__ import annotations

import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .engine import ConfigurationError
from .metrics import epsilon_after_rounds, epsilon_hat, estimate_delta
from .scenario import (METRIC_ENTROPY, METRIC_UNLINKABILITY, COVER_OFF,
                       Scenario, override_field, parse_scenario)
from .simulate import RunResult, run_single

CSV_HEADER = [
    "scenario_id", "axis", "seed", "users", "topology", "strategy",
    "mean_latency_s", "p50_latency_s", "p95_latency_s",
    "entropy_bits_mean", "entropy_bits_ci95",
    "eps_hat_nats", "eps_R_nats", "delta_emp",
    "packets_real", "packets_cover", "overhead_ratio", "censored",
]

# knob -> (config field, direction of the entropy response)
SEARCH_KNOBS = {
    "cover_rate": ("cover.rate_per_origin_per_s", +1),
    "mean_delay": ("strategy.mean_delay_s", +1),
}


class SearchBracketError(RuntimeError):
    """The objective is not bracketed by the search endpoints."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def ci95_half_width(values: list) -> float | None:
    """Normal-approximation 95% half-width over independent per-seed values."""
    if len(values) < 2:
        return None
    return 1.96 * statistics.stdev(values) / math.sqrt(len(values))


def result_row(result: RunResult, axis=None) -> dict:
    scenario = result.scenario
    ledger = result.ledger
    row = {name: None for name in CSV_HEADER}
    row.update({
        "scenario_id": scenario.scenario_id,
        "axis": axis,
        "seed": result.seed,
        "users": scenario.clients.num_clients,
        "topology": scenario.topology.family,
        "strategy": scenario.strategy_name,
        "packets_real": ledger.packets_real,
        "packets_cover": ledger.packets_cover,
        "overhead_ratio": ledger.overhead_ratio(),
        "censored": 0,
    })
    stats = ledger.latency_stats()
    if stats is not None:
        row["mean_latency_s"] = stats.mean_s
        row["p50_latency_s"] = stats.p50_s
        row["p95_latency_s"] = stats.p95_s
    if scenario.run.metric == METRIC_ENTROPY:
        row["entropy_bits_mean"] = ledger.entropy_sample
        row["censored"] = 1 if ledger.entropy_censored else 0
    elif scenario.run.metric == METRIC_UNLINKABILITY:
        row["censored"] = ledger.censored_rounds
        if ledger.unlink_samples:
            u = scenario.run.unlinkability
            eps = epsilon_hat(ledger.unlink_samples)
            row["eps_hat_nats"] = eps
            row["eps_R_nats"] = epsilon_after_rounds(eps, u.compose_rounds)
            row["delta_emp"] = estimate_delta(ledger.unlink_samples, u.delta_threshold_nats)
    return row


def _point_task(task):
    raw, profile, axis, seed = task
    try:
        scenario = parse_scenario(raw, profile)
        result = run_single(scenario, seed)
        return ("ok", axis, seed, result_row(result, axis=axis))
    except Exception as exc:   # failures are recorded, the sweep continues
        return ("err", axis, seed, f"{type(exc).__name__}: {exc}")


def _execute_points(tasks: list, parallel: int):
    if parallel <= 1:
        return [_point_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_point_task, tasks))


@dataclass
class BatchOutcome:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def sort_rows(self) -> None:
        def key(row):
            axis = row["axis"]
            return (axis is not None, axis if axis is not None else 0.0, row["seed"])
        self.rows.sort(key=key)


def run_scenario(raw: dict, profile: str = "desk", parallel: int = 1) -> BatchOutcome:
    scenario = parse_scenario(raw, profile)   # fail fast on config errors
    tasks = [(raw, profile, None, seed) for seed in scenario.run.seeds]
    outcome = BatchOutcome()
    for status, axis, seed, payload in _execute_points(tasks, parallel):
        if status == "ok":
            outcome.rows.append(payload)
        else:
            outcome.failures.append((axis, seed, payload))
    outcome.sort_rows()
    return outcome


def _check_sweep_spec(spec: dict) -> None:
    unknown = set(spec) - {"base", "axis", "values"}
    if unknown:
        raise ConfigurationError(f"sweep.{sorted(unknown)[0]}", "unknown key")
    for key in ("base", "axis", "values"):
        if key not in spec:
            raise ConfigurationError(f"sweep.{key}", "required field missing")
    if not isinstance(spec["values"], list) or not spec["values"]:
        raise ConfigurationError("sweep.values", "expected a non-empty list")


def sweep(spec: dict, profile: str = "desk", parallel: int = 1) -> BatchOutcome:
    _check_sweep_spec(spec)
    base = spec["base"]
    axis_path = spec["axis"]
    tasks = []
    outcome = BatchOutcome()
    for value in spec["values"]:
        raw = override_field(base, axis_path, value)
        try:
            scenario = parse_scenario(raw, profile)
        except ConfigurationError as exc:
            outcome.failures.append((value, None, f"ConfigurationError: {exc}"))
            continue
        for seed in scenario.run.seeds:
            tasks.append((raw, profile, value, seed))
    for status, axis, seed, payload in _execute_points(tasks, parallel):
        if status == "ok":
            outcome.rows.append(payload)
        else:
            outcome.failures.append((axis, seed, payload))
    outcome.sort_rows()
    return outcome


@dataclass
class SearchProbe:
    knob_value: float
    entropy_mean: float
    entropy_ci95: float | None
    censored: int


@dataclass
class SearchResult:
    knob: str
    knob_value: float
    entropy_mean: float
    entropy_ci95: float | None
    objective_bits: float
    tolerance_bits: float
    iterations: int
    probes: list
    base_scenario: Scenario

    def row(self) -> dict:
        row = {name: None for name in CSV_HEADER}
        row.update({
            "scenario_id": self.base_scenario.scenario_id,
            "axis": self.knob_value,
            "seed": "",
            "users": self.base_scenario.clients.num_clients,
            "topology": self.base_scenario.topology.family,
            "strategy": self.base_scenario.strategy_name,
            "entropy_bits_mean": self.entropy_mean,
            "entropy_bits_ci95": self.entropy_ci95,
        })
        return row


def _check_search_spec(spec: dict) -> None:
    unknown = set(spec) - {"base", "knob", "objective_bits", "tolerance_bits",
                           "bracket", "max_iterations"}
    if unknown:
        raise ConfigurationError(f"search.{sorted(unknown)[0]}", "unknown key")
    for key in ("base", "knob", "objective_bits", "tolerance_bits", "bracket"):
        if key not in spec:
            raise ConfigurationError(f"search.{key}", "required field missing")
    if spec["knob"] not in SEARCH_KNOBS:
        raise ConfigurationError("search.knob",
                                 f"expected one of {sorted(SEARCH_KNOBS)}, got {spec['knob']!r}")
    bracket = spec["bracket"]
    if (not isinstance(bracket, list) or len(bracket) != 2
            or not all(isinstance(v, (int, float)) for v in bracket)
            or not bracket[0] < bracket[1]):
        raise ConfigurationError("search.bracket", "expected [lo, hi] with lo < hi")
    if spec["tolerance_bits"] <= 0:
        raise ConfigurationError("search.tolerance_bits", "must be > 0")


def _probe(base: dict, knob_path: str, value: float, profile: str,
           parallel: int, cache: dict) -> SearchProbe:
    if value in cache:
        return cache[value]
    raw = override_field(base, knob_path, value)
    outcome = run_scenario(raw, profile, parallel)
    samples = [row["entropy_bits_mean"] for row in outcome.rows
               if row["entropy_bits_mean"] is not None]
    censored = sum(row["censored"] for row in outcome.rows)
    if not samples:
        raise RuntimeError(f"probe at {knob_path}={value}: every seed was censored")
    probe = SearchProbe(knob_value=value,
                        entropy_mean=statistics.fmean(samples),
                        entropy_ci95=ci95_half_width(samples),
                        censored=censored)
    cache[value] = probe
    return probe


def search(spec: dict, profile: str = "desk", parallel: int = 1,
           log=None) -> SearchResult:
    """Bisection on one knob until the seed-mean entropy meets the objective.

    The knob-entropy relation is assumed monotone; direction is detected from
    the endpoints, so both rising (cover rate, mean delay) and falling knobs
    are handled.
    """
    _check_search_spec(spec)
    base = spec["base"]
    knob = spec["knob"]
    knob_path, direction = SEARCH_KNOBS[knob]
    objective = float(spec["objective_bits"])
    tolerance = float(spec["tolerance_bits"])
    lo, hi = float(spec["bracket"][0]), float(spec["bracket"][1])
    max_iterations = int(spec.get("max_iterations", 20))

    base_scenario = parse_scenario(override_field(base, knob_path, hi), profile)
    if base_scenario.run.metric != METRIC_ENTROPY:
        raise ConfigurationError("search.base.run.metric", "search requires metric=entropy")
    if knob == "cover_rate" and base_scenario.cover.origin == COVER_OFF:
        raise ConfigurationError("search.base.cover.origin",
                                 "cover_rate search needs cover enabled")

    cache: dict = {}
    probes: list = []

    def report(probe: SearchProbe):
        probes.append(probe)
        if log is not None:
            print(f"probe {knob}={probe.knob_value:g} -> "
                  f"entropy {probe.entropy_mean:.4f} bits", file=log)

    def done(result_probe: SearchProbe, iterations: int) -> SearchResult:
        return SearchResult(knob=knob, knob_value=result_probe.knob_value,
                            entropy_mean=result_probe.entropy_mean,
                            entropy_ci95=result_probe.entropy_ci95,
                            objective_bits=objective, tolerance_bits=tolerance,
                            iterations=iterations, probes=probes,
                            base_scenario=base_scenario)

    # the cheap end is where the objective may already hold without paying
    # any knob at all (lo for a rising response, hi for a falling one)
    cheap, costly = (lo, hi) if direction > 0 else (hi, lo)
    p_cheap = _probe(base, knob_path, cheap, profile, parallel, cache)
    report(p_cheap)
    if p_cheap.entropy_mean >= objective:
        return done(p_cheap, 0)
    p_costly = _probe(base, knob_path, costly, profile, parallel, cache)
    report(p_costly)
    if p_costly.entropy_mean < objective:
        raise SearchBracketError(
            f"objective {objective} bits not bracketed: entropy at "
            f"{knob}={cheap:g} is {p_cheap.entropy_mean:.4f}, at {knob}={costly:g} "
            f"is {p_costly.entropy_mean:.4f}")

    best = p_costly
    for iteration in range(1, max_iterations + 1):
        mid = (lo + hi) / 2.0
        p_mid = _probe(base, knob_path, mid, profile, parallel, cache)
        report(p_mid)
        if abs(p_mid.entropy_mean - objective) <= tolerance:
            return done(p_mid, iteration)
        if (p_mid.entropy_mean < objective) == (direction > 0):
            lo = mid
        else:
            hi = mid
        if p_mid.entropy_mean >= objective:
            best = p_mid
    return done(best, max_iterations)


def write_csv(rows: list, path: str) -> None:
    """Emit rows under the fixed header; UTF-8, LF endings, '.' decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[name]) for name in CSV_HEADER) + "\n")


def print_failures(outcome: BatchOutcome, stream=sys.stderr) -> None:
    for axis, seed, message in outcome.failures:
        where = f"axis={axis} " if axis is not None else ""
        print(f"warning: point {where}seed={seed} failed: {message}", file=stream)
