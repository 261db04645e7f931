"""Passive-adversary metrics: linkage entropy, sender unlinkability, latency stats.

Entropy is reported in bits (log base 2); unlinkability leakage in nats
(natural log). Both bases are a reporting convention and are echoed in the
CSV header docs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .engine import to_seconds

MASS_FLOOR = 1e-9          # posterior clamp: finite runs can produce exact zeros
RESIDUAL_CUTOFF = 1e-3     # entropy finalization once this little mass is still inside


def entropy_bits(masses) -> float:
    """Shannon entropy of the normalized positive masses, in bits."""
    total = 0.0
    acc = []
    for m in masses:
        if m < 0:
            raise ValueError(f"negative probability mass {m}")
        if m > 0:
            acc.append(m)
            total += m
    if not acc or total <= 0:
        return 0.0
    h = 0.0
    for m in acc:
        p = m / total
        h -= p * math.log2(p)
    return h


@dataclass
class UnlinkabilitySample:
    pr_a: float
    pr_b: float
    round_index: int

    @property
    def log_ratio(self) -> float:
        return math.log(self.pr_a / self.pr_b)


def make_sample(mass_a: float, mass_b: float, round_index: int,
                floor: float = MASS_FLOOR) -> UnlinkabilitySample:
    """Normalize delivered sender masses into a clamped two-hypothesis posterior."""
    total = mass_a + mass_b
    pr_a = mass_a / total if total > 0 else 0.5
    if pr_a > 1.0 - floor:
        pr_a, pr_b = 1.0 - floor, floor
    elif pr_a < floor:
        pr_a, pr_b = floor, 1.0 - floor
    else:
        pr_b = 1.0 - pr_a
    return UnlinkabilitySample(pr_a=pr_a, pr_b=pr_b, round_index=round_index)


def epsilon_hat(samples) -> float:
    """Average per-round log-ratio leakage, in nats."""
    if not samples:
        raise ValueError("epsilon_hat needs at least one sample")
    return sum(s.log_ratio for s in samples) / len(samples)


def epsilon_after_rounds(eps_hat: float, rounds: int) -> float:
    """Composed advantage after the given number of observation rounds."""
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    return rounds * eps_hat


def estimate_delta(samples, epsilon_threshold: float) -> float:
    """Empirical probability that a round leaks more than the threshold."""
    if not samples:
        raise ValueError("estimate_delta needs at least one sample")
    exceed = sum(1 for s in samples if abs(s.log_ratio) > epsilon_threshold)
    return exceed / len(samples)


def percentile(sorted_values: list, q: float) -> float:
    """Nearest-rank percentile over a pre-sorted list."""
    if not sorted_values:
        raise ValueError("no values")
    rank = math.ceil(q * len(sorted_values))
    return sorted_values[max(0, rank - 1)]


@dataclass
class LatencyStats:
    mean_s: float
    p50_s: float
    p95_s: float
    max_s: float
    count: int


@dataclass
class MetricsLedger:
    """Per-run accumulator for everything the harness reports."""

    latencies_ticks: list = field(default_factory=list)
    delivered_mass: dict = field(default_factory=dict)   # pid -> positive target mass
    delivered_mass_total: float = 0.0
    packets_real: int = 0
    packets_cover: int = 0
    entropy_sample: Optional[float] = None
    entropy_censored: bool = False
    unlink_samples: list = field(default_factory=list)
    censored_rounds: int = 0
    residual_mass: Optional[float] = None   # swept from live state at run end

    def record_delivery_mass(self, pid: int, mass: float) -> None:
        if mass > 0.0:
            self.delivered_mass[pid] = mass
        self.delivered_mass_total += mass

    def record_latency(self, created_at: int, delivered_at: int) -> None:
        self.latencies_ticks.append(delivered_at - created_at)

    def finalize_entropy(self, residual: float, cutoff: float = RESIDUAL_CUTOFF) -> None:
        if residual >= cutoff:
            self.entropy_censored = True
            self.entropy_sample = None
        else:
            self.entropy_sample = entropy_bits(self.delivered_mass.values())

    def latency_stats(self) -> Optional[LatencyStats]:
        if not self.latencies_ticks:
            return None
        ordered = sorted(self.latencies_ticks)
        return LatencyStats(
            mean_s=to_seconds(sum(ordered)) / len(ordered),
            p50_s=to_seconds(percentile(ordered, 0.50)),
            p95_s=to_seconds(percentile(ordered, 0.95)),
            max_s=to_seconds(ordered[-1]),
            count=len(ordered),
        )

    def overhead_ratio(self) -> Optional[float]:
        if self.packets_real == 0:
            return None
        return (self.packets_real + self.packets_cover) / self.packets_real
