import math

import pytest

from mixsim.metrics import (MetricsLedger, UnlinkabilitySample, entropy_bits,
                            epsilon_after_rounds, epsilon_hat, estimate_delta,
                            make_sample, percentile)


class TestEntropy:
    def test_uniform_over_four(self):
        assert entropy_bits([0.25, 0.25, 0.25, 0.25]) == pytest.approx(2.0, abs=1e-12)

    def test_point_mass_has_no_uncertainty(self):
        assert entropy_bits([1.0]) == 0.0

    def test_analytic_three_way(self):
        assert entropy_bits([0.5, 0.25, 0.25]) == pytest.approx(1.5, abs=1e-12)

    def test_zero_entries_contribute_nothing(self):
        assert entropy_bits([0.5, 0.0, 0.25, 0.25, 0.0]) == pytest.approx(1.5, abs=1e-12)

    def test_normalizes_unnormalized_masses(self):
        assert entropy_bits([0.2, 0.2]) == pytest.approx(1.0, abs=1e-12)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            entropy_bits([0.5, -0.1])

    def test_bounded_by_log2_support(self):
        masses = [0.4, 0.3, 0.2, 0.05, 0.05]
        h = entropy_bits(masses)
        assert 0.0 <= h <= math.log2(5)


def lr_sample(pr_a, idx=0):
    return UnlinkabilitySample(pr_a=pr_a, pr_b=1.0 - pr_a, round_index=idx)


class TestEpsilonHat:
    def test_symmetric_rounds_give_zero(self):
        samples = [lr_sample(0.5, i) for i in range(10)]
        assert epsilon_hat(samples) == 0.0

    def test_single_asymmetric_round(self):
        assert epsilon_hat([lr_sample(0.8)]) == pytest.approx(math.log(4), abs=1e-12)

    def test_reciprocal_ratios_cancel(self):
        samples = [lr_sample(0.8), lr_sample(0.2)]
        assert epsilon_hat(samples) == pytest.approx(0.0, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            epsilon_hat([])

    def test_antisymmetry_under_role_swap(self):
        samples = [lr_sample(p) for p in (0.9, 0.6, 0.3, 0.55)]
        swapped = [UnlinkabilitySample(pr_a=s.pr_b, pr_b=s.pr_a, round_index=s.round_index)
                   for s in samples]
        assert epsilon_hat(swapped) == pytest.approx(-epsilon_hat(samples), abs=1e-12)


class TestEpsilonAfterRounds:
    def test_fifty_rounds(self):
        assert epsilon_after_rounds(0.02, 50) == pytest.approx(1.0, abs=1e-12)

    def test_zero_stays_zero(self):
        assert epsilon_after_rounds(0.0, 12345) == 0.0

    def test_single_round_identity(self):
        assert epsilon_after_rounds(1.3863, 1) == pytest.approx(1.3863, abs=1e-12)

    def test_rejects_nonpositive_rounds(self):
        with pytest.raises(ValueError):
            epsilon_after_rounds(0.1, 0)


class TestEstimateDelta:
    def test_infinite_threshold_gives_zero(self):
        samples = [lr_sample(0.9), lr_sample(0.5)]
        assert estimate_delta(samples, math.inf) == 0.0

    def test_threshold_zero_counts_asymmetric_rounds(self):
        samples = [lr_sample(0.9), lr_sample(0.5), lr_sample(0.4), lr_sample(0.5)]
        assert estimate_delta(samples, 0.0) == 0.5

    def test_quarter_exceeds_one_nat(self):
        samples = [lr_sample(0.8), lr_sample(0.5), lr_sample(0.5), lr_sample(0.5)]
        assert estimate_delta(samples, 1.0) == 0.25

    def test_monotone_nonincreasing_in_threshold(self):
        samples = [lr_sample(p) for p in (0.95, 0.8, 0.65, 0.5, 0.35, 0.15)]
        thresholds = [0.0, 0.2, 0.5, 1.0, 2.0, 5.0]
        deltas = [estimate_delta(samples, t) for t in thresholds]
        assert deltas == sorted(deltas, reverse=True)


class TestMakeSample:
    def test_balanced_masses(self):
        s = make_sample(0.3, 0.3, 0)
        assert s.pr_a == pytest.approx(0.5)
        assert s.log_ratio == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_mass_hits_clamp_ceiling(self):
        s = make_sample(1.0, 0.0, 0, floor=1e-9)
        assert s.log_ratio == pytest.approx(math.log(1e9 - 1), rel=1e-9)

    def test_both_zero_falls_back_to_even(self):
        s = make_sample(0.0, 0.0, 0)
        assert s.pr_a == pytest.approx(0.5)

    def test_posteriors_stay_in_open_interval(self):
        for a, b in ((1.0, 0.0), (0.0, 1.0), (1e-15, 1.0)):
            s = make_sample(a, b, 0)
            assert 0.0 < s.pr_a < 1.0
            assert 0.0 < s.pr_b < 1.0
            assert s.pr_a + s.pr_b == pytest.approx(1.0, abs=1e-12)


class TestLatencyStats:
    def test_percentile_nearest_rank(self):
        values = list(range(1, 101))
        assert percentile(values, 0.50) == 50
        assert percentile(values, 0.95) == 95
        assert percentile([7], 0.95) == 7

    def test_ledger_stats(self):
        ledger = MetricsLedger()
        for ms in (100, 200, 300, 400):
            ledger.record_latency(0, ms * 1_000_000)
        stats = ledger.latency_stats()
        assert stats.mean_s == pytest.approx(0.25)
        assert stats.p50_s == pytest.approx(0.2)
        assert stats.max_s == pytest.approx(0.4)
        assert stats.count == 4

    def test_no_latencies_returns_none(self):
        assert MetricsLedger().latency_stats() is None


class TestFinalizeEntropy:
    def test_below_cutoff_produces_sample(self):
        ledger = MetricsLedger()
        ledger.record_delivery_mass(1, 0.5)
        ledger.record_delivery_mass(2, 0.4995)
        ledger.finalize_entropy(residual=0.0005, cutoff=1e-3)
        assert not ledger.entropy_censored
        assert ledger.entropy_sample == pytest.approx(1.0, abs=1e-6)

    def test_residual_above_cutoff_censors(self):
        ledger = MetricsLedger()
        ledger.record_delivery_mass(1, 0.9)
        ledger.finalize_entropy(residual=0.1, cutoff=1e-3)
        assert ledger.entropy_censored
        assert ledger.entropy_sample is None
