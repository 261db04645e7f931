import math

import pytest

from conftest import scenario_dict
from mixsim.engine import ConfigurationError
from mixsim.harness import result_row
from mixsim.scenario import parse_scenario
from mixsim.simulate import run_single


def run(raw, seed=1):
    return run_single(parse_scenario(raw), seed)


def assert_mass_conserved(ledger):
    assert ledger.residual_mass is not None
    assert ledger.delivered_mass_total + ledger.residual_mass == pytest.approx(1.0, abs=1e-9)


class TestEntropyMeasurement:
    def test_target_alone_in_idle_network_zero_bits(self):
        # one client whose first send lands far beyond the horizon
        raw = scenario_dict(
            clients={"num_clients": 1, "send_rate_per_s": 1e-9},
            run={"horizon_s": 20.0, "warmup_s": 1.0, "seeds": [1],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        ledger = run(raw).ledger
        assert not ledger.entropy_censored
        assert ledger.entropy_sample == 0.0
        assert_mass_conserved(ledger)

    def test_single_batch_node_gives_log2_batch(self):
        raw = scenario_dict(
            topology={"family": "cascade", "total_nodes": 1},
            strategy={"discipline": "threshold_batch", "batch_size": 10},
            clients={"num_clients": 5, "send_rate_per_s": 1.0},
            run={"horizon_s": 60.0, "warmup_s": 3.0, "seeds": [1],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        for seed in range(1, 6):
            ledger = run(raw, seed).ledger
            assert ledger.entropy_sample == pytest.approx(math.log2(10), abs=1e-9)
            assert_mass_conserved(ledger)

    def test_cascade_of_batch_mixes_keeps_same_batch(self):
        # disjoint batches stay disjoint through the chain: entropy stays log2(b)
        raw = scenario_dict(
            topology={"family": "cascade", "total_nodes": 3},
            strategy={"discipline": "threshold_batch", "batch_size": 10},
            clients={"num_clients": 5, "send_rate_per_s": 1.0},
            run={"horizon_s": 120.0, "warmup_s": 3.0, "seeds": [1],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        ledger = run(raw).ledger
        assert ledger.entropy_sample == pytest.approx(math.log2(10), abs=1e-9)
        assert_mass_conserved(ledger)

    def test_poisson_network_conserves_mass_with_cover(self):
        raw = scenario_dict(
            topology={"family": "stratified", "num_layers": 3, "nodes_per_layer": 2},
            cover={"origin": "clients", "rate_per_origin_per_s": 2.0},
            run={"horizon_s": 40.0, "warmup_s": 5.0, "seeds": [3],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        ledger = run(raw, 3).ledger
        assert_mass_conserved(ledger)
        assert ledger.entropy_sample is not None
        assert ledger.entropy_sample > 0.0

    def test_censored_when_horizon_too_short(self):
        raw = scenario_dict(
            strategy={"discipline": "poisson_pool", "mean_delay_s": 50.0},
            run={"horizon_s": 6.0, "warmup_s": 5.0, "seeds": [1],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        ledger = run(raw).ledger
        assert ledger.entropy_censored
        assert ledger.entropy_sample is None
        assert_mass_conserved(ledger)   # censoring does not break accounting

    def test_entropy_bounded_by_positive_mass_support(self):
        raw = scenario_dict(
            clients={"num_clients": 20, "send_rate_per_s": 1.0},
            run={"horizon_s": 30.0, "warmup_s": 5.0, "seeds": [4],
                 "metric": "entropy", "capacity_per_s": 1000.0},
        )
        ledger = run(raw, 4).ledger
        support = len(ledger.delivered_mass)
        assert 0.0 <= ledger.entropy_sample <= math.log2(max(support, 2))


def test_exact_three_ms_pipeline_latency():
    # batch size 1 means no mixing delay: 3 hops x 1ms deterministic service
    raw = scenario_dict(
        topology={"family": "cascade", "total_nodes": 3},
        strategy={"discipline": "threshold_batch", "batch_size": 1},
        clients={"num_clients": 1, "send_rate_per_s": 0.2},
        run={"horizon_s": 30.0, "warmup_s": 0.0, "seeds": [2],
             "metric": "latency_only", "capacity_per_s": 1000.0},
    )
    ledger = run(raw, 2).ledger
    assert ledger.latencies_ticks
    assert all(t == 3_000_000 for t in ledger.latencies_ticks)


def test_deterministic_ledgers_for_same_seed():
    raw = scenario_dict(
        clients={"num_clients": 15, "send_rate_per_s": 1.0},
        run={"horizon_s": 25.0, "warmup_s": 5.0, "seeds": [11],
             "metric": "entropy", "capacity_per_s": 1000.0},
    )
    row_a = result_row(run(raw, 11))
    row_b = result_row(run(raw, 11))
    assert row_a == row_b


def test_different_seeds_differ():
    raw = scenario_dict(
        clients={"num_clients": 15, "send_rate_per_s": 1.0},
        run={"horizon_s": 25.0, "warmup_s": 5.0, "seeds": [11, 12],
             "metric": "entropy", "capacity_per_s": 1000.0},
    )
    a = run(raw, 11).ledger
    b = run(raw, 12).ledger
    assert a.entropy_sample != b.entropy_sample


class TestUnlinkability:
    def unlink_raw(self, rounds=60, **extra):
        return scenario_dict(
            topology={"family": "cascade", "total_nodes": 1},
            strategy={"discipline": "poisson_pool", "mean_delay_s": 0.2},
            clients={"num_clients": 4, "send_rate_per_s": 4.0},
            run={"horizon_s": 3.0 + rounds * 1.5, "warmup_s": 3.0, "seeds": [1],
                 "metric": "unlinkability", "capacity_per_s": 1000.0,
                 "unlinkability": {"rounds": rounds, "round_period_s": 1.5,
                                   "compose_rounds": 10, **extra}},
        )

    def test_round_accounting(self):
        ledger = run(self.unlink_raw(rounds=40)).ledger
        assert len(ledger.unlink_samples) + ledger.censored_rounds == 40

    def test_samples_are_valid_posteriors(self):
        ledger = run(self.unlink_raw(rounds=40)).ledger
        for s in ledger.unlink_samples:
            assert 0.0 < s.pr_a < 1.0
            assert s.pr_a + s.pr_b == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_same_seed(self):
        a = run(self.unlink_raw(rounds=30)).ledger
        b = run(self.unlink_raw(rounds=30)).ledger
        assert [s.log_ratio for s in a.unlink_samples] == \
               [s.log_ratio for s in b.unlink_samples]

    def test_no_mixing_round_hits_clamp(self):
        # S_A and S_B barely send; target usually crosses the pool alone
        raw = scenario_dict(
            topology={"family": "cascade", "total_nodes": 1},
            strategy={"discipline": "poisson_pool", "mean_delay_s": 0.01},
            clients={"num_clients": 3, "send_rate_per_s": 1e-6},
            run={"horizon_s": 103.0, "warmup_s": 1.0, "seeds": [5],
                 "metric": "unlinkability", "capacity_per_s": 1000.0,
                 "unlinkability": {"rounds": 20, "round_period_s": 5.0}},
        )
        ledger = run(raw, 5).ledger
        ceiling = math.log(1e9 - 1)
        assert ledger.unlink_samples
        for s in ledger.unlink_samples:
            assert abs(s.log_ratio) == pytest.approx(ceiling, rel=1e-12)

    def test_compose_rounds_reported(self):
        row = result_row(run(self.unlink_raw(rounds=30)))
        assert row["eps_R_nats"] == pytest.approx(10 * row["eps_hat_nats"], abs=1e-15)


class TestProfiles:
    def test_desk_profile_defaults(self):
        raw = scenario_dict(strategy={"discipline": "threshold_batch"})
        del raw["run"]["capacity_per_s"]
        sc = parse_scenario(raw, "desk")
        assert sc.run.capacity_per_s == 100.0
        assert sc.strategy.batch_size == 100

    def test_paper_profile_defaults(self):
        raw = scenario_dict(strategy={"discipline": "threshold_batch"})
        del raw["run"]["capacity_per_s"]
        sc = parse_scenario(raw, "paper")
        assert sc.run.capacity_per_s == 1000.0
        assert sc.strategy.batch_size == 1000

    def test_explicit_fields_beat_profile(self):
        raw = scenario_dict(strategy={"discipline": "threshold_batch", "batch_size": 7})
        sc = parse_scenario(raw, "paper")
        assert sc.strategy.batch_size == 7
        assert sc.run.capacity_per_s == 1000.0   # explicit in the base fixture

    def test_unknown_profile_rejected(self, base_scenario):
        with pytest.raises(ConfigurationError, match="profile"):
            parse_scenario(base_scenario, "lab")


class TestScenarioValidation:
    def test_unknown_key_is_hard_error(self, base_scenario):
        base_scenario["run"]["horizons"] = 10
        with pytest.raises(ConfigurationError, match="horizons"):
            parse_scenario(base_scenario)

    def test_warmup_must_precede_horizon(self, base_scenario):
        base_scenario["run"]["warmup_s"] = 30.0
        with pytest.raises(ConfigurationError, match="warmup"):
            parse_scenario(base_scenario)

    def test_seeds_required_nonempty(self, base_scenario):
        base_scenario["run"]["seeds"] = []
        with pytest.raises(ConfigurationError, match="seeds"):
            parse_scenario(base_scenario)

    def test_p2p_peer_count_must_match_clients(self):
        raw = scenario_dict(
            topology={"family": "p2p", "total_nodes": 7, "route_length": 3},
            clients={"num_clients": 8, "send_rate_per_s": 1.0},
        )
        with pytest.raises(ConfigurationError, match="total_nodes"):
            parse_scenario(raw)

    def test_multi_cascade_overflow_without_auto_grow(self):
        raw = scenario_dict(
            topology={"family": "multi_cascade", "num_cascades": 1, "cascade_length": 3},
            clients={"num_clients": 250, "send_rate_per_s": 1.0},
            run={"horizon_s": 10.0, "warmup_s": 0.0, "seeds": [1],
                 "metric": "latency_only", "capacity_per_s": 100.0},
        )
        with pytest.raises(ConfigurationError, match="num_cascades"):
            run_single(parse_scenario(raw), 1)

    def test_multi_cascade_auto_grow_builds_enough_chains(self):
        raw = scenario_dict(
            topology={"family": "multi_cascade", "num_cascades": 1, "cascade_length": 3,
                      "auto_grow_cascades": True},
            strategy={"discipline": "threshold_batch", "batch_size": 10},
            clients={"num_clients": 250, "send_rate_per_s": 1.0},
            run={"horizon_s": 10.0, "warmup_s": 0.0, "seeds": [1],
                 "metric": "latency_only", "capacity_per_s": 100.0},
        )
        result = run_single(parse_scenario(raw), 1)
        assert result.num_cascades_used == 3   # ceil(250/100)
