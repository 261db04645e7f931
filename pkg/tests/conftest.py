import copy

import pytest


BASE_SCENARIO = {
    "scenario_id": "test",
    "topology": {"family": "cascade", "total_nodes": 3},
    "strategy": {"discipline": "poisson_pool", "mean_delay_s": 0.1},
    "clients": {"num_clients": 10, "send_rate_per_s": 1.0},
    "cover": {"origin": "off"},
    "run": {"horizon_s": 30.0, "warmup_s": 5.0, "seeds": [1],
            "metric": "entropy", "capacity_per_s": 1000.0},
}


@pytest.fixture
def base_scenario():
    return copy.deepcopy(BASE_SCENARIO)


def scenario_dict(**overrides):
    """Copy of the base scenario with section-level overrides merged in.

    topology and strategy are replaced outright (their key sets depend on the
    family/discipline); the other sections merge field-by-field.
    """
    raw = copy.deepcopy(BASE_SCENARIO)
    for section, value in overrides.items():
        if (section not in ("topology", "strategy")
                and isinstance(value, dict) and isinstance(raw.get(section), dict)):
            raw[section].update(value)
        else:
            raw[section] = value
    return raw
