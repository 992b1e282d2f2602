import numpy as np
import pytest

from robeam.scenario import ScenarioConfig


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run the slow statistical suites")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical suites over many solved instances")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_config(**kwargs) -> ScenarioConfig:
    "N_T = 4, K = L = N_e = 2, unit gains"
    base = dict(
        n_tx=4,
        n_er=2,
        n_eve=2,
        eve_antennas=2,
        rate_target=1.0,
        eh_targets="-10dB",
        eh_efficiency=1.0,
        power_budget="10dB",
        error_scale=dict(eps_sq=1e-3),
    )
    base.update(kwargs)
    return ScenarioConfig.from_config_dict(base)


def base_config(**kwargs) -> ScenarioConfig:
    "N_T = 8, K = 3, L = N_e = 2"
    base = dict(
        n_tx=8,
        n_er=3,
        n_eve=2,
        eve_antennas=2,
        rate_target=3.0,
        eh_targets="10dBm",
        power_budget="20dB",
        error_scale=dict(eps_sq=2e-3),
    )
    base.update(kwargs)
    return ScenarioConfig.from_config_dict(base)
