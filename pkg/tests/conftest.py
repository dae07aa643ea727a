import numpy as np
import pytest

from liqlab import ScenarioConfig


@pytest.fixture
def default_config():
    return ScenarioConfig()


@pytest.fixture
def default_params(default_config):
    return default_config.model_params()


@pytest.fixture
def default_grid(default_config):
    return default_config.time_grid()


def override(cfg: ScenarioConfig, **dotted):
    """Copy of a config with `section__key=value` overrides applied."""
    out = cfg.copy()
    for dotted_key, value in dotted.items():
        section, key = dotted_key.split("__")
        out.values[(section, key)] = value
    return out


@pytest.fixture
def mild_config(default_config):
    # gentle drifts: keeps Euler/rectangle bias far below Monte Carlo noise
    return override(
        default_config,
        model__gamma=0.2, model__eta=0.05, model__alpha=0.0, model__a=0.1,
        model__epsilon=1e-3,
    )


def corr(rho12=0.0, rho13=0.0, rho23=0.0):
    r = np.eye(3)
    r[0, 1] = r[1, 0] = rho12
    r[0, 2] = r[2, 0] = rho13
    r[1, 2] = r[2, 1] = rho23
    return r
