import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from models import ConstantPayoff, black_scholes_model, call_from_params, model_from_params  # noqa: E402
from schemas import BENCHMARK_PARAMS, CompactBox, GainSchedule, SaConfig  # noqa: E402

# Small plan that keeps every estimator call well under a second
FAST_CONFIG = """\
# fast Black-Scholes call
method = ais
s0 = 130
K = 100
r = log(1.1)
sigma = 0.6
T = 1
m = 2
L = 2
alpha = 0.5
I = 5
repetitions = 2
sweep_levels = 1, 2
oracle_samples = 200
oracle_steps = 4
grid_spacing = 0.5
"""

BENCHMARK_CONFIG = """\
# benchmark call
s0 = 130
K = 100
T = 1
r = log(1.1)
sigma = 0.6
m = 4
L = 4
I = 1000
repetitions = 50
"""


@pytest.fixture
def bs_params():
    return BENCHMARK_PARAMS


@pytest.fixture
def bs_model(bs_params):
    return model_from_params(bs_params)


@pytest.fixture
def call_payoff(bs_params):
    return call_from_params(bs_params)


@pytest.fixture
def constant_payoff():
    return ConstantPayoff(2.5)


@pytest.fixture
def unit_model():
    """Black-Scholes with s0 = 1, r = 0.5, sigma = 1, T = 1."""
    return black_scholes_model(1.0, 0.5, 1.0, 1.0)


@pytest.fixture
def sa_config():
    return SaConfig(
        gain=GainSchedule(),
        box=CompactBox.symmetric(10.0, 1),
        theta0=[0.0],
        stop_iters=5,
    )


@pytest.fixture
def fast_config_file(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(FAST_CONFIG)
    return path


@pytest.fixture
def fast_config_text():
    return FAST_CONFIG


@pytest.fixture
def benchmark_config_text():
    return BENCHMARK_CONFIG


@pytest.fixture
def fast_config():
    from run_config import parse_config

    return parse_config(FAST_CONFIG)
