import numpy as np
import pytest

from ncsched.config import load_experiment
from ncsched.env import EnvConfig
from ncsched.plants import SubsystemSpec


def scalar_spec(a=1.2, b=1.0, c=1.0, w=0.1, v=0.1, x0m=1.0, x0c=1.0, q=1.0, r=1.0, qf=1.0, name=""):
    return SubsystemSpec(
        A=[[a]], B=[[b]], C=[[c]], W=[[w]], V=[[v]],
        x0_mean=[x0m], X0=[[x0c]], Q=[[q]], R=[[r]], Qf=[[qf]], name=name,
    )


def scalar_pair_env(horizon=3, reward_mode="error_penalty", a2=0.9):
    """Two scalar loops, one channel; loop 1 unstable, loop 2 stable."""
    return EnvConfig(
        specs=(scalar_spec(name="one"), scalar_spec(a=a2, name="two")),
        n_channels=1,
        horizon=horizon,
        reward_mode=reward_mode,
    )


@pytest.fixture(scope="session")
def benchmark3():
    """Packaged 3-subsystem benchmark (full 500-stage horizon)."""
    return load_experiment("experiment1")


@pytest.fixture(scope="session")
def benchmark3_short():
    """Packaged benchmark trimmed to a short horizon for fast env tests."""
    return load_experiment("experiment1", overrides=("env.horizon=40",))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
