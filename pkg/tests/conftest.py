import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from optomech.model import BathState, SystemParams, membrane_device

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def device():
    return membrane_device()


@pytest.fixture
def bae_device():
    """Sideband-resolved device with a narrow mechanical line."""
    return SystemParams.from_hz(5e9, 1e7, 5e4, 5e4, 1e-2, 10.0)


@pytest.fixture
def bath():
    return BathState(n_m_T=1089.0, n_I_T=0.386)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
