import numpy as np
import pytest

from flowgp.config import DEFAULT_BOX
from flowgp.design import Box
from flowgp.dynamics import hindmarsh_rose, lorenz, van_der_pol
from flowgp.emulator import train


def default_box(sys):
    return Box(*DEFAULT_BOX[sys.kind])


@pytest.fixture(scope="session")
def lorenz_em():
    sys = lorenz()
    return train(sys, 45, default_box(sys), 0.01, seed=0)


@pytest.fixture(scope="session")
def vdp_em():
    sys = van_der_pol(a=5.0)
    return train(sys, 30, default_box(sys), 0.01, seed=0)


@pytest.fixture(scope="session")
def hr_em():
    sys = hindmarsh_rose()
    return train(sys, 45, default_box(sys), 0.01, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
