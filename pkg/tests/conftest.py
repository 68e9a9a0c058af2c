import numpy as np
import pytest

from orbitgauge.flows import FlowSpec, horospherical_frame


@pytest.fixture(scope="session")
def flow11():
    return FlowSpec.standard(1, 1)


@pytest.fixture(scope="session")
def frame11(flow11):
    return horospherical_frame(flow11, 1, 1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20250810)
