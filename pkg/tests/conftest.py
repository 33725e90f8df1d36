import numpy as np
import pytest

from polarseq.codespec import CodeSpec


@pytest.fixture(scope="session")
def paper_spec16():
    """The (16,10) code used throughout the worked examples."""
    return CodeSpec.create(4, [0, 4, 8, 9, 10, 12])


@pytest.fixture(scope="session")
def example2_llrs():
    return np.array([0.44, 7.46, 7.19, 2.82, 5.63, 9.78, 6.06, -0.12,
                     -0.64, 9.38, 10.87, 13.0, 13.43, 9.43, 2.02, 13.2])


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")
