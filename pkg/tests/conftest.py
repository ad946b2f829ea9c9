import numpy as np
import pytest

from qjumps.engine import limit_blas_threads

limit_blas_threads()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
