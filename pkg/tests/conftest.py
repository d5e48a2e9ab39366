import numpy as np
import pytest

from opnormlab import specnorm


@pytest.fixture(scope="session", autouse=True)
def warm_exact_kernel():
    """Pay the JIT compile of the eigenvalue kernel before any timed test."""
    specnorm.opnorm_exact(np.ones((4, 4)))
