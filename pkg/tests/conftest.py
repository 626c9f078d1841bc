import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


def odd_tent(z):
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    return np.sign(z) * np.where(a <= 0.5, a, np.where(a <= 1, 1 - a, 0.0))


@pytest.fixture
def tent_kernel():
    from hpweights.kernel_family import TestKernel
    return TestKernel.from_function(lambda z: odd_tent(z[:, 0]), 201, 1.0)
