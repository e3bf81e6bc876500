import numpy as np
import pytest

from se23mef.lie import GroupElement, exp_so3


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_group(rng, scale=1.0) -> GroupElement:
    return GroupElement(exp_so3(rng.uniform(-2, 2, 3)), scale * rng.normal(size=3), 3 * scale * rng.normal(size=3))


def random_spd(rng, n=9, floor=0.5):
    M = rng.normal(size=(n, n))
    return M @ M.T + floor * np.eye(n)
