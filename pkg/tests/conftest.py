import numpy as np
import pytest

from luxprobe.envmap import EnvironmentMap


def hot_spot_env(height=64, row=None, col=None, value=100.0, base=0.01):
    """Map with a single bright texel on a dim background."""
    width = 2 * height
    data = np.full((height, width, 3), base)
    r = height // 2 if row is None else row
    c = width // 2 if col is None else col
    data[r, c] = value
    return EnvironmentMap(data)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
