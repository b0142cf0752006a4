import numpy as np
import pytest

from trafficanomaly.media import Frame


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frame(rng, height, width, channels=1) -> Frame:
    return Frame(rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8))
