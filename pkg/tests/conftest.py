import numpy as np
import pytest

from attnsample import Condition, NoiseSchedule, ToyDenoiser
from attnsample import rng as rngmod


@pytest.fixture(scope="session")
def noise_schedule():
    return NoiseSchedule.scaled_linear()


@pytest.fixture(scope="session")
def toy_denoiser():
    return ToyDenoiser.randomized(seed=0)


@pytest.fixture()
def source_image():
    return rngmod.stream(42, "src-img").random((16, 16, 3)).astype(np.float32)


@pytest.fixture()
def condition(source_image):
    return Condition(pose=[0.2, 1.1, 0.0], source_image=source_image)
