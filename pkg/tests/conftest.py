import numpy as np
import pytest
from scipy import ndimage
from skimage import data

from r2fd2.imaging import LUMA_WEIGHTS


@pytest.fixture(scope="session")
def camera() -> np.ndarray:
    return data.camera().astype(np.float64) / 255.0


@pytest.fixture(scope="session")
def astronaut() -> np.ndarray:
    return (data.astronaut().astype(np.float64) @ np.array(LUMA_WEIGHTS)) / 255.0


@pytest.fixture(scope="session")
def natural_images(camera, astronaut) -> dict[str, np.ndarray]:
    return {"camera": camera, "astronaut": astronaut}


def smooth_texture(shape=(256, 256), sigma=2.0, seed=1) -> np.ndarray:
    """Band-limited random texture scaled to [0, 1]."""
    g = ndimage.gaussian_filter(np.random.default_rng(seed).normal(size=shape), sigma)
    return (g - g.min()) / np.ptp(g)


@pytest.fixture(scope="session")
def texture() -> np.ndarray:
    return smooth_texture()
