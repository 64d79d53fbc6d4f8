import numpy as np
import pytest


def _camera():
    from skimage import data

    return data.camera().astype(np.float64)


@pytest.fixture(scope="session")
def cameraman512():
    return _camera() / 255.0


@pytest.fixture(scope="session")
def cameraman256():
    # 2x2 box downsample, re-quantized to 8 bits like a stored PNG
    img = _camera().reshape(256, 2, 256, 2).mean(axis=(1, 3))
    return np.floor(img + 0.5) / 255.0


def half_checkerboard(n=256, square=2, split=None, const=0.5):
    """Left half constant, right half a checkerboard of ``square``-pixel squares."""
    split = n // 2 if split is None else split
    yy, xx = np.mgrid[:n, :n]
    img = np.full((n, n), const)
    board = ((yy // square + xx // square) % 2).astype(float)
    img[:, split:] = board[:, split:]
    return img


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
