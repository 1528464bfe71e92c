import numpy as np
import pytest

from ocdl import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test under every available kernel backend."""
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend("auto")


def write_pgm(path, values):
    """Write a [0, 1] float array as a binary P5 PGM with maxval 255."""
    values = np.asarray(values)
    pixels = np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(pixels.tobytes())
    return path


@pytest.fixture
def pgm_writer():
    return write_pgm
