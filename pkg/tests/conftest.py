# tests/conftest.py
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models import DiameterNetwork, build_profile  # noqa: E402
from phantoms import PhantomSpec, generate  # noqa: E402
from tensors import precision  # noqa: E402

TEST_FRAME = 64
TEST_PITCH = 0.125


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test with float64 parameters, as the gradient checks need."""
    with precision("float64"):
        yield


@pytest.fixture
def test_network():
    return DiameterNetwork(build_profile("test", "cgru"), seed=0)


@pytest.fixture
def framewise_network():
    return DiameterNetwork(build_profile("test", "framewise"), seed=0)


def make_phantom(length=40, seed=1, sequence_id="p1", **spec):
    """Noise-free test-profile phantom unless speckle/jitter are passed."""
    return generate(PhantomSpec(**spec), length, seed=seed, frame_size=TEST_FRAME, pixel_pitch=TEST_PITCH,
                    sequence_id=sequence_id)


@pytest.fixture
def phantom_sequence():
    return make_phantom()


@pytest.fixture
def phantom_set():
    """Four short test-profile sequences with distinct diameters and periods."""
    specs = [
        dict(d0_mm=3.5, amplitude_mm=0.3, period_frames=10),
        dict(d0_mm=4.5, amplitude_mm=0.5, period_frames=12),
        dict(d0_mm=5.0, amplitude_mm=0.4, period_frames=9),
        dict(d0_mm=4.0, amplitude_mm=0.2, period_frames=11),
    ]
    return {f"s{i}": make_phantom(length=30, seed=i, sequence_id=f"s{i}", **s) for i, s in enumerate(specs)}
