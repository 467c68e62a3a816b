import numpy as np
import pytest

from coevkm import FourierFunction, ModelSpec, OmegaSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def ring_model():
    """g = sin 2 pi u, h = -1, eps = 1, constant unit rates."""
    return ModelSpec(1.0, FourierFunction.sin(), FourierFunction.constant(-1.0),
                     OmegaSpec.constant(1.0))


def circ_diff(a, b):
    """Signed shortest-arc difference of phase arrays."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


def circ_err(a, b):
    return float(np.abs(circ_diff(a, b)).max())
