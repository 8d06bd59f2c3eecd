import numpy as np
import pytest

from segctc import kernels, scrf
from segctc.numerics import rng_for


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    with kernels.use_backend(request.param):
        yield request.param


def random_scrf(seed, T, Y, state_dim=2, scale=0.5, feature_layers=1):
    rng = rng_for(seed, 999)
    params = scrf.init_scrf(Y, state_dim, embed_dim=3, feature_dim=4, feature_layers=feature_layers,
                            seed=seed)
    for a in params.named_arrays().values():
        a += rng.normal(scale=scale, size=a.shape)
    return rng.normal(size=(T, state_dim)), params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
