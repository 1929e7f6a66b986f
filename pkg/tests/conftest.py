import numpy as np
import pytest

from heatchain import ChainParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_params(rng, n, T_zero_ok=False):
    """One random physically valid parameter set at size n."""
    return ChainParams(
        n=n,
        gamma=float(rng.uniform(0.4, 2.5)),
        gamma_tilde=float(rng.uniform(0.4, 2.5)),
        tau_plus=float(rng.uniform(-1.5, 1.5)),
        T_minus=float(rng.uniform(0.0 if T_zero_ok else 0.3, 2.0)),
        T_plus=float(rng.uniform(0.0 if T_zero_ok else 0.3, 2.0)),
    )
