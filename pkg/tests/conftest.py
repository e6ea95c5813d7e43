import numpy as np
import pytest

from cgad.series import MultivariateSeries


def ar_process(n_nodes, length, rho=0.9, sigma=0.5, seed=0, burn=300):
    """Stationary independent AR(1) channels."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=(n_nodes, length + burn))
    x = np.zeros_like(noise)
    for t in range(1, length + burn):
        x[:, t] = rho * x[:, t - 1] + noise[:, t]
    return x[:, burn:]


@pytest.fixture
def small_series():
    values = np.array([[2.0, 4.0, 6.0, 8.0], [1.0, 3.0, 5.0, 7.0]])
    return MultivariateSeries(values, ("a", "b"))
