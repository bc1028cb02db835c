import numpy as np
import pytest

from robust_forward.paths import MarketCoefficients, TimeGrid


@pytest.fixture
def grid():
    return TimeGrid(horizon=1.0, n_steps=64)


@pytest.fixture
def market():
    # Flat benchmark market used throughout: sigma 0.2, market price of
    # risk 0.3, ambiguity weight 1.
    return MarketCoefficients(sigma=0.2, lambda_hat=0.3, delta=1.0)


@pytest.fixture
def varying_market(grid):
    # Time-varying coefficients exercising the per-step code paths.
    t = grid.times[:-1]
    return MarketCoefficients(
        sigma=0.15 + 0.1 * t,
        lambda_hat=lambda s: 0.25 + 0.2 * s,
        delta=0.8,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(911)
