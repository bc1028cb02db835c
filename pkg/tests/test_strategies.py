import numpy as np
import pytest

from robust_forward.paths import MarketCoefficients, TimeGrid, simulate_ensemble
from robust_forward.strategies import (
    ConstantFraction,
    FractionalKelly,
    ScaledStrategy,
    TabulatedStrategy,
    fractional_kelly_fractions,
    restrict_strategy,
    strategy_from_config,
    worst_case_generator,
)


@pytest.fixture
def ensemble(market, grid):
    return simulate_ensemble(market, grid, 4, 1)


def test_fractional_kelly_flat(market, grid, ensemble):
    # shrink 1/2 of the Kelly fraction 0.3/0.2
    np.testing.assert_allclose(FractionalKelly().fractions(ensemble), 0.75)
    np.testing.assert_allclose(fractional_kelly_fractions(market, grid), 0.75)


def test_fractional_kelly_limits(grid):
    kelly = fractional_kelly_fractions(MarketCoefficients(0.2, 0.3, 1e12), grid)
    none = fractional_kelly_fractions(MarketCoefficients(0.2, 0.3, 0.0), grid)
    np.testing.assert_allclose(kelly, 1.5, rtol=1e-9)
    np.testing.assert_array_equal(none, np.zeros(grid.n_steps))


def test_fractional_kelly_reads_ensemble_coefficients(varying_market, grid):
    ens = simulate_ensemble(varying_market, grid, 2, 2)
    cp = ens.coeffs
    expected = (cp.delta / (1 + cp.delta)) * cp.lambda_hat / cp.sigma
    np.testing.assert_array_equal(FractionalKelly().fractions(ens), expected)


def test_worst_case_generator(market, grid):
    eta = worst_case_generator(market, grid)
    np.testing.assert_allclose(eta.eta1, -0.15)
    np.testing.assert_array_equal(eta.eta2, np.zeros(grid.n_steps))


def test_worst_case_shrinks_with_delta(grid):
    # delta -> 0 concentrates all distrust: the worst case removes the
    # whole price of risk; delta -> infinity trusts the reference fully.
    distrust = worst_case_generator(MarketCoefficients(0.2, 0.3, 0.0), grid)
    trust = worst_case_generator(MarketCoefficients(0.2, 0.3, 1e12), grid)
    np.testing.assert_allclose(distrust.eta1, -0.3)
    np.testing.assert_allclose(trust.eta1, 0.0, atol=1e-12)


def test_constant_and_tabulated(ensemble, grid):
    np.testing.assert_array_equal(
        ConstantFraction(0.4).fractions(ensemble), np.full(grid.n_steps, 0.4)
    )
    table = np.linspace(0.0, 1.0, grid.n_steps)
    np.testing.assert_array_equal(TabulatedStrategy(table).fractions(ensemble), table)
    with pytest.raises(ValueError, match="steps"):
        TabulatedStrategy(np.ones(3)).fractions(ensemble)
    with pytest.raises(ValueError):
        ConstantFraction(float("nan"))
    with pytest.raises(ValueError):
        TabulatedStrategy(np.array([0.1, np.inf]))


def test_scaled_strategy(ensemble):
    half_kelly = ScaledStrategy(FractionalKelly(), 0.5)
    np.testing.assert_allclose(half_kelly.fractions(ensemble), 0.375)
    assert "fractional_kelly" in half_kelly.strategy_id


def test_restrict_strategy():
    table = TabulatedStrategy(np.arange(10.0), label="ramp")
    sub = restrict_strategy(table, 2, 6)
    np.testing.assert_array_equal(sub.table, [2.0, 3.0, 4.0, 5.0])
    assert sub.label == "ramp"

    scaled = ScaledStrategy(table, 2.0)
    sub2 = restrict_strategy(scaled, 2, 6)
    np.testing.assert_array_equal(sub2.base.table, [2.0, 3.0, 4.0, 5.0])

    kelly = FractionalKelly()
    assert restrict_strategy(kelly, 0, 4) is kelly


def test_strategy_from_config(ensemble):
    assert isinstance(strategy_from_config({"type": "fractional_kelly"}), FractionalKelly)
    c = strategy_from_config({"type": "constant", "fraction": 0.25})
    assert c.fraction == 0.25
    t = strategy_from_config({"type": "tabulated", "fractions": [0.1, 0.2]})
    np.testing.assert_array_equal(t.table, [0.1, 0.2])
    s = strategy_from_config(
        {"type": "scaled", "factor": 2.0, "base": {"type": "constant", "fraction": 0.3}}
    )
    np.testing.assert_allclose(s.fractions(ensemble), 0.6)
    with pytest.raises(ValueError):
        strategy_from_config({"type": "martingale"})
    with pytest.raises(ValueError):
        strategy_from_config("fractional_kelly")
