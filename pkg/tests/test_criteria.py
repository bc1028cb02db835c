import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_forward.criteria import (
    StandardForwardField,
    conjugate_by_grid,
    criterion_process,
    dual_eval,
    equivalent_mpr,
    equivalent_standard_fields,
    field_log,
)
from robust_forward.measures import GeneratorPair, doleans
from robust_forward.paths import MarketCoefficients, TimeGrid, simulate_ensemble, wealth_from_strategy
from robust_forward.strategies import FractionalKelly, fractional_kelly_fractions


# ---------------------------------------------------------------------------
# field construction
# ---------------------------------------------------------------------------

def test_drift_accumulator_flat_market(market, grid):
    field = field_log(market, grid)
    # shrink = 1/2, so A_t = -(1/4) * 0.09 * t
    np.testing.assert_allclose(field.A, -0.0225 * grid.times, rtol=1e-12)
    np.testing.assert_allclose(field.lambda_bar, 0.15)
    assert field.a_at(1.0) == pytest.approx(-0.0225, rel=1e-12)


def test_drift_accumulator_time_varying(grid):
    lam = lambda t: 0.2 + 0.3 * t
    field = field_log(MarketCoefficients(sigma=0.2, lambda_hat=lam, delta=3.0), grid)
    t_left = grid.times[:-1]
    expected = -0.5 * np.cumsum(0.75 * (0.2 + 0.3 * t_left) ** 2) * grid.dt
    np.testing.assert_allclose(field.A[1:], expected, rtol=1e-12)


def test_zero_delta_means_no_drift(grid):
    # delta = 0: no trust in the estimate, the criterion is plain ln x.
    field = field_log(MarketCoefficients(sigma=0.2, lambda_hat=0.3, delta=0.0), grid)
    np.testing.assert_array_equal(field.A, np.zeros(grid.n_steps + 1))
    np.testing.assert_array_equal(field.lambda_bar, np.zeros(grid.n_steps))


def test_value_and_dual_closed_forms(market, grid):
    field = field_log(market, grid)
    assert field.value(1.0, 0.0) == 0.0
    assert field.value(math.e, 0.0) == pytest.approx(1.0)
    x = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(field.value(x, 0.5), np.log(x) - 0.0225 * 0.5, rtol=1e-12)
    assert dual_eval(field, 1.0, 0.0) == pytest.approx(-1.0)
    assert field.dual(2.0, 1.0) == pytest.approx(-math.log(2.0) - 1.0 - 0.0225, rel=1e-12)


def test_domain_validation(market, grid):
    field = field_log(market, grid)
    with pytest.raises(ValueError):
        field.value(0.0, 0.0)
    with pytest.raises(ValueError):
        field.value(np.array([1.0, -2.0]), 0.0)
    with pytest.raises(ValueError):
        field.dual(0.0, 0.0)


# ---------------------------------------------------------------------------
# conjugacy
# ---------------------------------------------------------------------------

def test_grid_conjugate_matches_closed_form(market, grid):
    field = field_log(market, grid)
    for y in (0.3, 1.0, 4.0):
        x_grid = np.geomspace(1e-3 / y, 1e3 / y, 20001)
        num = conjugate_by_grid(field, y, 0.5, x_grid)
        assert num == pytest.approx(field.dual(y, 0.5), abs=1e-6)
        assert num <= field.dual(y, 0.5) + 1e-12  # grid max cannot exceed the sup


def test_conjugate_validates_y(market, grid):
    field = field_log(market, grid)
    with pytest.raises(ValueError):
        conjugate_by_grid(field, 0.0, 0.0, np.array([1.0]))


@given(
    x=st.floats(min_value=1e-6, max_value=1e6),
    y=st.floats(min_value=1e-6, max_value=1e6),
)
@settings(max_examples=200, deadline=None)
def test_fenchel_young(x, y):
    field = field_log(MarketCoefficients(0.2, 0.3, 1.0), TimeGrid(1.0, 4))
    lhs = field.value(x, 0.5)
    rhs = x * y + field.dual(y, 0.5)
    assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))
    # equality exactly on the hyperbola x y = 1
    eq = field.value(1.0 / y, 0.5)
    assert eq == pytest.approx((1.0 / y) * y + field.dual(y, 0.5), abs=1e-12)


# ---------------------------------------------------------------------------
# criterion process
# ---------------------------------------------------------------------------

def test_criterion_process_assembly(market, grid):
    ens = simulate_ensemble(market, grid, 8, 41)
    wealth = wealth_from_strategy(ens, FractionalKelly(), x0=2.0)
    field = field_log(market, grid)
    eta = GeneratorPair.on(grid, -0.15, 0.0)
    proc = criterion_process(field, wealth, doleans(eta, ens), t=0.25)

    k0 = grid.index_of(0.25)
    assert proc.anchor_index == k0
    np.testing.assert_allclose(proc.values[:, 0],
                               wealth.log_X[:, k0] + field.A[k0], atol=1e-14)
    # each step adds (delta/2)|eta|^2 dt = 0.5 * 0.0225 * dt of penalty
    pen_per_step = 0.5 * 0.0225 * grid.dt
    manual = (wealth.log_X[:, k0 + 3] + field.A[k0 + 3] + 3 * pen_per_step)
    np.testing.assert_allclose(proc.at_index(k0 + 3), manual, atol=1e-13)
    assert proc.times[0] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        proc.at_index(k0 - 1)


# ---------------------------------------------------------------------------
# equivalent standard criterion
# ---------------------------------------------------------------------------

def test_equivalent_mpr_shrinks(market, grid):
    np.testing.assert_allclose(equivalent_mpr(market, grid), 0.15)


def test_standard_field_accumulator(grid):
    m = np.full(grid.n_steps, 0.15)
    std = StandardForwardField.for_mpr(grid, m)
    np.testing.assert_allclose(std.B, -0.5 * 0.0225 * grid.times, rtol=1e-12)
    assert std.value(1.0, 1.0) == pytest.approx(-0.01125, rel=1e-12)
    with pytest.raises(ValueError):
        std.value(-1.0, 0.0)


def test_equivalence_fraction_identity(rng):
    # The shrunk price of risk over sigma IS the optimal fraction — same
    # expression tree, so equality is exact, even on rough random paths.
    grid = TimeGrid(1.0, 128)
    coeffs = MarketCoefficients(
        sigma=0.05 + 0.3 * rng.random(grid.n_steps),
        lambda_hat=rng.standard_normal(grid.n_steps),
        delta=3.0 * rng.random(grid.n_steps),
    ).realize(grid)
    eq = equivalent_standard_fields(coeffs, grid)
    pi = fractional_kelly_fractions(coeffs, grid)
    np.testing.assert_array_equal(eq.field.lambda_bar / coeffs.sigma, pi)


def test_equivalence_tilt_identity(rng):
    # A_t + int g(eta_bar) collapses to -1/2 int lambda_bar^2: the identity
    # holds to accumulated rounding on arbitrary coefficient paths.
    grid = TimeGrid(2.0, 200)
    coeffs = MarketCoefficients(
        sigma=0.05 + 0.3 * rng.random(grid.n_steps),
        lambda_hat=2.0 * rng.standard_normal(grid.n_steps),
        delta=4.0 * rng.random(grid.n_steps),
    ).realize(grid)
    eq = equivalent_standard_fields(coeffs, grid)
    assert eq.max_identity_residual() < 1e-14


def test_equivalence_connecting_generator(market, grid):
    eq = equivalent_standard_fields(market, grid)
    np.testing.assert_allclose(eq.eta_bar.eta1, -0.15)
    np.testing.assert_array_equal(eq.eta_bar.eta2, np.zeros(grid.n_steps))


def test_reference_weight_is_doleans(market, grid):
    eq = equivalent_standard_fields(market, grid)
    ens = simulate_ensemble(market, grid, 4, 9)
    w = eq.reference_weight(ens)
    manual = doleans(eq.eta_bar, ens)
    np.testing.assert_array_equal(w.log_D, manual.log_D)
