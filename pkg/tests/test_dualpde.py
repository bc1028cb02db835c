"""Dual drift relation and HJB residual diagnostics."""

import math

import numpy as np
import pytest

from robust_forward.dualpde import (
    CappedQuadraticIntegrand,
    QuadraticIntegrand,
    TabulatedIntegrand,
    dense_grid_drift,
    drift_from_relation,
    hjb_residual,
    log_curvature,
    polynomial_mpr_accumulator,
    sample_dual_field,
)


class TestIntegrands:
    def test_quadratic_value_and_validation(self):
        g = QuadraticIntegrand(1.4)
        assert g(0.3, -0.4) == pytest.approx(0.5 * 1.4 * 0.25, abs=1e-15)
        with pytest.raises(ValueError):
            QuadraticIntegrand(-0.1)
        with pytest.raises(ValueError):
            QuadraticIntegrand(math.inf)

    def test_capped_disc(self):
        g = CappedQuadraticIntegrand(0.5, scale=2.0)
        assert g(0.3, 0.4) == pytest.approx(2.0 * 0.25, abs=1e-15)
        with pytest.raises(ValueError, match="admissible disc"):
            g(0.4, 0.4)
        with pytest.raises(ValueError):
            CappedQuadraticIntegrand(0.0)
        with pytest.raises(ValueError):
            CappedQuadraticIntegrand(1.0, scale=-1.0)

    def test_tabulated_validation(self):
        with pytest.raises(ValueError, match="shape"):
            TabulatedIntegrand(
                np.array([0.0, 1.0]), np.array([0.0]), np.array([[0.0]])
            )
        with pytest.raises(ValueError, match="finite"):
            TabulatedIntegrand(
                np.array([0.0]), np.array([0.0]), np.array([[math.nan]])
            )

    def test_point_mass(self):
        g = TabulatedIntegrand.point_mass()
        assert g.eta1_grid.tolist() == [0.0]
        assert g.eta2_grid.tolist() == [0.0]
        assert g.values.tolist() == [[0.0]]


class TestDriftRelation:
    @pytest.mark.parametrize(
        "delta,lam", [(1.0, 0.3), (0.5, 0.3), (2.0, 0.15), (1.0, 0.0)]
    )
    def test_quadratic_closed_form(self, delta, lam):
        res = drift_from_relation(QuadraticIntegrand(delta), (0.0, 0.0), lam)
        assert not res.unbounded
        assert res.method == "nested-golden"
        assert res.b == pytest.approx(
            -delta * lam**2 / (2.0 * (1.0 + delta)), abs=1e-10
        )
        e1, e2 = res.minimizer
        assert e1 == pytest.approx(-lam / (1.0 + delta), abs=1e-6)
        assert e2 == pytest.approx(0.0, abs=1e-6)

    def test_quadratic_with_linear_term(self):
        # separable: eta1* = -(lam + a1)/(1 + delta), eta2* = -a2/delta
        res = drift_from_relation(QuadraticIntegrand(1.0), (0.1, 0.2), 0.3)
        assert res.b == pytest.approx(0.015, abs=1e-10)
        assert res.minimizer[0] == pytest.approx(-0.2, abs=1e-6)
        assert res.minimizer[1] == pytest.approx(-0.2, abs=1e-6)

    def test_penalty_free_removes_drift(self):
        res = drift_from_relation(QuadraticIntegrand(0.0), (0.0, 0.0), 0.3)
        assert res.b == pytest.approx(0.0, abs=1e-12)
        assert res.minimizer[0] == pytest.approx(-0.3, abs=1e-6)

    def test_noncoercive_is_reported_unbounded(self):
        res = drift_from_relation(QuadraticIntegrand(0.0), (0.0, 0.5), 0.3)
        assert res.unbounded
        assert res.b is None
        assert res.minimizer is None
        assert res.method == "coercivity-check"
        dense = dense_grid_drift(QuadraticIntegrand(0.0), (0.0, 0.5), 0.3)
        assert dense.unbounded

    def test_capped_boundary_minimum(self):
        # unconstrained minimizer -0.3 lies outside the 0.1 disc
        res = drift_from_relation(
            CappedQuadraticIntegrand(0.1, scale=0.0), (0.0, 0.0), 0.3
        )
        assert res.b == pytest.approx(-0.02, abs=1e-9)
        assert res.minimizer[0] == pytest.approx(-0.1, abs=1e-6)

    def test_capped_interior_matches_quadratic(self):
        # scale = delta/2 makes the capped integrand agree with the
        # quadratic one wherever the disc is not binding
        res = drift_from_relation(
            CappedQuadraticIntegrand(5.0, scale=0.5), (0.0, 0.0), 0.3
        )
        assert res.b == pytest.approx(-0.0225, abs=1e-10)
        dense = dense_grid_drift(
            CappedQuadraticIntegrand(5.0, scale=0.5), (0.0, 0.0), 0.3
        )
        assert dense.b == pytest.approx(res.b, abs=1e-9)

    def test_tabulated_exact_scan(self):
        tab = TabulatedIntegrand(
            np.array([-0.3, -0.15, 0.0]),
            np.array([0.0]),
            np.array([[0.02], [0.005], [0.0]]),
        )
        res = drift_from_relation(tab, (0.0, 0.0), 0.3)
        assert res.method == "table-scan"
        assert res.b == -0.01625  # exact: min over three nodes
        assert res.minimizer == (-0.15, 0.0)
        # the dense route delegates tables to the exact scan
        assert dense_grid_drift(tab, (0.0, 0.0), 0.3).method == "table-scan"

    def test_point_mass_pins_reference_drift(self):
        res = drift_from_relation(
            TabulatedIntegrand.point_mass(), (0.0, 0.0), 0.3
        )
        assert res.b == pytest.approx(-0.045, abs=1e-15)

    def test_dense_grid_agrees_with_nested_golden(self):
        g = QuadraticIntegrand(1.0)
        golden = drift_from_relation(g, (0.07, -0.11), 0.3)
        dense = dense_grid_drift(g, (0.07, -0.11), 0.3)
        assert dense.method == "dense-grid"
        assert dense.b == pytest.approx(golden.b, abs=1e-9)

    def test_dense_grid_needs_disc_coverage(self):
        with pytest.raises(ValueError, match="misses the admissible disc"):
            dense_grid_drift(
                CappedQuadraticIntegrand(1.0), (0.0, 0.0), 0.3, n=4
            )

    def test_input_validation(self):
        with pytest.raises(ValueError, match="finite"):
            drift_from_relation(QuadraticIntegrand(1.0), (math.nan, 0.0), 0.3)
        with pytest.raises(TypeError, match="unknown integrand"):
            drift_from_relation(lambda e1, e2: 0.0, (0.0, 0.0), 0.3)

    def test_result_serializes(self):
        res = drift_from_relation(QuadraticIntegrand(1.0), (0.0, 0.0), 0.3)
        obj = res.to_json()
        assert obj["b"] == res.b
        assert obj["minimizer"] == list(res.minimizer)
        assert obj["unbounded"] is False


@pytest.fixture
def y_grid():
    return np.geomspace(0.5, 2.0, 41)


class TestHjbResidual:
    def field(self, y, n_t, slope=0.0, scale=1.0, delta=1.0):
        t = np.linspace(0.0, 1.0, n_t)
        a = polynomial_mpr_accumulator(0.3, slope, delta)
        V = sample_dual_field(lambda s: scale * a(s), y, t)
        return V, t

    def test_exact_field_residual_at_noise_floor(self, y_grid):
        V, t = self.field(y_grid, 17)
        rep = hjb_residual(V, y_grid, t, QuadraticIntegrand(1.0), 0.3)
        assert rep.max_abs <= rep.condition
        assert rep.residuals.shape == (39, 16)

    def test_first_order_rate_in_time_step(self, y_grid):
        lam = lambda s: 0.3 + 0.12 * s
        maxima = []
        for n_t in (9, 17, 33, 65):
            V, t = self.field(y_grid, n_t, slope=0.12)
            rep = hjb_residual(V, y_grid, t, QuadraticIntegrand(1.0), lam)
            maxima.append(rep.max_abs)
        ratios = [a / b for a, b in zip(maxima, maxima[1:])]
        assert all(1.8 <= r <= 2.2 for r in ratios)

    def test_negative_control_bounded_away_from_zero(self, y_grid):
        # a field with the wrong drift keeps a residual of fixed size
        # under refinement instead of converging
        lam = lambda s: 0.3 + 0.12 * s
        maxima = []
        for n_t in (17, 33):
            V, t = self.field(y_grid, n_t, slope=0.12, scale=1.5)
            rep = hjb_residual(V, y_grid, t, QuadraticIntegrand(1.0), lam)
            maxima.append(rep.max_abs)
        assert all(m >= 1e-3 for m in maxima)
        assert maxima[1] >= 0.9 * maxima[0]

    def test_lambda_hat_forms_agree(self, y_grid):
        V, t = self.field(y_grid, 9)
        g = QuadraticIntegrand(1.0)
        scalar = hjb_residual(V, y_grid, t, g, 0.3)
        array = hjb_residual(V, y_grid, t, g, np.full(8, 0.3))
        from_callable = hjb_residual(V, y_grid, t, g, lambda s: 0.3)
        np.testing.assert_array_equal(scalar.residuals, array.residuals)
        np.testing.assert_array_equal(scalar.residuals, from_callable.residuals)

    def test_concave_field_rejected(self, y_grid):
        t = np.linspace(0.0, 1.0, 9)
        V = (np.log(y_grid) - 1.0)[:, None] + np.zeros(9)[None, :]
        with pytest.raises(ValueError, match="not strictly convex"):
            hjb_residual(V, y_grid, t, QuadraticIntegrand(1.0), 0.3)

    def test_grid_validation(self, y_grid):
        V, t = self.field(y_grid, 9)
        with pytest.raises(ValueError, match="log-spaced"):
            hjb_residual(
                V, np.linspace(0.5, 2.0, 41), t, QuadraticIntegrand(1.0), 0.3
            )
        with pytest.raises(ValueError, match="shape"):
            hjb_residual(V[:-1], y_grid, t, QuadraticIntegrand(1.0), 0.3)
        with pytest.raises(ValueError, match="per-step"):
            hjb_residual(
                V, y_grid, t, QuadraticIntegrand(1.0), np.full(5, 0.3)
            )
        with pytest.raises(ValueError, match="uniform"):
            hjb_residual(
                V, y_grid, np.geomspace(0.1, 1.0, 9),
                QuadraticIntegrand(1.0), 0.3,
            )

    def test_report_outputs(self, y_grid, tmp_path):
        V, t = self.field(y_grid, 9)
        rep = hjb_residual(V, y_grid, t, QuadraticIntegrand(1.0), 0.3)
        obj = rep.to_json()
        assert obj["max_abs"] == rep.max_abs
        assert obj["shape"] == [39, 8]
        out = tmp_path / "residuals.csv"
        rep.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "y,t,residual"
        assert len(lines) == 1 + 39 * 8


class TestLogCurvature:
    def test_second_order_on_log_field(self):
        # y^2 V_yy = 1 exactly for V = -ln y; the direct non-uniform
        # stencil converges at second order in the log spacing
        errs = []
        for m in (41, 81):
            y = np.geomspace(0.5, 2.0, m)
            c = log_curvature(-np.log(y), y)
            errs.append(float(np.max(np.abs(c - 1.0))))
        assert errs[0] > 1e-5  # genuinely inexact on the coarse grid
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.3)

    def test_matrix_input(self):
        y = np.geomspace(0.5, 2.0, 21)
        V = (-np.log(y))[:, None] + np.array([0.0, 1.0])[None, :]
        c = log_curvature(V, y)
        assert c.shape == (19, 2)
        np.testing.assert_allclose(c[:, 0], c[:, 1], atol=1e-12)


class TestSamplers:
    def test_sample_dual_field_values(self):
        y = np.geomspace(0.5, 2.0, 5)
        t = np.array([0.0, 0.5, 1.0])
        V = sample_dual_field(lambda s: -0.01 * s, y, t)
        assert V.shape == (5, 3)
        i = int(np.argmin(np.abs(y - 1.0)))
        assert V[i, 0] == pytest.approx(-np.log(y[i]) - 1.0, abs=1e-15)
        assert V[0, 2] - V[0, 0] == pytest.approx(-0.01, abs=1e-15)
        with pytest.raises(ValueError, match="positive"):
            sample_dual_field(lambda s: 0.0, np.array([-1.0, 1.0]), t)

    def test_accumulator_matches_quadrature(self):
        from scipy.integrate import quad

        base, slope, delta = 0.3, 0.12, 0.8
        a = polynomial_mpr_accumulator(base, slope, delta)
        shrink = delta / (1.0 + delta)
        for t in (0.25, 1.0, 2.0):
            integral, _ = quad(lambda s: (base + slope * s) ** 2, 0.0, t)
            assert a(t) == pytest.approx(-0.5 * shrink * integral, abs=1e-12)
        with pytest.raises(ValueError):
            polynomial_mpr_accumulator(0.3, 0.1, -1.0)
