"""Logarithmic robust forward criterion fields and their dual objects.

Under quadratic ambiguity penalties with weight ``delta`` the robust
forward criterion of a log investor is

    U(x, t) = ln x + A_t,
    A_t = -1/2 int_0^t (delta_s / (1 + delta_s)) lambda_hat_s^2 ds,

with convex dual V(y, t) = -ln y - 1 + A_t.  The field is equivalent to a
standard (non-robust) forward criterion in a market whose price of risk is
the shrunk value lambda_bar = (delta / (1 + delta)) lambda_hat; the tilt
that connects the two is the worst-case generator.

Time integrals are evaluated with left-endpoint quadrature, which is exact
on the piecewise-constant coefficient paths used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .paths import CoefficientPaths, MarketCoefficients, TimeGrid, _as_coefficient_paths

if TYPE_CHECKING:
    from .measures import GeneratorPair, MeasureChange
    from .paths import Ensemble, WealthPaths

__all__ = [
    "CriterionField",
    "StandardForwardField",
    "CriterionProcess",
    "EquivalentFields",
    "field_log",
    "dual_eval",
    "conjugate_by_grid",
    "criterion_process",
    "equivalent_mpr",
    "equivalent_standard_fields",
]


@dataclass(frozen=True)
class CriterionField:
    """Log robust forward criterion: U(x, t) = ln x + A_t on a grid."""

    grid: TimeGrid
    coeffs: CoefficientPaths
    A: np.ndarray
    lambda_bar: np.ndarray

    def a_at(self, t: float) -> float:
        return float(self.A[self.grid.index_of(t)])

    def value(self, x, t: float):
        """U(x, t) for positive wealth x (scalar or array)."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("wealth must be strictly positive")
        out = np.log(x) + self.a_at(t)
        return float(out) if out.ndim == 0 else out

    def dual(self, y, t: float):
        """Convex dual V(y, t) = sup_x (U(x, t) - x y) = -ln y - 1 + A_t."""
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise ValueError("dual argument must be strictly positive")
        out = -np.log(y) - 1.0 + self.a_at(t)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StandardForwardField:
    """Non-robust log forward criterion ln x - 1/2 int m^2 ds for a market
    with price of risk ``m``."""

    grid: TimeGrid
    m: np.ndarray
    B: np.ndarray

    @classmethod
    def for_mpr(cls, grid: TimeGrid, m: np.ndarray) -> "StandardForwardField":
        m = np.asarray(m, dtype=float)
        drift = -0.5 * np.concatenate([[0.0], np.cumsum(m**2) * grid.dt])
        return cls(grid=grid, m=m, B=drift)

    def value(self, x, t: float):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("wealth must be strictly positive")
        out = np.log(x) + float(self.B[self.grid.index_of(t)])
        return float(out) if out.ndim == 0 else out


def field_log(coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid) -> CriterionField:
    """Build the log robust criterion field for the given market.

    The drift accumulator A is computed by left-endpoint quadrature, exact
    for piecewise-constant coefficients.
    """
    cp = _as_coefficient_paths(coeffs, grid)
    shrink = cp.delta / (1.0 + cp.delta)
    integrand = shrink * cp.lambda_hat**2
    A = -0.5 * np.concatenate([[0.0], np.cumsum(integrand) * grid.dt])
    lambda_bar = shrink * cp.lambda_hat
    return CriterionField(grid=grid, coeffs=cp, A=A, lambda_bar=lambda_bar)


def dual_eval(field: CriterionField, y, t: float):
    """Dual field value V(y, t); see ``CriterionField.dual``."""
    return field.dual(y, t)


def conjugate_by_grid(field: CriterionField, y: float, t: float, x_grid: np.ndarray) -> float:
    """Numerical conjugate sup_x (U(x, t) - x y) over an explicit x grid.

    Brute-force check for the closed-form dual; accuracy is limited by the
    grid, so use a wide log-spaced grid around 1/y.
    """
    if y <= 0:
        raise ValueError("dual argument must be strictly positive")
    x_grid = np.asarray(x_grid, dtype=float)
    vals = field.value(x_grid, t) - x_grid * y
    return float(np.max(vals))


@dataclass(frozen=True)
class CriterionProcess:
    """Candidate-criterion process along simulated paths.

    N_u = U(X_u, u) + accumulated penalty from the anchor time; under the
    worst-case generator and optimal strategy it is a martingale, under the
    reference measure with the optimal strategy it gains drift equal to the
    penalty rate of the worst case.
    """

    grid: TimeGrid
    anchor_index: int
    values: np.ndarray

    def at_index(self, k: int) -> np.ndarray:
        """Column of N at absolute grid index k (k >= anchor)."""
        if k < self.anchor_index:
            raise ValueError(f"index {k} precedes the anchor {self.anchor_index}")
        return self.values[:, k - self.anchor_index]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[self.anchor_index:]


def criterion_process(
    field: CriterionField,
    wealth: "WealthPaths",
    mc: "MeasureChange",
    t: float,
) -> CriterionProcess:
    """Build N_u = U(X_u, u) + int_t^u (delta_s / 2) |eta_s|^2 ds pathwise.

    The penalty accumulator uses the field's own delta, i.e. the quadratic
    penalty the field was built for.
    """
    grid = field.grid
    k0 = grid.index_of(t)
    dt = grid.dt
    rate = 0.5 * field.coeffs.delta * mc.eta.norm_sq() * dt
    pen = np.concatenate([[0.0], np.cumsum(rate[k0:])])
    values = wealth.log_X[:, k0:] + field.A[k0:] + pen
    return CriterionProcess(grid=grid, anchor_index=k0, values=values)


def equivalent_mpr(coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid) -> np.ndarray:
    """Price of risk of the equivalent standard market, per step."""
    cp = _as_coefficient_paths(coeffs, grid)
    return (cp.delta / (1.0 + cp.delta)) * cp.lambda_hat


@dataclass(frozen=True)
class EquivalentFields:
    """The standard forward criteria equivalent to a robust log field.

    ``standard`` is the non-robust log field of the market with price of
    risk lambda_bar (the worst-case market).  ``tilt_integral`` is
    A_t + int_0^t g(eta_bar) ds, which coincides with the standard field's
    drift accumulator; ``eta_bar`` is the connecting measure generator.
    Re-weighting the tilted field by the Doleans density of eta_bar gives
    the representation with respect to the original reference market.
    """

    field: CriterionField
    standard: StandardForwardField
    eta_bar: "GeneratorPair"
    tilt_integral: np.ndarray

    def reference_weight(self, ensemble: "Ensemble") -> "MeasureChange":
        """Density process that re-expresses the tilted field under the
        reference measure."""
        from .measures import doleans

        return doleans(self.eta_bar, ensemble)

    def max_identity_residual(self) -> float:
        """Max deviation between the tilt integral and the standard drift."""
        return float(np.max(np.abs(self.tilt_integral - self.standard.B)))


def equivalent_standard_fields(
    coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid
) -> EquivalentFields:
    """Express the robust log field as a tilted standard field.

    Returns the standard field for the shrunk price of risk, the worst-case
    generator connecting the two markets, and the accumulated tilt
    A_t + int g(eta_bar) ds (equal to -1/2 int lambda_bar^2 ds up to
    quadrature rounding).
    """
    from .measures import GeneratorPair

    cp = _as_coefficient_paths(coeffs, grid)
    fld = field_log(cp, grid)
    lambda_bar = fld.lambda_bar
    standard = StandardForwardField.for_mpr(grid, lambda_bar)
    eta1 = -cp.lambda_hat / (1.0 + cp.delta)
    eta_bar = GeneratorPair(eta1, np.zeros_like(eta1))
    g_rate = 0.5 * cp.delta * eta1**2
    tilt = fld.A + np.concatenate([[0.0], np.cumsum(g_rate) * grid.dt])
    return EquivalentFields(field=fld, standard=standard, eta_bar=eta_bar, tilt_integral=tilt)
