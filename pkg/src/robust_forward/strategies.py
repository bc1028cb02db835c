"""Fractional allocation strategies.

A strategy maps an ensemble to the fraction of wealth held in the risky
asset on each step.  The robust-log-optimal rule is fractional Kelly: the
classical Kelly fraction lambda_hat / sigma shrunk by delta / (1 + delta),
where delta weights the ambiguity penalty.  Full trust (delta -> infinity)
recovers Kelly; no trust (delta = 0) stays out of the market.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import GeneratorPair
from .paths import CoefficientPaths, Ensemble, MarketCoefficients, TimeGrid, _as_coefficient_paths

__all__ = [
    "FractionalKelly",
    "ConstantFraction",
    "TabulatedStrategy",
    "ScaledStrategy",
    "fractional_kelly_fractions",
    "worst_case_generator",
    "restrict_strategy",
    "strategy_from_config",
]


@dataclass(frozen=True)
class FractionalKelly:
    """pi_k = (delta_k / (1 + delta_k)) lambda_hat_k / sigma_k, read off the
    ensemble's own coefficients."""

    @property
    def strategy_id(self) -> str:
        return "fractional_kelly"

    def fractions(self, ensemble: Ensemble) -> np.ndarray:
        cp = ensemble.coeffs
        return fractional_kelly_fractions(cp, cp.grid)


@dataclass(frozen=True)
class ConstantFraction:
    fraction: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.fraction):
            raise ValueError(f"fraction must be finite, got {self.fraction}")

    @property
    def strategy_id(self) -> str:
        return f"constant({self.fraction:g})"

    def fractions(self, ensemble: Ensemble) -> np.ndarray:
        return np.full(ensemble.grid.n_steps, self.fraction)


@dataclass(frozen=True)
class TabulatedStrategy:
    """Explicit per-step fractions."""

    table: np.ndarray
    label: str = "tabulated"

    def __post_init__(self) -> None:
        arr = np.atleast_1d(np.asarray(self.table, dtype=float))
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("table must be a finite 1-d array of fractions")
        object.__setattr__(self, "table", arr)

    @property
    def strategy_id(self) -> str:
        return self.label

    def fractions(self, ensemble: Ensemble) -> np.ndarray:
        if self.table.shape[0] != ensemble.grid.n_steps:
            raise ValueError(
                f"table has {self.table.shape[0]} steps, ensemble has {ensemble.grid.n_steps}"
            )
        return self.table


@dataclass(frozen=True)
class ScaledStrategy:
    """A base strategy with all fractions multiplied by a constant."""

    base: object
    factor: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.factor):
            raise ValueError(f"factor must be finite, got {self.factor}")

    @property
    def strategy_id(self) -> str:
        return f"scaled({self.factor:g})*{getattr(self.base, 'strategy_id', '?')}"

    def fractions(self, ensemble: Ensemble) -> np.ndarray:
        return self.factor * np.asarray(self.base.fractions(ensemble), dtype=float)


def fractional_kelly_fractions(
    coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid
) -> np.ndarray:
    """Per-step robust-log-optimal fractions for the given market."""
    cp = _as_coefficient_paths(coeffs, grid)
    shrink = cp.delta / (1.0 + cp.delta)
    return shrink * cp.lambda_hat / cp.sigma


def worst_case_generator(
    coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid
) -> GeneratorPair:
    """Saddle-point generator (-lambda_hat / (1 + delta), 0)."""
    cp = _as_coefficient_paths(coeffs, grid)
    eta1 = -cp.lambda_hat / (1.0 + cp.delta)
    return GeneratorPair(eta1, np.zeros_like(eta1))


def restrict_strategy(strategy, k0: int, k1: int):
    """Restriction of a strategy to steps k0..k1.

    Adaptive strategies restrict trivially; tabulated ones are sliced.
    """
    if isinstance(strategy, TabulatedStrategy):
        return TabulatedStrategy(strategy.table[k0:k1], label=strategy.label)
    if isinstance(strategy, ScaledStrategy):
        return ScaledStrategy(restrict_strategy(strategy.base, k0, k1), strategy.factor)
    return strategy


def strategy_from_config(cfg: dict):
    """Build a strategy from a JSON-style config block."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ValueError("strategy config must be a mapping with a 'type' key")
    kind = cfg["type"]
    if kind == "fractional_kelly":
        return FractionalKelly()
    if kind == "constant":
        return ConstantFraction(float(cfg["fraction"]))
    if kind == "tabulated":
        return TabulatedStrategy(np.asarray(cfg["fractions"], dtype=float))
    if kind == "scaled":
        return ScaledStrategy(strategy_from_config(cfg["base"]), float(cfg["factor"]))
    raise ValueError(f"unknown strategy type {kind!r}")
