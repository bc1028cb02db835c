"""Market scenario generation on a uniform time grid.

The reference market has one risky asset driven by the first component of a
two-dimensional Brownian motion,

    dS_u = S_u sigma_u (lambda_hat_u du + dW1_u),

with volatility ``sigma`` and market price of risk ``lambda_hat``.  The
second component ``W2`` carries no asset risk but matters for measure
changes.  Paths are simulated with the exact log-Euler scheme, so wealth
and asset positivity are structural rather than numerical.

Scenario noise comes from counter-based substreams: path ``p`` of an
ensemble with seed ``s`` always consumes the same draws, no matter how
many worker threads fill the ensemble.  An optional sampling drift
``eta = (eta1, eta2)`` shifts the stored increments to ``dW = xi + eta dt``
with ``xi`` i.i.d. Gaussian, which makes the stored paths an exact sample
from the measure generated by ``eta`` while still being expressed in
reference-measure coordinates.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from ._rng import substream

__all__ = [
    "TimeGrid",
    "MarketCoefficients",
    "CoefficientPaths",
    "Ensemble",
    "PathBundle",
    "WealthPaths",
    "WealthPath",
    "simulate_ensemble",
    "wealth_from_strategy",
    "ensemble_to_csv",
    "ensemble_manifest",
    "write_ensemble",
]

CoefficientLike = float | Sequence[float] | np.ndarray | Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# grid and coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] into ``n_steps`` steps."""

    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        """Grid points t_0 = 0, ..., t_{n_steps} = horizon."""
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Map a grid time to its index, rejecting off-grid times."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(t - k * self.dt) > 1e-8 * max(self.dt, 1.0):
            raise ValueError(f"t={t} is not a grid point of {self}")
        return k

    def span(self, k0: int, k1: int) -> "TimeGrid":
        """Grid covering steps k0..k1 with the same step size, re-anchored at 0."""
        if not (0 <= k0 < k1 <= self.n_steps):
            raise ValueError(f"invalid span [{k0}, {k1}] for {self}")
        return TimeGrid(horizon=(k1 - k0) * self.dt, n_steps=k1 - k0)


def _realize_one(name: str, value: CoefficientLike, grid: TimeGrid) -> np.ndarray:
    """Evaluate a coefficient on the left endpoints of the grid steps."""
    t_left = grid.times[:-1]
    if callable(value):
        out = np.asarray(value(t_left), dtype=float)
        if out.shape == ():
            out = np.full(grid.n_steps, float(out))
    else:
        out = np.asarray(value, dtype=float)
        if out.ndim == 0:
            out = np.full(grid.n_steps, float(out))
    if out.shape != (grid.n_steps,):
        raise ValueError(f"{name}: expected {grid.n_steps} per-step values, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name}: coefficient values must be finite")
    return out


@dataclass(frozen=True)
class MarketCoefficients:
    """Deterministic market coefficients: each entry is a constant, a per-step
    array, or a callable of time evaluated at step left endpoints."""

    sigma: CoefficientLike
    lambda_hat: CoefficientLike
    delta: CoefficientLike = 1.0

    def realize(self, grid: TimeGrid) -> "CoefficientPaths":
        sigma = _realize_one("sigma", self.sigma, grid)
        lam = _realize_one("lambda_hat", self.lambda_hat, grid)
        delta = _realize_one("delta", self.delta, grid)
        return CoefficientPaths(grid=grid, sigma=sigma, lambda_hat=lam, delta=delta)


@dataclass(frozen=True)
class CoefficientPaths:
    """Coefficients realized on a grid, one value per step."""

    grid: TimeGrid
    sigma: np.ndarray
    lambda_hat: np.ndarray
    delta: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_steps
        for name in ("sigma", "lambda_hat", "delta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be strictly positive")
        if np.any(self.delta < 0):
            raise ValueError("delta must be nonnegative")

    def restrict(self, k0: int, k1: int) -> "CoefficientPaths":
        """Coefficients for steps k0..k1 on the re-anchored span grid."""
        sub = self.grid.span(k0, k1)
        return CoefficientPaths(
            grid=sub,
            sigma=self.sigma[k0:k1].copy(),
            lambda_hat=self.lambda_hat[k0:k1].copy(),
            delta=self.delta[k0:k1].copy(),
        )


def _as_coefficient_paths(coeffs: MarketCoefficients | CoefficientPaths, grid: TimeGrid) -> CoefficientPaths:
    if isinstance(coeffs, CoefficientPaths):
        if coeffs.grid != grid:
            raise ValueError("coefficient paths were realized on a different grid")
        return coeffs
    return coeffs.realize(grid)


def _drift_arrays(drift, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray] | None:
    """Normalize a sampling drift to per-step arrays.

    Accepts None, an (eta1, eta2) pair of scalars/arrays, or any object with
    ``eta1``/``eta2`` attributes (e.g. a generator pair from the measures
    module).
    """
    if drift is None:
        return None
    if hasattr(drift, "eta1") and hasattr(drift, "eta2"):
        e1, e2 = drift.eta1, drift.eta2
    else:
        e1, e2 = drift
    eta1 = _realize_one("eta1", e1, grid)
    eta2 = _realize_one("eta2", e2, grid)
    if not np.any(eta1) and not np.any(eta2):
        return None
    return eta1, eta2


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ensemble:
    """A batch of simulated market paths sharing one grid and seed.

    ``dW1``/``dW2`` hold per-step Brownian increments in reference-measure
    coordinates; if ``drift_eta1`` is set, the increments were sampled with
    that drift added (scenario law is the generated measure, coordinates
    stay those of the reference measure).
    """

    grid: TimeGrid
    coeffs: CoefficientPaths
    dW1: np.ndarray
    dW2: np.ndarray
    S: np.ndarray
    seed: int
    drift_eta1: np.ndarray | None = None
    drift_eta2: np.ndarray | None = None
    antithetic: bool = False

    @property
    def n_paths(self) -> int:
        return self.dW1.shape[0]

    def bundle(self, path_id: int) -> "PathBundle":
        return PathBundle(
            grid=self.grid,
            coeffs=self.coeffs,
            path_id=path_id,
            dW1=self.dW1[path_id],
            dW2=self.dW2[path_id],
            S=self.S[path_id],
            seed=self.seed,
        )


@dataclass(frozen=True)
class PathBundle:
    """One simulated path: per-step increments plus the asset series."""

    grid: TimeGrid
    coeffs: CoefficientPaths
    path_id: int
    dW1: np.ndarray
    dW2: np.ndarray
    S: np.ndarray
    seed: int


def _fill_rows(dW1: np.ndarray, dW2: np.ndarray, seed: int, streams: range,
               n_steps: int, antithetic: bool) -> None:
    # Each stream draws a (2, n_steps) block; with antithetic pairing,
    # stream j feeds rows (2j, 2j+1) with opposite signs.
    for j in streams:
        z = substream(seed, j).standard_normal((2, n_steps))
        if antithetic:
            dW1[2 * j] = z[0]
            dW2[2 * j] = z[1]
            dW1[2 * j + 1] = -z[0]
            dW2[2 * j + 1] = -z[1]
        else:
            dW1[j] = z[0]
            dW2[j] = z[1]


def simulate_ensemble(
    coeffs: MarketCoefficients | CoefficientPaths,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    drift=None,
    antithetic: bool = False,
    n_workers: int | None = None,
    s0: float = 1.0,
) -> Ensemble:
    """Simulate an ensemble of market paths.

    Parameters
    ----------
    coeffs : MarketCoefficients or CoefficientPaths
        Market coefficients; realized on ``grid`` if necessary.
    grid : TimeGrid
        Uniform time grid.
    n_paths : int
        Number of paths; must be even when ``antithetic`` is set.
    seed : int
        Base seed.  Together with the path index it pins every draw.
    drift : optional
        Sampling drift ``eta``.  Stored increments are ``xi + eta dt`` so the
        ensemble is an exact sample from the measure generated by ``eta``.
    antithetic : bool
        Pair paths (2j, 2j+1) with mirrored Gaussian draws.
    n_workers : int, optional
        Worker threads used to fill the ensemble.  Output is byte-identical
        for any value.
    s0 : float
        Initial asset level.

    Returns
    -------
    Ensemble
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling requires an even n_paths")
    if not (s0 > 0 and np.isfinite(s0)):
        raise ValueError(f"s0 must be positive and finite, got {s0}")
    cp = _as_coefficient_paths(coeffs, grid)
    n_steps = grid.n_steps
    dt = grid.dt

    dW1 = np.empty((n_paths, n_steps))
    dW2 = np.empty((n_paths, n_steps))
    n_streams = n_paths // 2 if antithetic else n_paths
    workers = max(1, int(n_workers)) if n_workers else 1
    if workers == 1 or n_streams < 2 * workers:
        _fill_rows(dW1, dW2, seed, range(n_streams), n_steps, antithetic)
    else:
        # Disjoint row blocks per task; the stream keyed by (seed, j) is the
        # same whichever thread runs it.
        bounds = np.linspace(0, n_streams, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_fill_rows, dW1, dW2, seed, range(lo, hi), n_steps, antithetic)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for f in futures:
                f.result()

    sqrt_dt = np.sqrt(dt)
    dW1 *= sqrt_dt
    dW2 *= sqrt_dt
    d = _drift_arrays(drift, grid)
    if d is not None:
        dW1 += d[0] * dt
        dW2 += d[1] * dt

    # Exact log scheme; with a sampling drift the stored dW1 already carries
    # the eta1 dt shift, so S follows the shifted dynamics.
    log_incr = (cp.sigma * cp.lambda_hat - 0.5 * cp.sigma**2) * dt + cp.sigma * dW1
    log_S = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(log_incr, axis=1)], axis=1
    )
    S = s0 * np.exp(log_S)

    return Ensemble(
        grid=grid,
        coeffs=cp,
        dW1=dW1,
        dW2=dW2,
        S=S,
        seed=seed,
        drift_eta1=None if d is None else d[0],
        drift_eta2=None if d is None else d[1],
        antithetic=antithetic,
    )


# ---------------------------------------------------------------------------
# wealth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WealthPaths:
    """Self-financing wealth for every path of an ensemble."""

    grid: TimeGrid
    log_X: np.ndarray
    strategy_id: str
    fractions: np.ndarray

    @cached_property
    def X(self) -> np.ndarray:
        return np.exp(self.log_X)

    @property
    def n_paths(self) -> int:
        return self.log_X.shape[0]

    def path(self, path_id: int) -> "WealthPath":
        frac = self.fractions if self.fractions.ndim == 1 else self.fractions[path_id]
        return WealthPath(
            grid=self.grid,
            log_X=self.log_X[path_id],
            strategy_id=self.strategy_id,
            fractions=frac,
        )


@dataclass(frozen=True)
class WealthPath:
    """Wealth series for a single path."""

    grid: TimeGrid
    log_X: np.ndarray
    strategy_id: str
    fractions: np.ndarray

    @cached_property
    def X(self) -> np.ndarray:
        return np.exp(self.log_X)


def wealth_from_strategy(ensemble: Ensemble, strategy, x0: float = 1.0) -> WealthPaths:
    """Roll a fractional-allocation strategy through an ensemble.

    The strategy invests the fraction pi_k of current wealth in the asset
    over step k, so

        d ln X = pi sigma (lambda_hat dt + dW1) - pi^2 sigma^2 / 2 dt

    exactly, and wealth stays positive by construction.

    Parameters
    ----------
    ensemble : Ensemble
    strategy : object
        Must provide ``fractions(ensemble)`` returning per-step fractions,
        shape ``(n_steps,)`` or ``(n_paths, n_steps)``, and a ``strategy_id``.
    x0 : float
        Initial wealth, strictly positive.

    Returns
    -------
    WealthPaths
    """
    if not (x0 > 0 and np.isfinite(x0)):
        raise ValueError(f"x0 must be positive and finite, got {x0}")
    cp = ensemble.coeffs
    n_steps = ensemble.grid.n_steps
    pi = np.asarray(strategy.fractions(ensemble), dtype=float)
    if pi.ndim == 0:
        pi = np.full(n_steps, float(pi))
    if pi.shape not in {(n_steps,), (ensemble.n_paths, n_steps)}:
        raise ValueError(
            f"strategy fractions have shape {pi.shape}; expected ({n_steps},) "
            f"or ({ensemble.n_paths}, {n_steps})"
        )
    if not np.all(np.isfinite(pi)):
        raise ValueError("strategy fractions must be finite")

    dt = ensemble.grid.dt
    a = pi * cp.sigma
    log_incr = (a * cp.lambda_hat - 0.5 * a**2) * dt + a * ensemble.dW1
    if log_incr.ndim == 1:
        log_incr = np.broadcast_to(log_incr, (ensemble.n_paths, n_steps))
    log_X = np.concatenate(
        [np.zeros((ensemble.n_paths, 1)), np.cumsum(log_incr, axis=1)], axis=1
    ) + np.log(x0)
    return WealthPaths(
        grid=ensemble.grid,
        log_X=log_X,
        strategy_id=getattr(strategy, "strategy_id", type(strategy).__name__),
        fractions=pi,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def ensemble_to_csv(ensemble: Ensemble, path) -> None:
    """Write one row per grid point per path.

    Columns: path_id, k, t, S, dW1, dW2.  The increment columns at row k
    cover the step [t_k, t_{k+1}) and are empty on the terminal row.
    """
    times = ensemble.grid.times
    n_steps = ensemble.grid.n_steps
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path_id", "k", "t", "S", "dW1", "dW2"])
        for p in range(ensemble.n_paths):
            for k in range(n_steps + 1):
                if k < n_steps:
                    inc = [f"{ensemble.dW1[p, k]:.17g}", f"{ensemble.dW2[p, k]:.17g}"]
                else:
                    inc = ["", ""]
                writer.writerow(
                    [p, k, f"{times[k]:.17g}", f"{ensemble.S[p, k]:.17g}", *inc]
                )


def _coefficient_summary(cp: CoefficientPaths) -> dict:
    def summarize(arr: np.ndarray):
        first = float(arr[0])
        if np.all(arr == first):
            return first
        return [float(v) for v in arr]

    return {
        "sigma": summarize(cp.sigma),
        "lambda_hat": summarize(cp.lambda_hat),
        "delta": summarize(cp.delta),
    }


def ensemble_manifest(ensemble: Ensemble, strategy_id: str | None = None) -> dict:
    """JSON-serializable description sufficient to regenerate the ensemble."""
    manifest = {
        "seed": ensemble.seed,
        "n_paths": ensemble.n_paths,
        "antithetic": ensemble.antithetic,
        "grid": {"horizon": ensemble.grid.horizon, "n_steps": ensemble.grid.n_steps},
        "coefficients": _coefficient_summary(ensemble.coeffs),
    }
    if ensemble.drift_eta1 is not None:
        manifest["sampling_drift"] = {
            "eta1": [float(v) for v in ensemble.drift_eta1],
            "eta2": [float(v) for v in ensemble.drift_eta2],
        }
    if strategy_id is not None:
        manifest["strategy_id"] = strategy_id
    return manifest


def write_ensemble(ensemble: Ensemble, out_dir, basename: str = "paths",
                   strategy_id: str | None = None) -> dict:
    """Write the CSV and manifest for an ensemble; returns written file names."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{basename}.csv"
    manifest_path = out / f"{basename}_manifest.json"
    ensemble_to_csv(ensemble, csv_path)
    manifest = ensemble_manifest(ensemble, strategy_id)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return {"csv": str(csv_path), "manifest": str(manifest_path)}
