"""Measure changes and penalty functionals.

A candidate measure is generated by a two-dimensional drift process
``eta = (eta1, eta2)`` through the Doleans exponential of
``int eta1 dW1 + int eta2 dW2``.  Penalties price the distance of such a
measure from the reference measure.  Four penalty families are supported:

* quadratic: gamma = E^Q int (delta_u / 2) |eta_u|^2 du
* entropic: gamma = delta * relative entropy of Q w.r.t. the reference
* degenerate: a single admitted generator per investment horizon, with a
  fixed (possibly negative) penalty value
* reference-only: only the zero generator is admitted

Inadmissible generators get an infinite penalty.  Infinities are carried
as an explicit flag on the report, never as floating-point ``inf`` inside
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .paths import CoefficientLike, Ensemble, TimeGrid, _realize_one

__all__ = [
    "GeneratorPair",
    "MeasureChange",
    "StateDensity",
    "QuadraticPenalty",
    "EntropicPenalty",
    "DegeneratePenalty",
    "ReferenceOnlyPenalty",
    "PenaltyReport",
    "CocycleReport",
    "doleans",
    "state_density",
    "girsanov_shift",
    "penalty_value",
    "cocycle_residual",
]


# ---------------------------------------------------------------------------
# generators and densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorPair:
    """Per-step drift generator (eta1, eta2) of a candidate measure."""

    eta1: np.ndarray
    eta2: np.ndarray

    def __post_init__(self) -> None:
        e1 = np.atleast_1d(np.asarray(self.eta1, dtype=float))
        e2 = np.atleast_1d(np.asarray(self.eta2, dtype=float))
        if e1.shape != e2.shape or e1.ndim != 1:
            raise ValueError(f"eta components must be 1-d of equal length, got {e1.shape}, {e2.shape}")
        if not (np.all(np.isfinite(e1)) and np.all(np.isfinite(e2))):
            raise ValueError("generator components must be finite")
        object.__setattr__(self, "eta1", e1)
        object.__setattr__(self, "eta2", e2)

    @classmethod
    def on(cls, grid: TimeGrid, eta1: CoefficientLike, eta2: CoefficientLike = 0.0) -> "GeneratorPair":
        return cls(_realize_one("eta1", eta1, grid), _realize_one("eta2", eta2, grid))

    @property
    def n_steps(self) -> int:
        return self.eta1.shape[0]

    def scaled(self, c: float) -> "GeneratorPair":
        return GeneratorPair(c * self.eta1, c * self.eta2)

    def norm_sq(self) -> np.ndarray:
        return self.eta1**2 + self.eta2**2

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.eta1) <= atol) and np.all(np.abs(self.eta2) <= atol))


def _check_generator(eta: GeneratorPair, grid: TimeGrid) -> GeneratorPair:
    if eta.n_steps != grid.n_steps:
        raise ValueError(f"generator has {eta.n_steps} steps, grid has {grid.n_steps}")
    return eta


@dataclass(frozen=True)
class MeasureChange:
    """Doleans density of the measure generated by ``eta`` along an ensemble."""

    eta: GeneratorPair
    log_D: np.ndarray

    @cached_property
    def D(self) -> np.ndarray:
        return np.exp(self.log_D)

    def log_D_between(self, k0: int, k1: int) -> np.ndarray:
        return self.log_D[:, k1] - self.log_D[:, k0]


@dataclass(frozen=True)
class StateDensity:
    """Density of an equivalent martingale measure, parametrized by the
    orthogonal drift ``nu``: the generator is (-lambda_hat, -nu)."""

    nu: np.ndarray
    log_Z: np.ndarray

    @cached_property
    def Z(self) -> np.ndarray:
        return np.exp(self.log_Z)

    def log_Z_between(self, k0: int, k1: int) -> np.ndarray:
        return self.log_Z[:, k1] - self.log_Z[:, k0]


def _log_doleans(eta: GeneratorPair, ensemble: Ensemble) -> np.ndarray:
    dt = ensemble.grid.dt
    incr = (
        eta.eta1 * ensemble.dW1
        + eta.eta2 * ensemble.dW2
        - 0.5 * eta.norm_sq() * dt
    )
    n_paths = incr.shape[0]
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(incr, axis=1)], axis=1)


def doleans(eta: GeneratorPair, ensemble: Ensemble) -> MeasureChange:
    """Stochastic exponential of the generator along each path.

    The stored increments are always reference-measure coordinates, so the
    same formula applies whether or not the ensemble was sampled with a
    drift.
    """
    _check_generator(eta, ensemble.grid)
    return MeasureChange(eta=eta, log_D=_log_doleans(eta, ensemble))


def state_density(ensemble: Ensemble, nu: CoefficientLike = 0.0) -> StateDensity:
    """Martingale-measure density with orthogonal component ``nu``."""
    nu_arr = _realize_one("nu", nu, ensemble.grid)
    eta = GeneratorPair(-ensemble.coeffs.lambda_hat, -nu_arr)
    return StateDensity(nu=nu_arr, log_Z=_log_doleans(eta, ensemble))


def girsanov_shift(ensemble: Ensemble, eta: GeneratorPair) -> Ensemble:
    """Re-express an ensemble in the coordinates of the measure generated
    by ``eta``.

    The paths themselves are unchanged: the asset series is kept, the
    increments lose the eta dt drift, and the market price of risk absorbs
    eta1.  If the ensemble was sampled with drift ``mu``, the re-expressed
    ensemble carries sampling drift ``mu - eta`` (None when that is zero).
    """
    _check_generator(eta, ensemble.grid)
    if eta.is_zero():
        return ensemble
    dt = ensemble.grid.dt
    cp = ensemble.coeffs
    new_coeffs = type(cp)(
        grid=cp.grid,
        sigma=cp.sigma.copy(),
        lambda_hat=cp.lambda_hat + eta.eta1,
        delta=cp.delta.copy(),
    )
    mu1 = ensemble.drift_eta1 if ensemble.drift_eta1 is not None else 0.0
    mu2 = ensemble.drift_eta2 if ensemble.drift_eta2 is not None else 0.0
    res1 = np.atleast_1d(mu1 - eta.eta1)
    res2 = np.atleast_1d(mu2 - eta.eta2)
    if res1.shape != (ensemble.grid.n_steps,):
        res1 = np.broadcast_to(res1, (ensemble.grid.n_steps,)).copy()
    if res2.shape != (ensemble.grid.n_steps,):
        res2 = np.broadcast_to(res2, (ensemble.grid.n_steps,)).copy()
    residual_zero = not np.any(res1) and not np.any(res2)
    return Ensemble(
        grid=ensemble.grid,
        coeffs=new_coeffs,
        dW1=ensemble.dW1 - eta.eta1 * dt,
        dW2=ensemble.dW2 - eta.eta2 * dt,
        S=ensemble.S,
        seed=ensemble.seed,
        drift_eta1=None if residual_zero else res1,
        drift_eta2=None if residual_zero else res2,
        antithetic=ensemble.antithetic,
    )


# ---------------------------------------------------------------------------
# penalties
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticPenalty:
    """gamma_{t,T}(Q) = E^Q int_t^T (delta_u / 2) |eta_u|^2 du."""

    delta: CoefficientLike = 1.0
    kind: str = field(default="quadratic", init=False)


@dataclass(frozen=True)
class EntropicPenalty:
    """gamma_{t,T}(Q) = delta * H(Q | reference), delta a positive constant."""

    delta: float = 1.0
    kind: str = field(default="entropic", init=False)

    def __post_init__(self) -> None:
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError(f"entropic delta must be positive and finite, got {self.delta}")


@dataclass(frozen=True)
class DegeneratePenalty:
    """One admitted generator per horizon.

    For the horizon (t, T) the only admitted generator is the constant pair
    (lambda[t, T], 0), at penalty -(T - t) lambda^2 / 2; every other
    generator is infinitely penalized.  Horizons missing from the table
    have no admitted generator at all.
    """

    table: Mapping[tuple[float, float], float]
    kind: str = field(default="degenerate", init=False)

    def lookup(self, t: float, T: float) -> float | None:
        for (a, b), lam in self.table.items():
            if abs(a - t) <= 1e-9 and abs(b - T) <= 1e-9:
                return float(lam)
        return None


@dataclass(frozen=True)
class ReferenceOnlyPenalty:
    """Only the reference measure is admitted (zero generator, zero penalty)."""

    kind: str = field(default="reference_only", init=False)


PenaltySpec = QuadraticPenalty | EntropicPenalty | DegeneratePenalty | ReferenceOnlyPenalty


@dataclass(frozen=True)
class PenaltyReport:
    """Estimated penalty over [t, T].

    ``is_infinite`` marks an inadmissible generator; in that case
    ``estimate`` and ``stderr`` are None.
    """

    kind: str
    t: float
    T: float
    estimate: float | None
    stderr: float | None
    n_paths: int
    is_infinite: bool = False
    note: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "t": self.t,
            "T": self.T,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "is_infinite": self.is_infinite,
            "note": self.note,
        }


def _infinite(kind: str, t: float, T: float, n_paths: int, note: str) -> PenaltyReport:
    return PenaltyReport(
        kind=kind, t=t, T=T, estimate=None, stderr=None,
        n_paths=n_paths, is_infinite=True, note=note,
    )


def _sampling_log_density(ensemble: Ensemble, k0: int, k1: int) -> np.ndarray | float:
    """Log density of the sampling measure over steps [k0, k1), pathwise."""
    if ensemble.drift_eta1 is None:
        return 0.0
    mu = GeneratorPair(ensemble.drift_eta1, ensemble.drift_eta2)
    log_d = _log_doleans(mu, ensemble)
    return log_d[:, k1] - log_d[:, k0]


def penalty_value(
    spec: PenaltySpec,
    mc: MeasureChange,
    t: float,
    T: float,
    ensemble: Ensemble,
) -> PenaltyReport:
    """Evaluate a penalty over the window [t, T] for the measure in ``mc``.

    Deterministic penalties (quadratic with deterministic generator,
    degenerate, reference-only) come back with zero standard error.  The
    entropic penalty is a Monte Carlo estimate under the measure generated
    by ``mc``; if the ensemble was sampled under a different drift the
    estimate is importance-reweighted.
    """
    grid = ensemble.grid
    k0, k1 = grid.index_of(t), grid.index_of(T)
    if k0 >= k1:
        raise ValueError(f"need t < T on the grid, got t={t}, T={T}")
    eta = mc.eta
    _check_generator(eta, grid)
    dt = grid.dt
    n_paths = ensemble.n_paths

    if isinstance(spec, QuadraticPenalty):
        delta = _realize_one("delta", spec.delta, grid)
        value = float(np.sum(0.5 * delta[k0:k1] * eta.norm_sq()[k0:k1]) * dt)
        return PenaltyReport(kind=spec.kind, t=t, T=T, estimate=value,
                             stderr=0.0, n_paths=n_paths)

    if isinstance(spec, EntropicPenalty):
        span = mc.log_D_between(k0, k1)
        w = np.exp(span - _sampling_log_density(ensemble, k0, k1))
        samples = spec.delta * w * span
        est = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else None
        return PenaltyReport(kind=spec.kind, t=t, T=T, estimate=est,
                             stderr=se, n_paths=n_paths)

    if isinstance(spec, DegeneratePenalty):
        lam = spec.lookup(t, T)
        if lam is None:
            return _infinite(spec.kind, t, T, n_paths,
                            f"no admitted generator for horizon ({t}, {T})")
        ok = (
            np.allclose(eta.eta1[k0:k1], lam, rtol=0.0, atol=1e-12)
            and np.allclose(eta.eta2[k0:k1], 0.0, rtol=0.0, atol=1e-12)
        )
        if not ok:
            return _infinite(spec.kind, t, T, n_paths,
                            f"generator differs from the admitted ({lam}, 0)")
        value = -0.5 * (T - t) * lam**2
        return PenaltyReport(kind=spec.kind, t=t, T=T, estimate=float(value),
                             stderr=0.0, n_paths=n_paths)

    if isinstance(spec, ReferenceOnlyPenalty):
        if not (eta.is_zero(atol=0.0) or
                (np.allclose(eta.eta1[k0:k1], 0.0, atol=1e-15)
                 and np.allclose(eta.eta2[k0:k1], 0.0, atol=1e-15))):
            return _infinite(spec.kind, t, T, n_paths, "only the zero generator is admitted")
        return PenaltyReport(kind=spec.kind, t=t, T=T, estimate=0.0,
                             stderr=0.0, n_paths=n_paths)

    raise TypeError(f"unknown penalty spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# cocycle diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CocycleReport:
    """Residual of gamma_{s,T} = gamma_{s,t} + E^Q[gamma_{t,T}] at one split."""

    s: float
    t: float
    T: float
    residual: float | None
    is_infinite: bool
    parts: dict

    def to_json(self) -> dict:
        return {
            "s": self.s, "t": self.t, "T": self.T,
            "residual": self.residual, "is_infinite": self.is_infinite,
            "parts": {k: v.to_json() for k, v in self.parts.items()},
        }


def cocycle_residual(
    spec: PenaltySpec,
    eta: GeneratorPair,
    s: float,
    t: float,
    T: float,
    ensemble: Ensemble,
) -> CocycleReport:
    """Check additivity of a penalty across the split s < t < T.

    For deterministic generators the conditional expectation of the tail
    penalty is the tail penalty itself, so the residual is a plain
    difference of the three window values.  Any infinite part makes the
    whole report infinite.
    """
    if not (s < t < T):
        raise ValueError(f"need s < t < T, got {s}, {t}, {T}")
    mc = doleans(eta, ensemble)
    parts = {
        "s_T": penalty_value(spec, mc, s, T, ensemble),
        "s_t": penalty_value(spec, mc, s, t, ensemble),
        "t_T": penalty_value(spec, mc, t, T, ensemble),
    }
    if any(p.is_infinite for p in parts.values()):
        return CocycleReport(s=s, t=t, T=T, residual=None, is_infinite=True, parts=parts)
    residual = parts["s_T"].estimate - parts["s_t"].estimate - parts["t_T"].estimate
    return CocycleReport(s=s, t=t, T=T, residual=float(residual), is_infinite=False, parts=parts)
