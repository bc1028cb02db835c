"""Exact finite-tree oracle for robust investment values.

Markets here are per-period multinomial trees: each period has a fixed
branch-return vector and reference branch probabilities, independent
across periods.  Ambiguity is expressed per period, either as an explicit
finite set of branch kernels with additive penalties or as the entropic
family (every equivalent kernel, penalized by delta times its relative
entropy).  Because both market and ambiguity are period-specified, value
functions separate:

* log:   u(x) = ln x + sum of per-period increments
* power: u(x) = b x^R / R + m, with b multiplicative across periods
* exp:   u(x) = -k exp(-alpha x) + m, with k multiplicative

The per-period extremum is a one-dimensional concave maximization solved
by golden-section to a pinned tolerance, with the adversarial minimum
either an explicit finite minimum or the entropic soft-min in closed
form.  With several kernels the maximizer can sit on a kink of the lower
envelope, which golden-section alone resolves only to its bracket width;
kinks are therefore polished by root-finding the crossing of the active
kernels.  The dual side minimizes relative entropy minus log state price
over the equivalent-martingale-measure segment of each period and over
the convex hull of the period's kernels (the entropy term is convex in
the kernel, so the minimum is typically a mixture, not a listed vertex),
again by golden-section, cross-checked against a dense sweep.

Robust power and exponential values are supported only for singleton
kernel families (a fixed tilted measure with a penalty constant); richer
families break the separable form and are rejected rather than
approximated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from ._optimize import expand_bracket, golden_max, golden_min, grid_min

__all__ = [
    "ArbitrageError",
    "PastingError",
    "UnsupportedInstanceError",
    "TreeMarket",
    "Kernel",
    "FiniteKernels",
    "EntropicKernels",
    "MeasureFamily",
    "ListedMeasureSet",
    "ConsistentHorizon",
    "HorizonTable",
    "LogUtility",
    "PowerUtility",
    "ExpUtility",
    "PeriodPolicy",
    "TreeSolution",
    "PeriodDual",
    "DualSolution",
    "DualityReport",
    "DppReport",
    "ConsistencyReport",
    "InconsistencyDemo",
    "solve_primal",
    "solve_dual",
    "duality_gap",
    "check_dpp",
    "check_time_consistency",
    "certainty_equivalent_log",
    "entropic_equivalence_check",
    "inconsistency_demo_continuous",
    "bundled_instance",
    "instance_from_json",
]

PHI_TOL = 1e-10


class ArbitrageError(ValueError):
    """A period admits arbitrage (returns do not straddle zero)."""


class PastingError(ValueError):
    """A listed measure set is not closed under pasting."""


class UnsupportedInstanceError(ValueError):
    """Instance outside the exactly solvable scope."""


# ---------------------------------------------------------------------------
# market
# ---------------------------------------------------------------------------

def _as_prob_tuple(values, what: str) -> tuple[float, ...]:
    arr = tuple(float(v) for v in values)
    if len(arr) < 2:
        raise ValueError(f"{what} needs at least two branches, got {len(arr)}")
    if not all(math.isfinite(v) and v > 0 for v in arr):
        raise ValueError(f"{what} must be strictly positive and finite")
    if abs(sum(arr) - 1.0) > 1e-9:
        raise ValueError(f"{what} must sum to 1, got {sum(arr)!r}")
    return arr


@dataclass(frozen=True)
class TreeMarket:
    """Per-period multinomial market: branch returns and reference
    probabilities for each period."""

    returns: tuple[tuple[float, ...], ...]
    probs: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rets = tuple(tuple(float(r) for r in period) for period in self.returns)
        probs = tuple(_as_prob_tuple(p, f"probs[{u}]") for u, p in enumerate(self.probs))
        if len(rets) != len(probs) or not rets:
            raise ValueError("returns and probs must list the same nonzero number of periods")
        for u, (r, p) in enumerate(zip(rets, probs)):
            if len(r) != len(p):
                raise ValueError(f"period {u}: {len(r)} returns vs {len(p)} probabilities")
            if not all(math.isfinite(v) and v > -1.0 for v in r):
                raise ValueError(f"period {u}: returns must be finite and > -1")
            if min(r) >= 0.0 or max(r) <= 0.0:
                raise ArbitrageError(f"period {u}: returns must straddle zero, got {r}")
        object.__setattr__(self, "returns", rets)
        object.__setattr__(self, "probs", probs)

    @property
    def n_periods(self) -> int:
        return len(self.returns)

    def restrict(self, t: int, T: int) -> "TreeMarket":
        if not (0 <= t < T <= self.n_periods):
            raise ValueError(f"invalid period window [{t}, {T})")
        return TreeMarket(self.returns[t:T], self.probs[t:T])


# ---------------------------------------------------------------------------
# ambiguity families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    """One candidate branch distribution with its additive penalty."""

    probs: tuple[float, ...]
    penalty: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _as_prob_tuple(self.probs, "kernel probs"))
        if not math.isfinite(self.penalty):
            raise ValueError(f"kernel penalty must be finite, got {self.penalty}"
                             " (omit the kernel instead of using an infinite value)")

    def close_to(self, other: "Kernel", atol: float = 1e-12) -> bool:
        return (
            len(self.probs) == len(other.probs)
            and all(abs(a - b) <= atol for a, b in zip(self.probs, other.probs))
            and abs(self.penalty - other.penalty) <= atol
        )


@dataclass(frozen=True)
class FiniteKernels:
    kernels: tuple[Kernel, ...]

    def __post_init__(self) -> None:
        ks = tuple(self.kernels)
        if not ks:
            raise ValueError("a finite kernel set needs at least one kernel")
        object.__setattr__(self, "kernels", ks)


@dataclass(frozen=True)
class EntropicKernels:
    """All equivalent kernels, penalized by delta * KL(q || p)."""

    delta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"entropic delta must be positive and finite, got {self.delta}")


KernelSet = FiniteKernels | EntropicKernels


@dataclass(frozen=True)
class MeasureFamily:
    """Product family: one kernel set per period.  Such families are closed
    under pasting by construction."""

    periods: tuple[KernelSet, ...]

    def __post_init__(self) -> None:
        ps = tuple(self.periods)
        if not ps:
            raise ValueError("a measure family needs at least one period")
        object.__setattr__(self, "periods", ps)

    @classmethod
    def entropic(cls, delta: float, n_periods: int) -> "MeasureFamily":
        return cls(tuple(EntropicKernels(delta) for _ in range(n_periods)))

    @classmethod
    def singleton(cls, kernels: list[Kernel]) -> "MeasureFamily":
        return cls(tuple(FiniteKernels((k,)) for k in kernels))

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def restrict(self, t: int, T: int) -> "MeasureFamily":
        if not (0 <= t < T <= self.n_periods):
            raise ValueError(f"invalid period window [{t}, {T})")
        return MeasureFamily(self.periods[t:T])

    def validate_against(self, market: TreeMarket) -> None:
        if self.n_periods != market.n_periods:
            raise ValueError(
                f"family covers {self.n_periods} periods, market has {market.n_periods}"
            )
        for u, kset in enumerate(self.periods):
            if isinstance(kset, FiniteKernels):
                want = len(market.returns[u])
                for k in kset.kernels:
                    if len(k.probs) != want:
                        raise ValueError(
                            f"period {u}: kernel has {len(k.probs)} branches, market has {want}"
                        )


@dataclass(frozen=True)
class ListedMeasureSet:
    """Candidate measures given explicitly as per-period kernel sequences.

    Solving requires the set to be closed under pasting, i.e. to equal the
    product of its per-period projections; ``as_family`` performs that
    check and raises ``PastingError`` naming a violating recombination.
    """

    measures: tuple[tuple[Kernel, ...], ...]

    def __post_init__(self) -> None:
        ms = tuple(tuple(seq) for seq in self.measures)
        if not ms:
            raise ValueError("need at least one measure")
        n = len(ms[0])
        if n == 0 or any(len(seq) != n for seq in ms):
            raise ValueError("all measures must cover the same nonzero number of periods")
        object.__setattr__(self, "measures", ms)

    @property
    def n_periods(self) -> int:
        return len(self.measures[0])

    def _contains(self, seq: tuple[Kernel, ...]) -> bool:
        return any(
            all(a.close_to(b) for a, b in zip(seq, m)) for m in self.measures
        )

    def as_family(self) -> MeasureFamily:
        for i, head in enumerate(self.measures):
            for j, tail in enumerate(self.measures):
                if i == j:
                    continue
                for t in range(1, self.n_periods):
                    pasted = head[:t] + tail[t:]
                    if not self._contains(pasted):
                        raise PastingError(
                            f"head of measure {i} pasted with tail of measure {j} "
                            f"at period {t} leaves the set; add the recombined "
                            "measure or use a per-period family"
                        )
        projections = []
        for u in range(self.n_periods):
            seen: list[Kernel] = []
            for m in self.measures:
                if not any(m[u].close_to(k) for k in seen):
                    seen.append(m[u])
            projections.append(FiniteKernels(tuple(seen)))
        return MeasureFamily(tuple(projections))


class ConsistentHorizon:
    """One family for every horizon; restriction is plain slicing."""

    def __init__(self, family: MeasureFamily):
        self.family = family

    def family_for(self, t: int, T: int) -> MeasureFamily:
        return self.family.restrict(t, T)


class HorizonTable:
    """Explicit family per investment horizon; the degenerate construction
    where different horizons see different (even disjoint) families."""

    def __init__(self, table: Mapping[tuple[int, int], MeasureFamily]):
        if not table:
            raise ValueError("horizon table must not be empty")
        self.table = dict(table)

    def family_for(self, t: int, T: int) -> MeasureFamily:
        try:
            return self.table[(t, T)]
        except KeyError:
            raise KeyError(f"no family recorded for horizon ({t}, {T})") from None


def _as_horizons(families) -> "ConsistentHorizon | HorizonTable":
    if isinstance(families, (ConsistentHorizon, HorizonTable)):
        return families
    if isinstance(families, ListedMeasureSet):
        return ConsistentHorizon(families.as_family())
    if isinstance(families, MeasureFamily):
        return ConsistentHorizon(families)
    raise TypeError(f"cannot interpret {type(families).__name__} as horizon families")


# ---------------------------------------------------------------------------
# utilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogUtility:
    kind: str = "log"


@dataclass(frozen=True)
class PowerUtility:
    """u(x) = x^R / R with R < 1, R != 0."""

    exponent: float
    kind: str = "power"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.exponent) and self.exponent < 1 and self.exponent != 0):
            raise ValueError(f"power exponent must satisfy R < 1, R != 0, got {self.exponent}")


@dataclass(frozen=True)
class ExpUtility:
    """u(x) = -exp(-alpha x) with alpha > 0; wealth is arithmetic here."""

    alpha: float
    kind: str = "exp"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"exp risk aversion must be positive, got {self.alpha}")


Utility = LogUtility | PowerUtility | ExpUtility


def _check_x0(utility: Utility, x0: float) -> None:
    if not math.isfinite(x0):
        raise ValueError(f"x0 must be finite, got {x0}")
    if not isinstance(utility, ExpUtility) and x0 <= 0:
        raise ValueError(f"x0 must be positive for {utility.kind} utility, got {x0}")


def _singleton_kernels(family: MeasureFamily, utility: Utility) -> list[Kernel]:
    kernels = []
    for u, kset in enumerate(family.periods):
        if not (isinstance(kset, FiniteKernels) and len(kset.kernels) == 1):
            raise UnsupportedInstanceError(
                f"{utility.kind} utility supports only singleton kernel families; "
                f"period {u} has a larger set"
            )
        kernels.append(kset.kernels[0])
    return kernels


# ---------------------------------------------------------------------------
# primal solver
# ---------------------------------------------------------------------------

def _fraction_bounds(returns: tuple[float, ...]) -> tuple[float, float]:
    # Positivity of 1 + phi * r for every branch.
    lo = -1.0 / max(returns)
    hi = -1.0 / min(returns)
    margin = 1e-9 * (hi - lo)
    return lo + margin, hi - margin


@dataclass(frozen=True)
class PeriodPolicy:
    """Optimal behavior on one period: investment fraction (or amount for
    exponential utility), the adversarial kernel attaining the inner
    minimum, and the period's contribution to the value."""

    period: int
    fraction: float | None
    amount: float | None
    worst_kernel: tuple[float, ...]
    kernel_index: int | None
    penalty: float
    value_increment: float | None
    factor: float | None


def _log_inner(growth: np.ndarray, log_p: np.ndarray, kset: KernelSet) -> float:
    if isinstance(kset, FiniteKernels):
        return min(
            float(np.dot(k.probs, growth)) + k.penalty for k in kset.kernels
        )
    return float(-kset.delta * logsumexp(log_p - growth / kset.delta))


def _log_worst_kernel(growth: np.ndarray, log_p: np.ndarray, kset: KernelSet):
    if isinstance(kset, FiniteKernels):
        vals = [float(np.dot(k.probs, growth)) + k.penalty for k in kset.kernels]
        idx = int(np.argmin(vals))
        k = kset.kernels[idx]
        return k.probs, idx, k.penalty
    w = log_p - growth / kset.delta
    q = np.exp(w - logsumexp(w))
    p = np.exp(log_p)
    kl = float(np.sum(q * (np.log(q) - np.log(p))))
    return tuple(float(v) for v in q), None, kset.delta * kl


def _crossing_root(diff, phi0: float, lo: float, hi: float) -> float | None:
    """Sign change of ``diff`` near ``phi0`` within [lo, hi], or None."""
    h = max(1e-9, 1e-9 * (hi - lo))
    for _ in range(60):
        a, b = max(lo, phi0 - h), min(hi, phi0 + h)
        fa, fb = diff(a), diff(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0.0:
            return float(brentq(diff, a, b, xtol=1e-14))
        if a == lo and b == hi:
            return None
        h *= 4.0
    return None


def _solve_period_log(returns, probs, kset, phi_tol: float) -> PeriodPolicy:
    r = np.asarray(returns)
    log_p = np.log(np.asarray(probs))
    lo, hi = _fraction_bounds(returns)

    def objective(phi: float) -> float:
        return _log_inner(np.log1p(phi * r), log_p, kset)

    phi_star, val = golden_max(objective, lo, hi, tol=phi_tol)

    if isinstance(kset, FiniteKernels) and len(kset.kernels) >= 2:
        # The lower envelope of several kernels is piecewise concave; when
        # the maximum sits on a kink, golden-section stops a bracket width
        # away from it.  Polish by root-finding the crossing of each pair
        # of active kernels.
        def kernel_val(k: Kernel, phi: float) -> float:
            return float(np.dot(k.probs, np.log1p(phi * r))) + k.penalty

        vals = [kernel_val(k, phi_star) for k in kset.kernels]
        vmin = min(vals)
        active = [i for i, v in enumerate(vals) if v - vmin <= 1e-7]
        for a, b in itertools.combinations(active, 2):
            ka, kb = kset.kernels[a], kset.kernels[b]
            root = _crossing_root(
                lambda phi: kernel_val(ka, phi) - kernel_val(kb, phi),
                phi_star, lo, hi,
            )
            if root is not None:
                v = objective(root)
                if v > val:
                    phi_star, val = root, v

    q, idx, pen = _log_worst_kernel(np.log1p(phi_star * r), log_p, kset)
    return PeriodPolicy(
        period=-1, fraction=float(phi_star), amount=None, worst_kernel=tuple(q),
        kernel_index=idx, penalty=float(pen), value_increment=float(val), factor=None,
    )


def _solve_period_power(returns, kernel: Kernel, R: float, phi_tol: float) -> PeriodPolicy:
    r = np.asarray(returns)
    q = np.asarray(kernel.probs)
    lo, hi = _fraction_bounds(returns)

    def objective(phi: float) -> float:
        return float(np.dot(q, np.power(1.0 + phi * r, R))) / R

    phi_star, val = golden_max(objective, lo, hi, tol=phi_tol)
    return PeriodPolicy(
        period=-1, fraction=float(phi_star), amount=None,
        worst_kernel=kernel.probs, kernel_index=0, penalty=kernel.penalty,
        value_increment=None, factor=float(R * val),
    )


def _solve_period_exp(returns, kernel: Kernel, alpha: float, phi_tol: float) -> PeriodPolicy:
    r = np.asarray(returns)
    q = np.asarray(kernel.probs)

    def objective(theta: float) -> float:
        return float(np.dot(q, np.exp(-alpha * theta * r)))

    a, b = expand_bracket(objective)
    theta_star, fmin = golden_min(objective, a, b, tol=phi_tol * max(1.0, b - a))
    return PeriodPolicy(
        period=-1, fraction=None, amount=float(theta_star),
        worst_kernel=kernel.probs, kernel_index=0, penalty=kernel.penalty,
        value_increment=None, factor=float(fmin),
    )


@dataclass(frozen=True)
class TreeSolution:
    """Primal solution: optimal per-period policy and the value state.

    ``state`` encodes the value function at time 0: for log it is the
    additive offset (u(x) = ln x + state[0]); for power, (b, m) with
    u(x) = b x^R / R + m; for exponential, (k, m) with
    u(x) = -k exp(-alpha x) + m.
    """

    utility: Utility
    x0: float
    value: float
    policies: tuple[PeriodPolicy, ...]
    state: tuple[float, ...]

    def value_at(self, x: float) -> float:
        _check_x0(self.utility, x)
        if isinstance(self.utility, LogUtility):
            return math.log(x) + self.state[0]
        if isinstance(self.utility, PowerUtility):
            b, m = self.state
            return b * x**self.utility.exponent / self.utility.exponent + m
        k, m = self.state
        return -k * math.exp(-self.utility.alpha * x) + m

    def fraction(self, period: int) -> float | None:
        return self.policies[period].fraction

    def worst_kernel(self, period: int) -> tuple[float, ...]:
        return self.policies[period].worst_kernel


def solve_primal(
    market: TreeMarket,
    family,
    utility: Utility = LogUtility(),
    x0: float = 1.0,
    *,
    phi_tol: float = PHI_TOL,
    terminal_state: tuple[float, ...] | None = None,
) -> TreeSolution:
    """Solve the robust investment problem on a tree exactly.

    Parameters
    ----------
    market : TreeMarket
    family : MeasureFamily or ListedMeasureSet
        Per-period ambiguity.  Listed sets are first checked for pasting
        closure.
    utility : LogUtility, PowerUtility or ExpUtility
        Power and exponential require singleton kernel families.
    x0 : float
        Initial wealth at which ``value`` is reported.
    phi_tol : float
        Golden-section bracket tolerance for the per-period extremum.
    terminal_state : tuple, optional
        Value-state at the horizon, used to compose sub-problem solutions;
        defaults to the pure terminal utility.

    Returns
    -------
    TreeSolution
    """
    if isinstance(family, ListedMeasureSet):
        family = family.as_family()
    if not isinstance(family, MeasureFamily):
        raise TypeError(f"family must be a MeasureFamily, got {type(family).__name__}")
    family.validate_against(market)
    _check_x0(utility, x0)

    policies: list[PeriodPolicy] = []
    if isinstance(utility, LogUtility):
        offset = 0.0 if terminal_state is None else float(terminal_state[0])
        for u in reversed(range(market.n_periods)):
            pol = _solve_period_log(market.returns[u], market.probs[u],
                                    family.periods[u], phi_tol)
            offset = offset + pol.value_increment
            policies.append(
                PeriodPolicy(**{**pol.__dict__, "period": u})
            )
        state = (offset,)
    elif isinstance(utility, PowerUtility):
        kernels = _singleton_kernels(family, utility)
        b, m = (1.0, 0.0) if terminal_state is None else map(float, terminal_state)
        if b <= 0:
            raise ValueError(f"power terminal coefficient must be positive, got {b}")
        for u in reversed(range(market.n_periods)):
            pol = _solve_period_power(market.returns[u], kernels[u],
                                      utility.exponent, phi_tol)
            b, m = b * pol.factor, m + pol.penalty
            policies.append(PeriodPolicy(**{**pol.__dict__, "period": u}))
        state = (b, m)
    else:
        kernels = _singleton_kernels(family, utility)
        k, m = (1.0, 0.0) if terminal_state is None else map(float, terminal_state)
        if k <= 0:
            raise ValueError(f"exp terminal coefficient must be positive, got {k}")
        for u in reversed(range(market.n_periods)):
            pol = _solve_period_exp(market.returns[u], kernels[u],
                                    utility.alpha, phi_tol)
            k, m = k * pol.factor, m + pol.penalty
            policies.append(PeriodPolicy(**{**pol.__dict__, "period": u}))
        state = (k, m)

    policies.reverse()
    sol = TreeSolution(
        utility=utility, x0=x0, value=0.0, policies=tuple(policies), state=state
    )
    return TreeSolution(
        utility=utility, x0=x0, value=sol.value_at(x0),
        policies=tuple(policies), state=state,
    )


# ---------------------------------------------------------------------------
# dual solver
# ---------------------------------------------------------------------------

def _emm_binomial(returns, probs) -> np.ndarray:
    m = np.array([[probs[0], probs[1]],
                  [probs[0] * returns[0], probs[1] * returns[1]]])
    z = np.linalg.solve(m, np.array([1.0, 0.0]))
    if np.any(z <= 0):
        raise ArbitrageError(f"no positive state price for returns {returns}")
    return z


def _emm_trinomial_segment(returns, probs):
    """Parametrize the state-price segment z(theta) = z0 + theta * d, with
    the open theta interval keeping z strictly positive."""
    p = np.asarray(probs)
    r = np.asarray(returns)
    m = np.vstack([p, p * r])
    z0 = np.linalg.lstsq(m, np.array([1.0, 0.0]), rcond=None)[0]
    _, _, vh = np.linalg.svd(m)
    d = vh[-1]
    lo, hi = -np.inf, np.inf
    for z0i, di in zip(z0, d):
        if di > 1e-14:
            lo = max(lo, -z0i / di)
        elif di < -1e-14:
            hi = min(hi, -z0i / di)
        elif z0i <= 0:
            raise ArbitrageError("state-price segment leaves the positive orthant")
    if not lo < hi:
        raise ArbitrageError(f"no positive state price for returns {returns}")
    return z0, d, lo, hi


def _mixture_value(kernels: tuple[Kernel, ...], weights, log_t) -> float:
    """E^q[ln q - log_t] + penalty for the mixture q = sum_k w_k q_k.

    ``log_t`` holds ln(p_i z_i) per branch; mixture penalties interpolate
    linearly, which is the lower convex envelope of the listed points.
    """
    val = 0.0
    for i, lt in enumerate(log_t):
        qi = 0.0
        for k, wk in zip(kernels, weights):
            qi += wk * k.probs[i]
        val += qi * (math.log(qi) - lt)
    for k, wk in zip(kernels, weights):
        val += wk * k.penalty
    return val


def _hull_min(kernels: tuple[Kernel, ...], log_t, tol: float):
    """Minimize the mixture objective over the convex hull of the kernels.

    The entropy term is strictly convex in q, so the minimum is usually an
    interior mixture rather than a listed kernel.  Vertices are evaluated
    exactly, edges and (for three kernels) the interior by golden-section;
    boundary-attained minima are therefore caught by their own
    lower-dimensional search.  Returns (value, q, weights, vertex_index).
    """
    K = len(kernels)
    if K > 3:
        raise UnsupportedInstanceError(
            f"dual hull minimization supports at most 3 kernels per period, got {K}"
        )
    best_v, best_w = math.inf, None
    for k in range(K):
        w = tuple(1.0 if j == k else 0.0 for j in range(K))
        v = _mixture_value(kernels, w, log_t)
        if v < best_v:
            best_v, best_w = v, w
    for a in range(K):
        for b in range(a + 1, K):
            def edge(s: float, a=a, b=b) -> float:
                w = [0.0] * K
                w[a], w[b] = s, 1.0 - s
                return _mixture_value(kernels, w, log_t)

            s_star, v = golden_min(edge, 0.0, 1.0, tol=tol)
            if v < best_v:
                w = [0.0] * K
                w[a], w[b] = s_star, 1.0 - s_star
                best_v, best_w = v, tuple(w)
    if K == 3:
        def inner_min(w0: float) -> tuple[float, float]:
            def inner(w1: float) -> float:
                return _mixture_value(kernels, (w0, w1, 1.0 - w0 - w1), log_t)

            return golden_min(inner, 0.0, 1.0 - w0, tol=tol)

        w0_star, v = golden_min(lambda w0: inner_min(w0)[1], 0.0, 1.0, tol=tol)
        if v < best_v:
            w1_star = inner_min(w0_star)[0]
            w = (w0_star, w1_star, 1.0 - w0_star - w1_star)
            best_v, best_w = _mixture_value(kernels, w, log_t), w
    q = tuple(
        float(sum(wk * k.probs[i] for wk, k in zip(best_w, kernels)))
        for i in range(len(log_t))
    )
    vertex = next((k for k, wk in enumerate(best_w) if wk == 1.0), None)
    return best_v, q, best_w, vertex


def _dual_min_at_z(log_z: np.ndarray, probs, kset: KernelSet, tol: float = 1e-12):
    """min over candidate kernels (hull for finite sets, closed form for
    the entropic set) of E^q[ln(q/p) - ln z] + g(q).

    Returns (value, attaining q, vertex index or None).
    """
    log_p = np.log(np.asarray(probs))
    if isinstance(kset, FiniteKernels):
        log_t = [float(v) for v in log_p + log_z]
        val, q, _, vertex = _hull_min(kset.kernels, log_t, tol)
        return val, q, vertex
    one = 1.0 + kset.delta
    w = log_p + log_z / one
    norm = logsumexp(w)
    q = np.exp(w - norm)
    return float(-one * norm), tuple(float(v) for v in q), None


@dataclass(frozen=True)
class PeriodDual:
    period: int
    value: float
    z: tuple[float, ...]
    q: tuple[float, ...]
    kernel_index: int | None
    theta: float | None
    sweep_gap: float | None
    penalty: float = 0.0


def _solve_dual_period_log(returns, probs, kset, sweep_points: int) -> PeriodDual:
    n = len(returns)
    if n == 2:
        z = _emm_binomial(returns, probs)
        val, q, idx = _dual_min_at_z(np.log(z), probs, kset)
        return PeriodDual(period=-1, value=float(val), z=tuple(map(float, z)),
                          q=tuple(q), kernel_index=idx, theta=None, sweep_gap=None)
    if n != 3:
        raise UnsupportedInstanceError(
            f"dual solver handles 2 or 3 branches per period, got {n}"
        )
    z0, d, lo, hi = _emm_trinomial_segment(returns, probs)
    margin = 1e-9 * (hi - lo)
    a, b = lo + margin, hi - margin

    def objective(theta: float) -> float:
        return _dual_min_at_z(np.log(z0 + theta * d), probs, kset)[0]

    def sweep_objective(theta: float) -> float:
        # The sweep is a coarse cross-check, so the inner hull search can
        # run at a loose tolerance; its value is still an upper estimate.
        return _dual_min_at_z(np.log(z0 + theta * d), probs, kset, tol=1e-6)[0]

    theta_star, val = golden_min(objective, a, b, tol=PHI_TOL * max(1.0, hi - lo))
    _, sweep_val = grid_min(sweep_objective, a, b, sweep_points)
    z = z0 + theta_star * d
    _, q, idx = _dual_min_at_z(np.log(z), probs, kset)
    return PeriodDual(
        period=-1, value=float(val), z=tuple(map(float, z)), q=tuple(q),
        kernel_index=idx, theta=float(theta_star),
        sweep_gap=float(sweep_val - val),
    )


def _solve_dual_period_power(returns, probs, kernel: Kernel, R: float,
                             sweep_points: int) -> PeriodDual:
    """Extremal per-period factor E^q[(z p / q)^{R/(R-1)}] over state
    prices.  The optimization direction follows the sign of (1-R)/R so the
    overall dual is always minimized."""
    q = np.asarray(kernel.probs)
    p = np.asarray(probs)
    qt = R / (R - 1.0)
    n = len(returns)

    def factor_for_z(z: np.ndarray) -> float:
        return float(np.dot(q, np.power(z * p / q, qt)))

    if n == 2:
        z = _emm_binomial(returns, probs)
        return PeriodDual(period=-1, value=factor_for_z(z), z=tuple(map(float, z)),
                          q=kernel.probs, kernel_index=0, theta=None,
                          sweep_gap=None, penalty=kernel.penalty)
    if n != 3:
        raise UnsupportedInstanceError(
            f"dual solver handles 2 or 3 branches per period, got {n}"
        )
    z0, d, lo, hi = _emm_trinomial_segment(returns, probs)
    margin = 1e-9 * (hi - lo)
    a, b = lo + margin, hi - margin
    # (1-R)/R > 0 wants the factor minimized, < 0 wants it maximized.
    sign = 1.0 if (1.0 - R) / R > 0 else -1.0

    def objective(theta: float) -> float:
        return sign * factor_for_z(z0 + theta * d)

    theta_star, val = golden_min(objective, a, b, tol=PHI_TOL * max(1.0, hi - lo))
    _, sweep_val = grid_min(objective, a, b, sweep_points)
    z = z0 + theta_star * d
    return PeriodDual(
        period=-1, value=float(sign * val), z=tuple(map(float, z)),
        q=kernel.probs, kernel_index=0, theta=float(theta_star),
        sweep_gap=float(sweep_val - val), penalty=kernel.penalty,
    )


@dataclass(frozen=True)
class DualSolution:
    """Dual value function v(eta) assembled from per-period extremals.

    log:   v(eta) = -ln(eta) - 1 + sum of period values
    power: v(eta) = ((1-R)/R) eta^{R/(R-1)} * prod of period factors
           + sum of penalties
    """

    utility: Utility
    periods: tuple[PeriodDual, ...]

    def v(self, eta):
        eta = np.asarray(eta, dtype=float)
        if np.any(eta <= 0):
            raise ValueError("dual argument must be strictly positive")
        if isinstance(self.utility, LogUtility):
            # Per-period values already include the attained penalties.
            offset = sum(p.value for p in self.periods)
            out = -np.log(eta) - 1.0 + offset
        else:
            R = self.utility.exponent
            coef = (1.0 - R) / R
            prod = math.prod(p.value for p in self.periods)
            pens = sum(p.penalty for p in self.periods)
            out = coef * np.power(eta, R / (R - 1.0)) * prod + pens
        return float(out) if out.ndim == 0 else out


def solve_dual(
    market: TreeMarket,
    family,
    utility: Utility = LogUtility(),
    *,
    sweep_points: int = 400,
) -> DualSolution:
    """Solve the dual problem: minimize penalized divergence from the state
    prices over candidate measures and martingale measures, per period.

    Supports log utility for any family, and power utility for singleton
    families.  Each trinomial period's golden-section minimum is
    cross-checked against a ``sweep_points`` dense sweep, recorded as
    ``sweep_gap``.
    """
    if isinstance(family, ListedMeasureSet):
        family = family.as_family()
    family.validate_against(market)
    periods: list[PeriodDual] = []
    if isinstance(utility, LogUtility):
        for u in range(market.n_periods):
            pd = _solve_dual_period_log(
                market.returns[u], market.probs[u], family.periods[u], sweep_points
            )
            periods.append(PeriodDual(**{**pd.__dict__, "period": u}))
    elif isinstance(utility, PowerUtility):
        kernels = _singleton_kernels(family, utility)
        for u in range(market.n_periods):
            pd = _solve_dual_period_power(
                market.returns[u], market.probs[u], kernels[u],
                utility.exponent, sweep_points,
            )
            periods.append(PeriodDual(**{**pd.__dict__, "period": u}))
    else:
        raise UnsupportedInstanceError("no dual solver for exponential utility")
    return DualSolution(utility=utility, periods=tuple(periods))


@dataclass(frozen=True)
class DualityReport:
    """Primal-dual gap with bracket refinements of the conjugate.

    ``gaps`` holds the realized conjugate-minus-primal difference per
    refinement level; ``bounds`` the certified optimality bound of the
    conjugate minimization at that level, from the secant lower bound of
    the convex objective on the bracket.  The realized gap can stall when
    an early evaluation lands close to the minimizer, but the certified
    bound contracts with the bracket (quadratically near a smooth
    minimum, at worst linearly), so ``bounds`` is the sequence the
    halving criterion applies to.  The realized gap never exceeds its
    bound.
    """

    x: float
    primal_value: float
    gaps: tuple[float, ...]
    bounds: tuple[float, ...]
    final_gap: float
    eta_star: float

    def halving_ok(self, floor: float = 1e-12) -> bool:
        return all(
            b2 <= max(0.5 * b1, floor) for b1, b2 in zip(self.bounds, self.bounds[1:])
        )

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "primal_value": self.primal_value,
            "gaps": list(self.gaps),
            "bounds": list(self.bounds),
            "final_gap": self.final_gap,
            "eta_star": self.eta_star,
            "halving_ok": self.halving_ok(),
        }


def _secant_bound(a, fa, m, fm, b, fb) -> float:
    """Certified fm - min over [a, b] for a convex function with interior
    argmin sample m: extending the chords past m bounds f from below."""
    slope_right = (fb - fm) / (b - m)
    slope_left = (fm - fa) / (m - a)
    return max(slope_right * (m - a), -slope_left * (b - m), 0.0)


def duality_gap(
    primal: TreeSolution,
    dual: DualSolution,
    x: float,
    *,
    eta_lo: float = 1e-3,
    eta_hi: float = 1e3,
    points: int = 2000,
    levels: int = 6,
) -> DualityReport:
    """Evaluate min over eta of v(eta) + x eta against the primal value.

    The conjugate objective is convex in eta.  A coarse log-spaced grid
    seeds a three-point bracket around its minimizer; each level evaluates
    the bracket midpoints and recenters on the best point, halving the
    bracket width, and records both the realized gap and the certified
    secant bound.  The final bracket is polished with golden-section.
    """
    u_val = primal.value_at(x)

    def conj(eta: float) -> float:
        return float(dual.v(eta) + x * eta)

    grid = np.geomspace(eta_lo, eta_hi, points)
    vals = dual.v(grid) + x * grid
    i = int(np.argmin(vals))
    if i in (0, points - 1):
        raise ValueError(
            f"conjugate minimizer at the edge of [{eta_lo}, {eta_hi}]; widen the range"
        )
    a, m, b = float(grid[i - 1]), float(grid[i]), float(grid[i + 1])
    fa, fm, fb = float(vals[i - 1]), float(vals[i]), float(vals[i + 1])
    gaps = [fm - u_val]
    bounds = [_secant_bound(a, fa, m, fm, b, fb)]
    for _ in range(1, levels):
        m1, m2 = 0.5 * (a + m), 0.5 * (m + b)
        f1, f2 = conj(m1), conj(m2)
        if f1 <= fm and f1 <= f2:
            a, m, b = a, m1, m
            fa, fm, fb = fa, f1, fm
        elif f2 <= fm:
            a, m, b = m, m2, b
            fa, fm, fb = fm, f2, fb
        else:
            a, b, fa, fb = m1, m2, f1, f2
        gaps.append(fm - u_val)
        bounds.append(_secant_bound(a, fa, m, fm, b, fb))

    eta_star, val = golden_min(conj, a, b, tol=1e-13 * max(1.0, b))
    if fm < val:
        eta_star, val = m, fm
    return DualityReport(
        x=x,
        primal_value=u_val,
        gaps=tuple(gaps),
        bounds=tuple(bounds),
        final_gap=float(val - u_val),
        eta_star=float(eta_star),
    )


# ---------------------------------------------------------------------------
# dynamic programming and consistency diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DppReport:
    """Split-and-recompose check of the dynamic programming principle."""

    s: int
    T: int
    direct_value: float
    splits: tuple[dict, ...]
    max_residual: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "s": self.s, "T": self.T, "direct_value": self.direct_value,
            "splits": list(self.splits), "max_residual": self.max_residual,
            "passed": self.passed,
        }


def _policy_divergence(a: PeriodPolicy, b: PeriodPolicy, atol: float = 1e-8) -> bool:
    fa = a.fraction if a.fraction is not None else a.amount
    fb = b.fraction if b.fraction is not None else b.amount
    if abs(fa - fb) > atol:
        return True
    return any(abs(x - y) > atol for x, y in zip(a.worst_kernel, b.worst_kernel))


def check_dpp(
    market: TreeMarket,
    families,
    utility: Utility = LogUtility(),
    x0: float = 1.0,
    *,
    s: int = 0,
    T: int | None = None,
    tol: float = 1e-8,
) -> DppReport:
    """Verify that solving [s, T) directly matches solving [t, T) and then
    [s, t) with the sub-solution as terminal condition, for every split t.

    For product families the residual is zero to solver precision.  For a
    horizon table the recomposition can use genuinely different families,
    and the report then shows a value residual and/or diverging policies
    per split.
    """
    horizons = _as_horizons(families)
    T = market.n_periods if T is None else T
    if not (0 <= s < T <= market.n_periods):
        raise ValueError(f"invalid window [{s}, {T})")
    direct = solve_primal(market.restrict(s, T), horizons.family_for(s, T), utility, x0)
    splits = []
    max_res = 0.0
    for t in range(s + 1, T):
        tail = solve_primal(market.restrict(t, T), horizons.family_for(t, T), utility, x0)
        head = solve_primal(
            market.restrict(s, t), horizons.family_for(s, t), utility, x0,
            terminal_state=tail.state,
        )
        residual = abs(direct.value - head.value)
        max_res = max(max_res, residual)
        divergence = None
        for u in range(t, T):
            if _policy_divergence(direct.policies[u - s], tail.policies[u - t]):
                divergence = u
                break
        splits.append({
            "t": t,
            "direct": direct.value,
            "composed": head.value,
            "residual": residual,
            "policy_divergence_period": divergence,
        })
    return DppReport(
        s=s, T=T, direct_value=direct.value, splits=tuple(splits),
        max_residual=max_res, passed=max_res <= tol,
    )


@dataclass(frozen=True)
class ConsistencyReport:
    """Restriction / rolling / horizon agreement of optimal policies."""

    T: int
    T_bar: int
    values: dict
    findings: tuple[dict, ...]
    consistent: bool

    def to_json(self) -> dict:
        return {
            "T": self.T, "T_bar": self.T_bar,
            "values": {str(k): v for k, v in self.values.items()},
            "findings": list(self.findings),
            "consistent": self.consistent,
        }


def check_time_consistency(
    market: TreeMarket,
    families,
    utility: Utility = LogUtility(),
    T: int | None = None,
    T_bar: int | None = None,
    x0: float = 1.0,
    *,
    atol: float = 1e-8,
) -> ConsistencyReport:
    """Compare optimal policies across horizons and across re-solves.

    Three comparisons: the horizon-T and horizon-T_bar problems must agree
    on their common periods (restriction); re-solving from any interior
    time t with the same horizon must reproduce the original tail policy
    (rolling); both horizons' period-0 policies are compared explicitly.
    Disagreements are findings, not errors; the degenerate horizon-table
    families are expected to produce them while every horizon's value
    offset stays zero.
    """
    horizons = _as_horizons(families)
    T = market.n_periods if T is None else T
    T_bar = max(1, T - 1) if T_bar is None else T_bar
    sol_T = solve_primal(market.restrict(0, T), horizons.family_for(0, T), utility, x0)
    sol_Tb = solve_primal(market.restrict(0, T_bar), horizons.family_for(0, T_bar), utility, x0)
    values = {(0, T): sol_T.value, (0, T_bar): sol_Tb.value}
    findings = []
    for u in range(min(T, T_bar)):
        if _policy_divergence(sol_T.policies[u], sol_Tb.policies[u], atol):
            findings.append({
                "kind": "horizon",
                "period": u,
                "policy_T": sol_T.policies[u].fraction,
                "policy_T_bar": sol_Tb.policies[u].fraction,
            })
    for t in range(1, T):
        rolled = solve_primal(market.restrict(t, T), horizons.family_for(t, T), utility, x0)
        values[(t, T)] = rolled.value
        for u in range(t, T):
            if _policy_divergence(sol_T.policies[u], rolled.policies[u - t], atol):
                findings.append({
                    "kind": "rolling",
                    "resolve_time": t,
                    "period": u,
                    "original": sol_T.policies[u].fraction,
                    "rolled": rolled.policies[u - t].fraction,
                })
    return ConsistencyReport(
        T=T, T_bar=T_bar, values=values, findings=tuple(findings),
        consistent=not findings,
    )


# ---------------------------------------------------------------------------
# entropic equivalence
# ---------------------------------------------------------------------------

def certainty_equivalent_log(
    market: TreeMarket,
    fractions: list[float],
    delta: float,
    x0: float = 1.0,
    max_paths: int = 200_000,
) -> float:
    """-delta * ln E[exp(-ln(X_T)/delta)] by full path enumeration.

    Independent route to the entropic robust value: the expectation runs
    over every path of the tree under the reference probabilities, with
    terminal wealth from the given per-period fractions.
    """
    if len(fractions) != market.n_periods:
        raise ValueError(f"need one fraction per period, got {len(fractions)}")
    n_paths = math.prod(len(r) for r in market.returns)
    if n_paths > max_paths:
        raise ValueError(f"tree has {n_paths} paths, above the {max_paths} cap")
    total = 0.0
    branch_indices = [range(len(r)) for r in market.returns]
    for combo in itertools.product(*branch_indices):
        prob = 1.0
        log_x = math.log(x0)
        for u, i in enumerate(combo):
            prob *= market.probs[u][i]
            log_x += math.log1p(fractions[u] * market.returns[u][i])
        total += prob * math.exp(-log_x / delta)
    return -delta * math.log(total)


def entropic_equivalence_check(
    market: TreeMarket,
    delta: float,
    x0: float = 1.0,
) -> dict:
    """Robust value under the entropic family vs the certainty-equivalent
    transform of the same optimal strategy, computed by path enumeration."""
    family = MeasureFamily.entropic(delta, market.n_periods)
    primal = solve_primal(market, family, LogUtility(), x0)
    fractions = [p.fraction for p in primal.policies]
    ce = certainty_equivalent_log(market, fractions, delta, x0)
    return {
        "delta": delta,
        "x0": x0,
        "robust_value": primal.value,
        "certainty_equivalent": ce,
        "difference": primal.value - ce,
        "fractions": fractions,
    }


# ---------------------------------------------------------------------------
# continuous-time inconsistency demo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InconsistencyDemo:
    """Horizon-indexed degenerate families in the driftless market.

    Each horizon (t, T) admits exactly one candidate measure, with price
    of risk lambda[t, T] and penalty -(T - t) lambda^2 / 2.  Every
    horizon's robust value collapses to ln x (zero residual), yet the
    optimal fraction lambda / sigma depends on the horizon, so strategies
    for overlapping horizons conflict."""

    entries: tuple[dict, ...]
    strategy_conflicts: tuple[dict, ...]
    horizon_conflicts: tuple[dict, ...]
    max_value_residual: float

    def to_json(self) -> dict:
        return {
            "entries": list(self.entries),
            "strategy_conflicts": list(self.strategy_conflicts),
            "horizon_conflicts": list(self.horizon_conflicts),
            "max_value_residual": self.max_value_residual,
        }


def inconsistency_demo_continuous(
    lambda_table: Mapping[tuple[float, float], float],
    sigma: float,
) -> InconsistencyDemo:
    """Closed-form time-inconsistency demonstration.

    The reference market is driftless, so investing at fraction
    lambda / sigma under the single admitted measure earns expected log
    growth (T - t) lambda^2 / 2, exactly cancelled by the penalty.
    """
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    if not lambda_table:
        raise ValueError("lambda table must not be empty")
    entries = []
    max_res = 0.0
    items = sorted(lambda_table.items())
    for (t, T), lam in items:
        if not t < T:
            raise ValueError(f"horizon ({t}, {T}) needs t < T")
        span = T - t
        growth = 0.5 * span * lam**2
        penalty = -0.5 * span * lam**2
        residual = growth + penalty
        max_res = max(max_res, abs(residual))
        entries.append({
            "t": t, "T": T, "lambda": lam,
            "fraction": lam / sigma,
            "expected_growth": growth,
            "penalty": penalty,
            "value_residual": residual,
        })
    strategy_conflicts = []
    horizon_conflicts = []
    for i, ((t1, T1), lam1) in enumerate(items):
        for (t2, T2), lam2 in items[i + 1:]:
            if lam1 == lam2:
                continue
            if t1 == t2 and T1 != T2:
                horizon_conflicts.append({
                    "t": t1, "T_a": T1, "T_b": T2,
                    "fraction_a": lam1 / sigma, "fraction_b": lam2 / sigma,
                })
            overlap_lo, overlap_hi = max(t1, t2), min(T1, T2)
            if overlap_lo < overlap_hi:
                strategy_conflicts.append({
                    "overlap": [overlap_lo, overlap_hi],
                    "horizon_a": [t1, T1], "horizon_b": [t2, T2],
                    "fraction_a": lam1 / sigma, "fraction_b": lam2 / sigma,
                })
    return InconsistencyDemo(
        entries=tuple(entries),
        strategy_conflicts=tuple(strategy_conflicts),
        horizon_conflicts=tuple(horizon_conflicts),
        max_value_residual=max_res,
    )


# ---------------------------------------------------------------------------
# bundled instances and JSON
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    name: str
    market: TreeMarket
    families: object
    utility: Utility
    x0: float


def _tilted_kernel(probs, returns, lam: float, penalty: float = 0.0) -> Kernel:
    w = np.asarray(probs) * np.exp(lam * np.asarray(returns))
    q = w / w.sum()
    return Kernel(tuple(float(v) for v in q), penalty)


def _value_cancelling_kernel(probs, returns, lam: float) -> Kernel:
    """Exponentially tilted kernel whose penalty exactly cancels its own
    optimal log growth, so the one-period robust value increment is zero."""
    k = _tilted_kernel(probs, returns, lam)
    pol = _solve_period_log(returns, probs, FiniteKernels((k,)), PHI_TOL)
    return Kernel(k.probs, -pol.value_increment)


def bundled_instance(name: str, **overrides) -> Instance:
    """Named reference instances used by the command line and the tests.

    * ``binomial-complete``: 2-period binomial, reference kernel only.
    * ``trinomial-3measure``: 2-period trinomial, three penalized kernels.
    * ``entropic-binomial``: 3-period binomial, entropic family (delta
      override supported).
    * ``degenerate-table``: 2-period binomial with a horizon table of
      value-cancelling singleton families; time-inconsistent by design.
    """
    if name == "binomial-complete":
        market = TreeMarket(
            returns=((0.1, -0.1), (0.12, -0.08)),
            probs=((0.6, 0.4), (0.55, 0.45)),
        )
        family = MeasureFamily.singleton([
            Kernel(p) for p in market.probs
        ])
        return Instance(name, market, family, LogUtility(), overrides.get("x0", 1.0))
    if name == "trinomial-3measure":
        market = TreeMarket(
            returns=((-0.08, 0.01, 0.12), (-0.08, 0.01, 0.12)),
            probs=((0.3, 0.45, 0.25), (0.3, 0.45, 0.25)),
        )
        kset = FiniteKernels((
            Kernel((0.3, 0.45, 0.25), 0.0),
            Kernel((0.4, 0.42, 0.18), 0.003),
            Kernel((0.22, 0.46, 0.32), 0.005),
        ))
        family = MeasureFamily((kset, kset))
        return Instance(name, market, family, LogUtility(), overrides.get("x0", 1.0))
    if name == "entropic-binomial":
        delta = overrides.get("delta", 1.0)
        market = TreeMarket(
            returns=((0.1, -0.1),) * 3,
            probs=((0.55, 0.45),) * 3,
        )
        family = MeasureFamily.entropic(delta, 3)
        return Instance(name, market, family, LogUtility(), overrides.get("x0", 1.0))
    if name == "degenerate-table":
        market = TreeMarket(
            returns=((0.1, -0.1), (0.1, -0.1)),
            probs=((0.5, 0.5), (0.5, 0.5)),
        )
        lambdas = overrides.get("lambdas", {(0, 1): 2.0, (0, 2): 0.5, (1, 2): 3.5})
        table = {}
        for (t, T), lam in lambdas.items():
            kernels = [
                _value_cancelling_kernel(market.probs[u], market.returns[u], lam)
                for u in range(t, T)
            ]
            table[(t, T)] = MeasureFamily.singleton(kernels)
        return Instance(name, market, HorizonTable(table), LogUtility(),
                        overrides.get("x0", 1.0))
    raise ValueError(f"unknown bundled instance {name!r}")


def _family_from_json(obj: dict, n_periods: int) -> MeasureFamily:
    kind = obj.get("type")
    if kind == "entropic":
        return MeasureFamily.entropic(float(obj["delta"]), n_periods)
    if kind == "finite":
        periods = []
        for block in obj["periods"]:
            kernels = tuple(
                Kernel(tuple(k["q"]), float(k.get("penalty", 0.0))) for k in block
            )
            periods.append(FiniteKernels(kernels))
        return MeasureFamily(tuple(periods))
    raise ValueError(f"unknown family type {kind!r}")


def _utility_from_json(obj: dict | None) -> Utility:
    if obj is None:
        return LogUtility()
    kind = obj.get("type", "log")
    if kind == "log":
        return LogUtility()
    if kind == "power":
        return PowerUtility(float(obj["exponent"]))
    if kind == "exp":
        return ExpUtility(float(obj["alpha"]))
    raise ValueError(f"unknown utility type {kind!r}")


def instance_from_json(obj: dict) -> Instance:
    """Build an instance from a JSON-style mapping.

    Either ``{"instance": name, ...overrides}`` for a bundled instance or
    an explicit ``{"market": {...}, "family": {...}, "utility": {...}}``.
    """
    if "instance" in obj:
        name = obj["instance"]
        overrides = {k: v for k, v in obj.items() if k != "instance"}
        if "lambdas" in overrides:
            overrides["lambdas"] = {
                (int(e["t"]), int(e["T"])): float(e["value"])
                for e in overrides["lambdas"]
            }
        return bundled_instance(name, **overrides)
    mobj = obj["market"]
    market = TreeMarket(
        returns=tuple(tuple(p["returns"]) for p in mobj["periods"]),
        probs=tuple(tuple(p["probs"]) for p in mobj["periods"]),
    )
    family = _family_from_json(obj["family"], market.n_periods)
    utility = _utility_from_json(obj.get("utility"))
    return Instance(
        name=obj.get("name", "custom"),
        market=market,
        families=family,
        utility=utility,
        x0=float(obj.get("x0", 1.0)),
    )
