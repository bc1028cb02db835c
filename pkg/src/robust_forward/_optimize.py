"""Deterministic scalar minimization helpers.

Golden-section search is used everywhere a one-dimensional extremum is
needed: it is derivative-free, deterministic, and its bracket shrinks by a
fixed ratio, which makes tolerances exact contracts rather than hopes.
All objectives passed in are unimodal on the stated interval (convex or
concave pieces), which golden-section requires.
"""

from __future__ import annotations

import math

__all__ = ["golden_min", "golden_max", "expand_bracket", "grid_min"]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 400):
    """Minimize a unimodal function on (lo, hi) to bracket width ``tol``.

    Endpoints are never evaluated, so the interval may be open (e.g. with
    singular boundary values).  Returns (argmin, min value).
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    a, b = lo, hi
    h = b - a
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if h <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INVPHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def golden_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 400):
    """Maximize a unimodal function on (lo, hi); see ``golden_min``."""
    x, v = golden_min(lambda t: -f(t), lo, hi, tol=tol, max_iter=max_iter)
    return x, -v


def expand_bracket(f, width: float = 1.0, max_doublings: int = 60) -> tuple[float, float]:
    """Find [a, b] containing the minimum of a coercive convex function.

    Doubles the interval until the boundary values exceed the center value,
    which brackets the minimizer for convex f.
    """
    a, b = -width, width
    fa, fb, f0 = f(a), f(b), f(0.0)
    for _ in range(max_doublings):
        if fa > f0 and fb > f0:
            return a, b
        a *= 2.0
        b *= 2.0
        fa, fb = f(a), f(b)
    raise ValueError("could not bracket a minimum; objective may not be coercive")


def grid_min(f, lo: float, hi: float, n: int):
    """Plain dense-grid minimization; the brute-force cross-check for
    golden-section results.  Returns (argmin, min value)."""
    if n < 2:
        raise ValueError(f"need at least 2 grid points, got {n}")
    best_x, best_v = lo, f(lo)
    step = (hi - lo) / (n - 1)
    for i in range(1, n):
        x = lo + i * step
        v = f(x)
        if v < best_v:
            best_x, best_v = x, v
    return best_x, best_v
