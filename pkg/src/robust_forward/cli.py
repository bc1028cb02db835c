"""Command line experiment runner.

    robust-forward --config experiment.json --out results/ [--threads N] [--seed S]

The config is a JSON object with a ``kind`` selecting the experiment and
kind-specific blocks documented below.  Each run writes

* ``manifest.json``: config echo, package and library versions, thread
  count, timestamp (environment-dependent, not meant to be compared)
* ``results.json``: canonical experiment outcome with an ``assertions``
  list; deterministic for a fixed config and seed, independent of the
  thread count
* optional CSV artifacts per experiment

Exit codes: 0 all assertions passed, 1 at least one assertion failed,
2 configuration error, 3 input/output error.  Thread resolution order:
``--threads`` flag, then the ROBUST_FORWARD_THREADS environment
variable, then all cores.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import field_log
from .dualpde import (
    CappedQuadraticIntegrand,
    QuadraticIntegrand,
    TabulatedIntegrand,
    dense_grid_drift,
    drift_from_relation,
    hjb_residual,
    polynomial_mpr_accumulator,
    sample_dual_field,
)
from .measures import EntropicPenalty, GeneratorPair, QuadraticPenalty
from .oracle import (
    HorizonTable,
    check_dpp,
    check_time_consistency,
    duality_gap,
    entropic_equivalence_check,
    inconsistency_demo_continuous,
    instance_from_json,
    solve_dual,
    solve_primal,
)
from .paths import MarketCoefficients, TimeGrid, simulate_ensemble, write_ensemble
from .strategies import FractionalKelly, strategy_from_config, worst_case_generator
from .verify import MARTINGALE, SUBMARTINGALE, drift_test, dual_submartingale_test, self_generation_scan

__all__ = ["main", "run_experiment", "ConfigError"]


class ConfigError(ValueError):
    """Configuration is malformed; message carries the offending path."""


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _get(cfg: dict, key: str, path: str, *, required: bool = True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return cfg[key]


def _number(cfg: dict, key: str, path: str, *, required: bool = True, default=None) -> float:
    v = _get(cfg, key, path, required=required, default=default)
    if v is None:
        return v
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    return float(v)


def _integer(cfg: dict, key: str, path: str, *, required: bool = True, default=None) -> int:
    v = _get(cfg, key, path, required=required, default=default)
    if v is None:
        return v
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


def _coefficient(cfg: dict, key: str, path: str):
    v = _get(cfg, key, path)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if isinstance(v, list) and v and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        return [float(x) for x in v]
    raise ConfigError(f"{path}.{key}: expected a number or a list of numbers")


def _market(cfg: dict, path: str) -> MarketCoefficients:
    block = _get(cfg, "market", path)
    if not isinstance(block, dict):
        raise ConfigError(f"{path}.market: expected an object")
    return MarketCoefficients(
        sigma=_coefficient(block, "sigma", f"{path}.market"),
        lambda_hat=_coefficient(block, "lambda_hat", f"{path}.market"),
        delta=_coefficient(block, "delta", f"{path}.market") if "delta" in block else 1.0,
    )


def _grid(cfg: dict, path: str) -> TimeGrid:
    block = _get(cfg, "grid", path)
    if not isinstance(block, dict):
        raise ConfigError(f"{path}.grid: expected an object")
    try:
        return TimeGrid(
            horizon=_number(block, "horizon", f"{path}.grid"),
            n_steps=_integer(block, "n_steps", f"{path}.grid"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}.grid: {exc}") from exc


def _penalty(cfg: dict, path: str, *, default_delta: float = 1.0):
    block = _get(cfg, "penalty", path, required=False,
                 default={"type": "quadratic", "delta": default_delta})
    kind = _get(block, "type", f"{path}.penalty")
    if kind == "quadratic":
        return QuadraticPenalty(_number(block, "delta", f"{path}.penalty",
                                        required=False, default=default_delta))
    if kind == "entropic":
        return EntropicPenalty(_number(block, "delta", f"{path}.penalty",
                                       required=False, default=default_delta))
    raise ConfigError(f"{path}.penalty.type: unknown penalty {kind!r}")


def _integrand(block: dict, path: str):
    kind = _get(block, "type", path)
    if kind == "quadratic":
        return QuadraticIntegrand(_number(block, "delta", path))
    if kind == "quadratic_capped":
        return CappedQuadraticIntegrand(
            bound=_number(block, "bound", path),
            scale=_number(block, "scale", path, required=False, default=1.0),
        )
    if kind == "tabulated":
        return TabulatedIntegrand(
            eta1_grid=np.asarray(_get(block, "eta1_grid", path), dtype=float),
            eta2_grid=np.asarray(_get(block, "eta2_grid", path), dtype=float),
            values=np.asarray(_get(block, "values", path), dtype=float),
        )
    if kind == "point":
        return TabulatedIntegrand.point_mass()
    raise ConfigError(f"{path}.type: unknown integrand {kind!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _assertion(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **_jsonable(detail)}


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _run_simulate(cfg, out: Path, threads, seed):
    market = _market(cfg, "config")
    grid = _grid(cfg, "config")
    n_paths = _integer(cfg, "n_paths", "config")
    s0 = _number(cfg, "s0", "config", required=False, default=1.0)
    antithetic = bool(_get(cfg, "antithetic", "config", required=False, default=False))
    drift_cfg = _get(cfg, "drift", "config", required=False)
    cp = market.realize(grid)
    drift = None
    if drift_cfg == "worst_case":
        drift = worst_case_generator(cp, grid)
    elif isinstance(drift_cfg, dict):
        drift = GeneratorPair.on(grid, drift_cfg.get("eta1", 0.0), drift_cfg.get("eta2", 0.0))
    elif drift_cfg is not None:
        raise ConfigError('config.drift: expected "worst_case" or {"eta1": .., "eta2": ..}')
    ens = simulate_ensemble(cp, grid, n_paths, seed, drift=drift,
                            antithetic=antithetic, n_workers=threads)
    artifacts = {}
    if _get(cfg, "csv", "config", required=False, default=False):
        strategy_cfg = _get(cfg, "strategy", "config", required=False)
        sid = strategy_from_config(strategy_cfg).strategy_id if strategy_cfg else None
        artifacts = write_ensemble(ens, out, strategy_id=sid)

    # Smoke check: mean terminal log price vs its exact moments.
    dt = grid.dt
    drift_extra = 0.0 if drift is None else float(np.sum(cp.sigma * drift.eta1) * dt)
    expected = float(np.sum((cp.sigma * cp.lambda_hat - 0.5 * cp.sigma**2) * dt)) + drift_extra
    sd = float(np.sqrt(np.sum(cp.sigma**2 * dt)))
    got = float(np.mean(np.log(ens.S[:, -1] / ens.S[:, 0])))
    se = sd / math.sqrt(n_paths)
    assertions = [
        _assertion("terminal-log-mean", abs(got - expected) <= 5 * se,
                   estimate=got, expected=expected, stderr=se),
    ]
    reports = {"n_paths": n_paths, "terminal_log_mean": got}
    return assertions, reports, artifacts


def _run_verify_saddle(cfg, out: Path, threads, seed):
    market = _market(cfg, "config")
    grid = _grid(cfg, "config")
    n_paths = _integer(cfg, "n_paths", "config")
    t = _number(cfg, "t", "config", required=False, default=0.0)
    T = _number(cfg, "T", "config", required=False, default=grid.horizon)
    antithetic = bool(_get(cfg, "antithetic", "config", required=False, default=False))
    field = field_log(market, grid)
    cp = field.coeffs
    penalty = QuadraticPenalty(market.delta)
    eta_bar = worst_case_generator(cp, grid)
    zero = GeneratorPair.on(grid, 0.0, 0.0)
    pi_bar = FractionalKelly()

    saddle = drift_test(field, pi_bar, eta_bar, penalty, t, T, n_paths,
                        seed, antithetic=antithetic, n_workers=threads)
    reference = drift_test(field, pi_bar, zero, penalty, t, T, n_paths,
                           seed + 1, antithetic=antithetic, n_workers=threads)
    k0, k1 = grid.index_of(t), grid.index_of(T)
    expected_gain = float(np.sum(0.5 * cp.delta[k0:k1] * eta_bar.norm_sq()[k0:k1]) * grid.dt)

    assertions = [
        _assertion("saddle-martingale", saddle.verdict == MARTINGALE,
                   estimate=saddle.estimate, stderr=saddle.stderr),
        _assertion("reference-drift-positive", reference.verdict == SUBMARTINGALE,
                   estimate=reference.estimate, stderr=reference.stderr),
        _assertion("reference-drift-rate",
                   abs(reference.estimate - expected_gain)
                   <= 3 * reference.stderr + reference.details["noise_floor"],
                   estimate=reference.estimate, expected=expected_gain,
                   stderr=reference.stderr),
    ]
    reports = {"saddle": saddle.to_json(), "reference": reference.to_json(),
               "expected_gain": expected_gain}
    artifacts = {}

    scan_cfg = _get(cfg, "scan", "config", required=False)
    if scan_cfg is not None:
        scan = self_generation_scan(
            field, t, T,
            _get(scan_cfg, "rho_grid", "config.scan"),
            _get(scan_cfg, "c_grid", "config.scan"),
            _integer(scan_cfg, "n_paths", "config.scan", required=False,
                     default=n_paths),
            seed + 2,
            n_workers=threads,
        )
        assertions.append(_assertion("scan-saddle", scan.verdict,
                                     checks=scan.checks))
        reports["scan"] = scan.to_json()
        csv_path = out / "scan_values.csv"
        scan.values_to_csv(csv_path)
        artifacts["scan_values"] = str(csv_path)
    return assertions, reports, artifacts


def _run_verify_dual(cfg, out: Path, threads, seed):
    market = _market(cfg, "config")
    grid = _grid(cfg, "config")
    n_paths = _integer(cfg, "n_paths", "config")
    t = _number(cfg, "t", "config", required=False, default=0.0)
    T = _number(cfg, "T", "config", required=False, default=grid.horizon)
    y = _number(cfg, "y", "config", required=False, default=1.0)
    nu = _coefficient(cfg, "nu", "config") if "nu" in cfg else 0.0
    field = field_log(market, grid)
    penalty = _penalty(cfg, "config", default_delta=float(np.mean(field.coeffs.delta)))
    gen_cfg = _get(cfg, "generator", "config", required=False, default="worst_case")
    if gen_cfg == "worst_case":
        generator = worst_case_generator(field.coeffs, grid)
        at_optimum = True
    elif isinstance(gen_cfg, dict):
        generator = GeneratorPair.on(grid, gen_cfg.get("eta1", 0.0), gen_cfg.get("eta2", 0.0))
        at_optimum = False
    else:
        raise ConfigError('config.generator: expected "worst_case" or an eta object')
    report = dual_submartingale_test(field, nu, generator, penalty, y, t, T,
                                     n_paths, seed, n_workers=threads)
    nu_zero = not np.any(np.asarray(nu, dtype=float))
    assertions = [
        _assertion("dual-submartingale", report.verdict in (MARTINGALE, SUBMARTINGALE),
                   estimate=report.estimate, stderr=report.stderr,
                   verdict=report.verdict),
    ]
    if at_optimum and nu_zero and isinstance(penalty, QuadraticPenalty):
        assertions.append(_assertion("dual-equality-at-optimum",
                                     report.verdict == MARTINGALE,
                                     estimate=report.estimate,
                                     stderr=report.stderr))
    return assertions, {"dual": report.to_json()}, {}


def _solve_instance(cfg):
    try:
        return instance_from_json(cfg)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config.instance: {exc}") from exc


def _run_tree_duality(cfg, out: Path, threads, seed):
    inst = _solve_instance(_get(cfg, "tree", "config"))
    if isinstance(inst.families, HorizonTable):
        raise ConfigError("config.tree: duality runs need a single family, not a horizon table")
    target = _number(cfg, "target_gap", "config", required=False, default=1e-6)
    x_values = _get(cfg, "x_values", "config", required=False, default=[inst.x0])
    primal = solve_primal(inst.market, inst.families, inst.utility, inst.x0)
    dual = solve_dual(inst.market, inst.families, inst.utility)
    assertions = []
    reports = {"instance": inst.name, "primal_value": primal.value, "gaps": []}
    for x in x_values:
        rep = duality_gap(primal, dual, float(x))
        reports["gaps"].append(rep.to_json())
        assertions.append(_assertion(f"gap-nonnegative-x={x:g}", rep.final_gap >= -1e-9,
                                     final_gap=rep.final_gap))
        assertions.append(_assertion(f"gap-small-x={x:g}", rep.final_gap <= target,
                                     final_gap=rep.final_gap, target=target))
        assertions.append(_assertion(f"gap-halving-x={x:g}", rep.halving_ok(),
                                     gaps=list(rep.gaps)))
    sweep_gaps = [p.sweep_gap for p in dual.periods if p.sweep_gap is not None]
    if sweep_gaps:
        assertions.append(_assertion("dual-sweep-consistent",
                                     all(abs(g) <= 1e-6 for g in sweep_gaps) and
                                     all(g >= -1e-9 for g in sweep_gaps),
                                     sweep_gaps=sweep_gaps))
    if _get(cfg, "entropic_check", "config", required=False, default=False):
        delta = _number(cfg, "delta", "config", required=False, default=1.0)
        eq = entropic_equivalence_check(inst.market, delta, inst.x0)
        assertions.append(_assertion("entropic-equivalence",
                                     abs(eq["difference"]) <= 1e-8, **eq))
        reports["entropic"] = eq
    return assertions, reports, {}


def _run_tree_dpp(cfg, out: Path, threads, seed):
    inst = _solve_instance(_get(cfg, "tree", "config"))
    s = _integer(cfg, "s", "config", required=False, default=0)
    T = _integer(cfg, "T", "config", required=False, default=None)
    report = check_dpp(inst.market, inst.families, inst.utility, inst.x0, s=s, T=T)
    assertions = [
        _assertion("dpp-residual", report.passed, max_residual=report.max_residual),
    ]
    if _get(cfg, "expect_policy_divergence", "config", required=False, default=False):
        diverged = any(s["policy_divergence_period"] is not None for s in report.splits)
        assertions.append(_assertion("policy-divergence-present", diverged,
                                     splits=list(report.splits)))
    return assertions, {"dpp": report.to_json()}, {}


def _run_tree_consistency(cfg, out: Path, threads, seed):
    inst = _solve_instance(_get(cfg, "tree", "config"))
    T = _integer(cfg, "T", "config", required=False, default=None)
    T_bar = _integer(cfg, "T_bar", "config", required=False, default=None)
    expect = bool(_get(cfg, "expect_consistent", "config", required=False, default=True))
    report = check_time_consistency(inst.market, inst.families, inst.utility,
                                    T, T_bar, inst.x0)
    assertions = [
        _assertion("consistency-as-expected", report.consistent == expect,
                   consistent=report.consistent, expected=expect,
                   findings=len(report.findings)),
    ]
    if _get(cfg, "value_identity", "config", required=False, default=False):
        base = math.log(inst.x0)
        residual = max(abs(v - base) for v in report.values.values())
        assertions.append(_assertion("value-identity", residual <= 1e-12,
                                     max_residual=residual))
    return assertions, {"consistency": report.to_json()}, {}


def _run_inconsistency_demo(cfg, out: Path, threads, seed):
    entries = _get(cfg, "lambda_table", "config")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("config.lambda_table: expected a nonempty list of {t, T, value}")
    table = {}
    for i, e in enumerate(entries):
        table[(
            _number(e, "t", f"config.lambda_table[{i}]"),
            _number(e, "T", f"config.lambda_table[{i}]"),
        )] = _number(e, "value", f"config.lambda_table[{i}]")
    sigma = _number(cfg, "sigma", "config")
    demo = inconsistency_demo_continuous(table, sigma)
    assertions = [
        _assertion("value-identity-exact", demo.max_value_residual == 0.0,
                   max_residual=demo.max_value_residual),
        _assertion("strategy-conflicts-present", len(demo.strategy_conflicts) > 0,
                   count=len(demo.strategy_conflicts)),
        _assertion("horizon-conflicts-present", len(demo.horizon_conflicts) > 0,
                   count=len(demo.horizon_conflicts)),
    ]
    csv_path = out / "inconsistency_demo.csv"
    with open(csv_path, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["t", "T", "lambda", "fraction", "expected_growth",
                         "penalty", "value_residual"])
        for e in demo.entries:
            writer.writerow([e["t"], e["T"], e["lambda"], e["fraction"],
                             e["expected_growth"], e["penalty"], e["value_residual"]])
    return assertions, {"demo": demo.to_json()}, {"csv": str(csv_path)}


def _run_pde_drift(cfg, out: Path, threads, seed):
    g = _integrand(_get(cfg, "penalty", "config"), "config.penalty")
    a_block = _get(cfg, "a", "config", required=False, default=[0.0, 0.0])
    if not (isinstance(a_block, list) and len(a_block) == 2):
        raise ConfigError("config.a: expected [a1, a2]")
    a = (float(a_block[0]), float(a_block[1]))
    lam = _number(cfg, "lambda_hat", "config")
    result = drift_from_relation(g, a, lam)
    assertions = []
    reports = {"drift": result.to_json()}
    if _get(cfg, "expect_unbounded", "config", required=False, default=False):
        assertions.append(_assertion("unbounded-detected", result.unbounded))
    else:
        assertions.append(_assertion("drift-bounded", not result.unbounded))
        dense = dense_grid_drift(g, a, lam)
        reports["dense"] = dense.to_json()
        assertions.append(_assertion("dense-grid-agrees",
                                     abs(result.b - dense.b) <= 1e-4,
                                     golden=result.b, dense=dense.b))
        if isinstance(g, QuadraticIntegrand) and a == (0.0, 0.0):
            closed = -g.delta * lam**2 / (2.0 * (1.0 + g.delta))
            assertions.append(_assertion("matches-closed-form",
                                         abs(result.b - closed) <= 1e-6,
                                         value=result.b, closed_form=closed))
    return assertions, reports, {}


def _run_pde_residual(cfg, out: Path, threads, seed):
    fb = _get(cfg, "field", "config")
    base = _number(fb, "lambda_hat", "config.field")
    slope = _number(fb, "slope", "config.field", required=False, default=0.0)
    delta = _number(fb, "delta", "config.field", required=False, default=1.0)
    yb = _get(cfg, "y", "config")
    y_lo = _number(yb, "lo", "config.y")
    y_hi = _number(yb, "hi", "config.y")
    n_y = _integer(yb, "points", "config.y")
    tb = _get(cfg, "t", "config")
    horizon = _number(tb, "horizon", "config.t")
    n_t = _integer(tb, "steps", "config.t")
    refinements = _integer(cfg, "refinements", "config", required=False, default=3)
    g = _integrand(
        _get(cfg, "penalty", "config", required=False,
             default={"type": "quadratic", "delta": delta}),
        "config.penalty",
    )
    a_of_t = polynomial_mpr_accumulator(base, slope, delta)
    y_grid = np.geomspace(y_lo, y_hi, n_y)

    maxima = []
    for r in range(refinements):
        steps = n_t * 2**r
        t_grid = np.linspace(0.0, horizon, steps + 1)
        V = sample_dual_field(a_of_t, y_grid, t_grid)
        rep = hjb_residual(V, y_grid, t_grid, g,
                           lambda t: base + slope * t)
        maxima.append(rep.max_abs)
    reports = {"max_abs_by_level": maxima, "steps_base": n_t,
               "condition": rep.to_json()["condition"]}
    assertions = [
        _assertion("residual-decreasing",
                   all(b <= a for a, b in zip(maxima, maxima[1:])),
                   maxima=maxima),
    ]
    if slope != 0.0:
        ratios = [b / a for a, b in zip(maxima, maxima[1:]) if a > 0]
        assertions.append(_assertion("first-order-rate",
                                     all(0.35 <= r <= 0.65 for r in ratios),
                                     ratios=ratios))
    nc = _get(cfg, "negative_control", "config", required=False)
    if nc is not None:
        factor = _number(nc, "factor", "config.negative_control")
        wrong = polynomial_mpr_accumulator(base, slope, delta)
        bad_a = lambda t: factor * wrong(t)
        t_grid = np.linspace(0.0, horizon, n_t * 2 ** (refinements - 1) + 1)
        V = sample_dual_field(bad_a, y_grid, t_grid)
        rep_bad = hjb_residual(V, y_grid, t_grid, g, lambda t: base + slope * t)
        floor = _number(nc, "floor", "config.negative_control")
        assertions.append(_assertion("negative-control-detected",
                                     rep_bad.max_abs >= floor,
                                     max_abs=rep_bad.max_abs, floor=floor))
        reports["negative_control_max_abs"] = rep_bad.max_abs
    rep.to_csv(out / "hjb_residual.csv")
    return assertions, reports, {"residual_csv": str(out / "hjb_residual.csv")}


_RUNNERS = {
    "simulate": _run_simulate,
    "verify-saddle": _run_verify_saddle,
    "verify-dual": _run_verify_dual,
    "tree-duality": _run_tree_duality,
    "tree-dpp": _run_tree_dpp,
    "tree-consistency": _run_tree_consistency,
    "inconsistency-demo": _run_inconsistency_demo,
    "pde-drift": _run_pde_drift,
    "pde-residual": _run_pde_residual,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise ConfigError(f"--threads must be >= 1, got {flag}")
        return flag
    env = os.environ.get("ROBUST_FORWARD_THREADS")
    if env:
        try:
            val = int(env)
        except ValueError:
            raise ConfigError(f"ROBUST_FORWARD_THREADS must be an integer, got {env!r}")
        if val < 1:
            raise ConfigError(f"ROBUST_FORWARD_THREADS must be >= 1, got {val}")
        return val
    return os.cpu_count() or 1


def run_experiment(config: dict, out_dir, *, threads: int = 1, seed: int | None = None) -> dict:
    """Run one experiment; returns the results document (also written to
    ``out_dir/results.json``)."""
    if not isinstance(config, dict):
        raise ConfigError("config: expected a JSON object")
    kind = _get(config, "kind", "config")
    if kind not in _RUNNERS:
        raise ConfigError(
            f"config.kind: unknown kind {kind!r}; valid kinds: {sorted(_RUNNERS)}"
        )
    if seed is None:
        seed = _integer(config, "seed", "config", required=False, default=20240801)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory {out}: {exc}") from exc

    assertions, reports, artifacts = _RUNNERS[kind](config, out, threads, seed)
    passed = all(a["passed"] for a in assertions)
    results = {
        "kind": kind,
        "seed": seed,
        "package_version": __version__,
        "passed": passed,
        "assertions": _jsonable(assertions),
        "reports": _jsonable(reports),
    }
    manifest = {
        "config": config,
        "kind": kind,
        "seed": seed,
        "threads": threads,
        "out_dir": str(out),
        "artifacts": _jsonable(artifacts),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="robust-forward",
        description="Run robust forward criterion experiments from a JSON config.",
    )
    parser.add_argument("--config", required=True, help="path to the experiment JSON")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores, or "
                             "ROBUST_FORWARD_THREADS)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    try:
        threads = resolve_threads(args.threads)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 3
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
            return 2
        results = run_experiment(config, args.out, threads=threads, seed=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 3

    for a in results["assertions"]:
        status = "PASS" if a["passed"] else "FAIL"
        print(f"[{status}] {a['name']}")
    if results["passed"]:
        print(f"ok: {len(results['assertions'])} assertions passed")
        return 0
    failed = sum(1 for a in results["assertions"] if not a["passed"])
    print(f"FAILED: {failed} of {len(results['assertions'])} assertions")
    return 1


if __name__ == "__main__":
    sys.exit(main())
