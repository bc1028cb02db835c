"""Acceptance gate: eight behavioral criteria at pinned tolerances.

Each test prints exactly one ``[PASS]``/``[FAIL]`` line (run with ``-s``
to see them on success; pytest shows captured output on failure).  The
tests are numbered so that ``pytest -v`` reports them in criterion order.
"""

import math
import time

import numpy as np

from robust_forward.cli import run_experiment
from robust_forward.criteria import equivalent_standard_fields, field_log
from robust_forward.dualpde import (
    QuadraticIntegrand,
    dense_grid_drift,
    drift_from_relation,
    hjb_residual,
    polynomial_mpr_accumulator,
    sample_dual_field,
)
from robust_forward.measures import QuadraticPenalty
from robust_forward.oracle import (
    bundled_instance,
    check_dpp,
    check_time_consistency,
    duality_gap,
    entropic_equivalence_check,
    solve_dual,
    solve_primal,
)
from robust_forward.paths import MarketCoefficients, TimeGrid, simulate_ensemble
from robust_forward.strategies import (
    FractionalKelly,
    fractional_kelly_fractions,
    worst_case_generator,
)
from robust_forward.verify import (
    MARTINGALE,
    drift_test,
    self_generation_scan,
)

BENCH = MarketCoefficients(sigma=0.2, lambda_hat=0.3, delta=1.0)
GRID = TimeGrid(horizon=1.0, n_steps=252)
SEED = 20240801


def _line(name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {name}: {detail}", flush=True)
    assert passed, f"{name}: {detail}"


def test_01_saddle_martingale_and_reference_drift():
    # Benchmark market, T=1, 252 steps, 1e5 plain Monte Carlo paths,
    # single-threaded, under 60 s.  At the saddle the criterion process
    # drifts by 0; at the reference generator it gains 0.01125 per unit
    # time, both within 3 standard errors.
    field = field_log(BENCH, GRID)
    penalty = QuadraticPenalty(1.0)
    eta_bar = worst_case_generator(field.coeffs, GRID)
    from robust_forward.measures import GeneratorPair

    zero = GeneratorPair.on(GRID, 0.0, 0.0)
    start = time.monotonic()
    saddle = drift_test(field, FractionalKelly(), eta_bar, penalty, 0.0, 1.0,
                        100_000, SEED, antithetic=False, n_workers=1)
    reference = drift_test(field, FractionalKelly(), zero, penalty, 0.0, 1.0,
                           100_000, SEED + 1, antithetic=False, n_workers=1)
    elapsed = time.monotonic() - start

    expected = 0.01125  # (delta/2) lambda_hat^2 / (1+delta)^2 per unit time
    ok = (
        saddle.verdict == MARTINGALE
        and abs(saddle.estimate) <= 3 * saddle.stderr
        and abs(reference.estimate - expected) <= 3 * reference.stderr
        and elapsed < 60.0
    )
    _line(
        "criterion-1 saddle-martingale",
        ok,
        f"saddle {saddle.estimate:+.3e} (se {saddle.stderr:.2e}), "
        f"reference {reference.estimate:.6f} vs {expected} "
        f"(se {reference.stderr:.2e}), {elapsed:.1f}s",
    )


def test_02_self_generation_scan():
    # 5x5 scan over initial scalings rho and drawdown scalings c; the
    # unscaled point must sit at the saddle with the quadratic vertices
    # of both marginals inside the confidence interval of (1, 1).
    field = field_log(BENCH, GRID)
    scan = self_generation_scan(
        field, 0.0, 1.0,
        [0.5, 0.75, 1.0, 1.25, 1.5],
        [0.5, 0.75, 1.0, 1.25, 1.5],
        50_000, SEED + 2, n_workers=1,
    )
    passed_checks = {k: bool(v["passed"]) for k, v in scan.checks.items()}
    ok = (
        scan.verdict
        and all(passed_checks.values())
        and abs(scan.vertex_rho - 1.0) <= 3 * scan.vertex_rho_se
        and abs(scan.vertex_c - 1.0) <= 3 * scan.vertex_c_se
    )
    _line(
        "criterion-2 self-generation",
        ok,
        f"checks {passed_checks}, vertex ({scan.vertex_rho:.4f}, "
        f"{scan.vertex_c:.4f}) +- 3*({scan.vertex_rho_se:.1e}, "
        f"{scan.vertex_c_se:.1e})",
    )


def test_03_tree_duality_gap():
    # On every dualizable bundled instance the certified gap closes to
    # 1e-6 and at least halves (up to the certification floor) on each
    # grid-halving step; realized gaps never exceed their bounds.
    names = ["binomial-complete", "trinomial-3measure", "entropic-binomial"]
    details, ok = [], True
    for name in names:
        inst = bundled_instance(name)
        primal = solve_primal(inst.market, inst.families, inst.utility, inst.x0)
        dual = solve_dual(inst.market, inst.families, inst.utility)
        rep = duality_gap(primal, dual, inst.x0)
        good = (
            rep.final_gap <= 1e-6
            and rep.final_gap >= -1e-9
            and rep.halving_ok()
            and all(g <= b + 1e-12 for g, b in zip(rep.gaps, rep.bounds))
        )
        ok = ok and good
        details.append(f"{name} gap {rep.final_gap:.1e}")
    _line("criterion-3 duality-gap", ok, ", ".join(details))


def test_04_dpp_and_consistency():
    # Product families recompose across any split to 1e-8 and restrict/
    # roll exactly; the degenerate horizon table keeps a zero value
    # residual while showing both strategy and horizon inconsistency.
    ok = True
    details = []
    for name in ["binomial-complete", "trinomial-3measure", "entropic-binomial"]:
        inst = bundled_instance(name)
        rep = check_dpp(inst.market, inst.families, inst.utility, inst.x0)
        ok = ok and rep.passed and rep.max_residual <= 1e-8
        details.append(f"{name} residual {rep.max_residual:.1e}")

    good = bundled_instance("binomial-complete")
    cons = check_time_consistency(good.market, good.families, good.utility,
                                  x0=good.x0)
    exact_roll = abs(
        cons.values[(0, 1)] + cons.values[(1, 2)] - cons.values[(0, 2)]
    )
    ok = ok and cons.consistent and exact_roll <= 1e-12

    bad = bundled_instance("degenerate-table")
    incons = check_time_consistency(bad.market, bad.families, bad.utility,
                                    x0=bad.x0)
    kinds = sorted(f["kind"] for f in incons.findings)
    zero_residual = all(v == math.log(bad.x0) for v in incons.values.values())
    ok = ok and not incons.consistent and kinds == ["horizon", "rolling"]
    ok = ok and zero_residual
    details.append(
        f"rolling residual {exact_roll:.1e}, degenerate findings {kinds}"
    )
    _line("criterion-4 dpp-consistency", ok, ", ".join(details))


def test_05_pde_drift_and_residual():
    # The grid-minimized drift matches -delta lambda^2 / (2(1+delta)) to
    # 1e-6; the HJB residual of an exact field with time-varying
    # coefficients converges at first order; a mis-scaled field stays
    # detectable under refinement.
    ok = True
    details = []
    for delta, lam in [(0.5, 0.3), (1.0, 0.3), (2.0, 0.15)]:
        closed = -delta * lam**2 / (2.0 * (1.0 + delta))
        g = QuadraticIntegrand(delta)
        golden = drift_from_relation(g, (0.0, 0.0), lam)
        dense = dense_grid_drift(g, (0.0, 0.0), lam)
        ok = ok and abs(golden.b - closed) <= 1e-6
        ok = ok and abs(dense.b - closed) <= 1e-6
    details.append("drift to closed form <=1e-6")

    y = np.geomspace(0.5, 2.0, 41)
    a_of_t = polynomial_mpr_accumulator(0.3, 0.12, 1.0)
    lam_t = lambda s: 0.3 + 0.12 * s
    maxima = []
    for n_t in (17, 33, 65):
        t = np.linspace(0.0, 1.0, n_t)
        V = sample_dual_field(a_of_t, y, t)
        maxima.append(hjb_residual(V, y, t, QuadraticIntegrand(1.0), lam_t).max_abs)
    ratios = [b / a for a, b in zip(maxima, maxima[1:])]
    ok = ok and all(0.35 <= r <= 0.65 for r in ratios)
    details.append("residual ratios " + ", ".join(f"{r:.3f}" for r in ratios))

    t = np.linspace(0.0, 1.0, 65)
    V_bad = sample_dual_field(lambda s: 1.5 * a_of_t(s), y, t)
    bad = hjb_residual(V_bad, y, t, QuadraticIntegrand(1.0), lam_t).max_abs
    ok = ok and bad >= 1e-4
    details.append(f"negative control {bad:.1e}")
    _line("criterion-5 pde-drift-residual", ok, ", ".join(details))


def test_06_strategy_and_tilt_identities():
    # On random time-varying coefficients the optimal fraction equals
    # lambda_bar / sigma float-for-float, and the criterion accumulator
    # plus integrated penalty reproduces -1/2 int lambda_bar^2 within
    # quadrature rounding.
    rng = np.random.default_rng(404)
    grid = TimeGrid(1.0, 200)
    market = MarketCoefficients(
        sigma=0.1 + 0.2 * rng.random(200),
        lambda_hat=0.05 + 0.5 * rng.random(200),
        delta=0.2 + 2.0 * rng.random(200),
    )
    field = field_log(market, grid)
    cp = field.coeffs
    pi_bar = fractional_kelly_fractions(cp, grid)
    exact = np.array_equal(pi_bar, field.lambda_bar / cp.sigma)

    eq = equivalent_standard_fields(cp, grid)
    residual = eq.max_identity_residual()
    floor = 200 * np.finfo(float).eps * float(np.max(np.abs(field.A)) + 1.0)
    ok = exact and residual <= floor
    _line(
        "criterion-6 identities",
        ok,
        f"fraction identity exact={exact}, tilt residual "
        f"{residual:.1e} (floor {floor:.1e})",
    )


def test_07_thread_byte_identity(tmp_path):
    # Same seed, 1 vs 2 vs 8 workers: identical ensembles and identical
    # results documents, byte for byte.
    cp = BENCH.realize(GRID)
    base = simulate_ensemble(cp, GRID, 20_000, SEED, antithetic=True, n_workers=1)
    same = True
    for w in (2, 8):
        ens = simulate_ensemble(cp, GRID, 20_000, SEED, antithetic=True, n_workers=w)
        same = same and ens.S.tobytes() == base.S.tobytes()
        same = same and ens.dW1.tobytes() == base.dW1.tobytes()
        same = same and ens.dW2.tobytes() == base.dW2.tobytes()

    config = {
        "kind": "verify-saddle",
        "market": {"sigma": 0.2, "lambda_hat": 0.3, "delta": 1.0},
        "grid": {"horizon": 1.0, "n_steps": 252},
        "n_paths": 20_000,
        "antithetic": True,
        "seed": SEED,
    }
    docs = []
    for w in (1, 2, 8):
        run_experiment(config, tmp_path / str(w), threads=w)
        docs.append((tmp_path / str(w) / "results.json").read_bytes())
    same = same and docs[0] == docs[1] == docs[2]
    _line("criterion-7 thread-determinism", same,
          f"ensembles and results.json identical across 1/2/8 workers: {same}")


def test_08_entropic_equivalence():
    # On every bundled market the robust value under the entropic family
    # equals the certainty-equivalent transform of the optimal terminal
    # utility to 1e-8.
    ok = True
    details = []
    for name in [
        "binomial-complete",
        "trinomial-3measure",
        "entropic-binomial",
        "degenerate-table",
    ]:
        inst = bundled_instance(name)
        res = entropic_equivalence_check(inst.market, 1.0, x0=inst.x0)
        ok = ok and abs(res["difference"]) <= 1e-8
        details.append(f"{name} diff {abs(res['difference']):.1e}")
    _line("criterion-8 entropic-equivalence", ok, ", ".join(details))
