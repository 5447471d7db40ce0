"""Acceptance suite: every criterion returns check records and a CSV payload."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import NonCauchyWarning
from ..geometry import Grid, VectorFieldSpec, check_outpointing
from ..limit import (
    bv_window,
    complementarity_diagnostics,
    distance_to_reference,
    pressure_integral,
    run_msweep,
    tail_decreasing,
    transport_reference,
)
from ..reaction import ReactionSpec, barrier_residuals, build_barriers, clamp_map, verify_confinement
from ..semigroup import PorousMediumOperator, mild_solve, step_scheme, verify_evolution_estimates
from ..stationary import StationaryProblem, solve_stationary, verify_stationary_estimates
from . import oracles
from .report import CheckRecord, RunReport, csv_text, digest

TIERS = ("smoke", "desk")


@dataclass
class Tier:
    name: str
    contraction_pairs: int
    order_pairs: int
    budgets: dict = field(default_factory=dict)


TIER_SETTINGS = {
    "smoke": Tier("smoke", 6, 3),
    "desk": Tier("desk", 20, 10),
}

BUDGETS = {1: 30.0, 2: 60.0, 3: 30.0, 4: 30.0, 5: 10.0, 6: 60.0, 7: 60.0, 8: 600.0, 9: 120.0, 10: 60.0}


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[CheckRecord]
    csv_name: str
    csv: str
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _grid(n: int = 64) -> Grid:
    return Grid.uniform(n)


def _x(grid: Grid) -> np.ndarray:
    return grid.cell_centers()[..., 0]


def _bump(grid: Grid, amp: float = 1.0, c: float = 0.5, w: float = 0.15) -> np.ndarray:
    return amp * np.exp(-(((_x(grid) - c) / w) ** 2))


def _plateau(grid: Grid) -> np.ndarray:
    return np.clip((0.25 - np.abs(_x(grid) - 0.5)) / 0.1, 0.0, 1.0)


def _expanding(grid: Grid) -> VectorFieldSpec:
    return VectorFieldSpec.from_callable(grid, lambda X: X - 0.5, name="x-1/2")


def _compressing(grid: Grid) -> VectorFieldSpec:
    return VectorFieldSpec.from_callable(grid, lambda X: -X, name="-x")


def _l1(grid: Grid, a) -> float:
    return grid.volume * float(np.sum(np.abs(a)))


def _rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, k])


def _smooth_random(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    raw = rng.uniform(-1.0, 1.0, size=grid.shape)
    return np.convolve(raw, np.ones(3) / 3.0, mode="same")


# ---------------------------------------------------------------------------


def crit_contraction(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    lam = 0.5 * min(V.lambda0, 1.0)
    rng = _rng(seed, 1)
    rows, worst = [], math.inf
    for m in (2.0, 5.0):
        for k in range(tier.contraction_pairs):
            f1, f2 = _smooth_random(grid, rng), _smooth_random(grid, rng)
            v1 = solve_stationary(StationaryProblem(V, lam, m, f1)).v
            v2 = solve_stationary(StationaryProblem(V, lam, m, f2)).v
            df, dv = _l1(grid, f1 - f2), _l1(grid, v1 - v2)
            rel = (df - dv) / df
            worst = min(worst, rel)
            rows.append((m, k, df, dv, rel))
    chk = CheckRecord("resolvent_l1_contraction", "resolvent L1 contraction", -worst, 1e-10, worst >= -1e-10)
    return CriterionResult(1, "resolvent L1 contraction", [chk], "c01_contraction.csv",
                           csv_text(("m", "pair", "l1_df", "l1_dv", "relative_slack"), rows))


def crit_order(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    rng = _rng(seed, 2)
    m = 3.0
    op = PorousMediumOperator(V, m)
    rows, worst_s, worst_e = [], -math.inf, -math.inf
    for k in range(tier.order_pairs):
        f1 = _smooth_random(grid, rng)
        f2 = f1 + np.abs(_smooth_random(grid, rng))
        v1 = solve_stationary(StationaryProblem(V, 0.5, m, f1)).v
        v2 = solve_stationary(StationaryProblem(V, 0.5, m, f2)).v
        ws = float(np.max(v1 - v2))
        u01 = 0.5 * _smooth_random(grid, rng)
        u02 = u01 + 0.5 * np.abs(_smooth_random(grid, rng))
        s1 = step_scheme(op, u01, f1, 1.0, 20)
        s2 = step_scheme(op, u02, f2, 1.0, 20)
        we = float(np.max(s1.u - s2.u))
        worst_s, worst_e = max(worst_s, ws), max(worst_e, we)
        rows.append((k, ws, we))
    checks = [
        CheckRecord("order_stationary", "comparison principle: ordered data", worst_s, 1e-10, worst_s <= 1e-10),
        CheckRecord("order_evolution", "comparison principle: ordered data", worst_e, 1e-10, worst_e <= 1e-10),
    ]
    return CriterionResult(2, "order preservation", checks, "c02_order.csv",
                           csv_text(("pair", "max_v1_minus_v2", "max_u1_minus_u2"), rows))


def _estimate_cases():
    grid = _grid(64)
    for V in (_expanding(grid), _compressing(grid)):
        yield V, _bump(grid), 0.5 * _bump(grid)


def crit_lq(tier: Tier, seed: int) -> CriterionResult:
    checks, rows = [], []
    m = 3.0
    for V, f, u0 in _estimate_cases():
        prob = StationaryProblem(V, 0.5, m, f)
        rep = verify_stationary_estimates(solve_stationary(prob), prob)
        sc = step_scheme(PorousMediumOperator(V, m), u0, f, 1.0, 20)
        for r in [r for r in rep.rows if r.name.startswith("lq")] + \
                 [r for r in verify_evolution_estimates(sc, V) if r.name.startswith("lq")]:
            checks.append(CheckRecord(f"{r.name}[{V.name}]", "L^q a-priori bound", r.value, r.bound, r.slack >= -1e-8))
            rows.append((V.name, r.name, r.value, r.bound, r.slack))
    return CriterionResult(3, "L^q estimates", checks, "c03_lq.csv",
                           csv_text(("drift", "estimate", "value", "bound", "slack"), rows))


def crit_energy(tier: Tier, seed: int) -> CriterionResult:
    checks, rows = [], []
    m = 3.0
    for V, f, u0 in _estimate_cases():
        prob = StationaryProblem(V, 0.5, m, f)
        srow = verify_stationary_estimates(solve_stationary(prob), prob).row("energy")
        sc = step_scheme(PorousMediumOperator(V, m), u0, f, 1.0, 20)
        erow = [r for r in verify_evolution_estimates(sc, V) if r.name == "energy_evol"][0]
        for r in (srow, erow):
            checks.append(CheckRecord(f"{r.name}[{V.name}]", "energy inequality", r.value, r.bound, r.slack >= -1e-8))
            rows.append((V.name, r.name, r.value, r.bound, r.slack))
    return CriterionResult(4, "energy inequalities", checks, "c04_energy.csv",
                           csv_text(("drift", "estimate", "value", "bound", "slack"), rows))


def crit_heat(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(32)
    V = VectorFieldSpec.zero(grid)
    u0 = _bump(grid)
    T, n = 0.1, 20
    sc = step_scheme(PorousMediumOperator(V, 1.0), u0, None, T, n)
    ref = oracles.heat_implicit_euler(u0, grid.h[0], T, n)
    errs = [_l1(grid, a - b) for a, b in zip(sc.u, ref)]
    worst = max(errs)
    chk = CheckRecord("heat_dense_oracle", "implicit Euler heat equation, dense oracle", worst, 1e-8, worst <= 1e-8)
    return CriterionResult(5, "heat oracle", [chk], "c05_heat.csv",
                           csv_text(("step", "l1_error"), list(enumerate(errs))))


def crit_crandall_liggett(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    T = 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonCauchyWarning)
        ms = mild_solve(PorousMediumOperator(V, 3.0), _bump(grid), None, T, T / 80, levels=4)
    ns = [s.n for s in ms.schemes]
    chk = CheckRecord("self_convergence_trace", "exponential formula / mild solution limit",
                      ms.trace[-1], ms.trace[-2], ms.cauchy_ok)
    rows = [(a, b, g) for a, b, g in zip(ns, ns[1:], ms.trace)]
    return CriterionResult(6, "Crandall-Liggett self-convergence", [chk], "c06_cauchy.csv",
                           csv_text(("n_coarse", "n_fine", "sup_l1_gap"), rows))


def crit_confinement(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    u0 = _bump(grid)
    T, n, m = 0.5, 20, 2.0
    checks, rows = [], []
    for spec in (ReactionSpec.linear(grid, 0.5), ReactionSpec.quadratic(grid)):
        bar = build_barriers(spec, u0, V, T, n)
        F = clamp_map(spec, bar)
        sc = step_scheme(PorousMediumOperator(V, m), u0, None, T, n, reaction=F)
        rep = verify_confinement(sc, bar, tol=1e-8)
        up, lo = barrier_residuals(bar, spec, V)
        checks.append(CheckRecord(f"confinement[{spec.kind}]", "confinement between barriers",
                                  rep.worst, 1e-8, rep.passed))
        tol = 1e-6 * max(1.0, bar.bound)
        checks.append(CheckRecord(f"barrier_residual[{spec.kind}]", "barrier sub/supersolution inequalities",
                                  max(-up, lo), tol, -up <= tol and lo <= tol))
        for t, a, b, w1, w2 in zip(rep.times, rep.upper_excess, rep.lower_excess, bar.lower, bar.upper):
            rows.append((spec.kind, t, w1, w2, a, b))
    return CriterionResult(7, "confinement by barriers", checks, "c07_confinement.csv",
                           csv_text(("reaction", "time", "lower", "upper", "upper_excess", "lower_excess"), rows))


SWEEP_MS = (4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


def crit_limit(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    cert = check_outpointing(V, grid, 0.2)
    sweep = run_msweep(V, _plateau(grid), None, 0.5, 20, SWEEP_MS)
    comp = complementarity_diagnostics(sweep)
    dist = sweep.distances_to_limit()
    ms = sweep.finite_ok
    excess = max(comp[m].excess for m in ms)
    res = [comp[m].residual for m in ms]
    checks = [
        CheckRecord("outpointing_certificate", "outpointing drift near the boundary",
                    -cert.margin, cert.tol, cert.passed),
        CheckRecord("sweep_complete", "plumbing", float(len(sweep.failures)), 0.0, not sweep.failures),
        CheckRecord("sup_excess", "density constraint |u| <= 1 in the limit", excess, 1e-6, excess <= 1e-6),
        CheckRecord("complementarity_trend", "limit graph u in sign(p)", res[-1], res[-2],
                    len(ms) == len(SWEEP_MS) and tail_decreasing(res)),
        CheckRecord("distance_to_limit_trend", "convergence u_m -> u in C([0,T);L1)", dist[-1], dist[-2],
                    len(ms) == len(SWEEP_MS) and tail_decreasing(dist)),
    ]
    rows = [(m, comp[m].excess, comp[m].residual, comp[m].graph_violation, d) for m, d in zip(ms, dist)]
    return CriterionResult(8, "incompressible limit trend", checks, "c08_sweep.csv",
                           csv_text(("m", "excess", "complementarity", "graph_violation", "dist_to_limit"), rows))


def crit_transport(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    u0 = _plateau(grid)
    T = 0.5
    sweep = run_msweep(V, u0, 0.5, T, 50, SWEEP_MS, include_limit=False)
    ref = transport_reference(u0, 0.5, V, T)
    ms = sweep.finite_ok
    pint = [pressure_integral(sweep.schemes[m], grid) for m in ms]
    dist = [distance_to_reference(sweep.schemes[m], ref, grid) for m in ms]
    bound = 5.0 * grid.h[0]
    top = sweep.schemes.get(128.0)
    d128 = distance_to_reference(top, ref, grid) if top is not None else math.inf
    checks = [
        CheckRecord("pressure_integral_trend", "transport regime: pressure vanishes", pint[-1], pint[-2],
                    len(ms) == len(SWEEP_MS) and tail_decreasing(pint)),
        CheckRecord("distance_to_transport", "transport regime: reaction-transport limit", d128, bound, d128 <= bound),
        CheckRecord("transport_range", "transport regime: 0 <= u <= 1",
                    float(max(ref.u.max() - 1.0, -ref.u.min())), 1e-12,
                    bool(ref.u.max() <= 1.0 + 1e-12 and ref.u.min() >= -1e-12)),
    ]
    rows = [(m, a, b) for m, a, b in zip(ms, pint, dist)]
    return CriterionResult(9, "transport regime", checks, "c09_transport.csv",
                           csv_text(("m", "pressure_integral", "dist_to_transport"), rows))


def crit_bv(tier: Tier, seed: int) -> CriterionResult:
    grid = _grid(64)
    V = _expanding(grid)
    rep = bv_window(V, _bump(grid, 2.0, w=0.1), 0.5, (2.0, 8.0, 32.0, 128.0), 0.2)
    chk = CheckRecord("windowed_tv_bounded", "windowed BV bound on stationary solutions",
                      max(rep.values), rep.factor * rep.values[0], rep.bounded)
    rows = [(m, v, a, b) for m, v, a, b in zip(rep.ms, rep.values, rep.lhs, rep.rhs)]
    return CriterionResult(10, "windowed BV boundedness", [chk], "c10_bv.csv",
                           csv_text(("m", "windowed_tv", "scaled_lhs", "rhs"), rows))


CRITERIA: dict[int, Callable[[Tier, int], CriterionResult]] = {
    1: crit_contraction,
    2: crit_order,
    3: crit_lq,
    4: crit_energy,
    5: crit_heat,
    6: crit_crandall_liggett,
    7: crit_confinement,
    8: crit_limit,
    9: crit_transport,
    10: crit_bv,
}


def crit_determinism(tier: Tier, seed: int, first: dict[int, CriterionResult]) -> CriterionResult:
    """Re-run the seeded criteria and compare payloads byte for byte."""
    rows, same = [], True
    for k in (1, 2, 5):
        again = CRITERIA[k](tier, seed)
        ok = again.csv == first[k].csv and [c.passed for c in again.checks] == [c.passed for c in first[k].checks]
        same &= ok
        rows.append((k, digest(first[k].csv), digest(again.csv), ok))
    chk = CheckRecord("rerun_identical", "plumbing", 0.0 if same else 1.0, 0.0, same)
    return CriterionResult(11, "determinism", [chk], "c11_determinism.csv",
                           csv_text(("criterion", "digest_first", "digest_second", "identical"), rows))


def run_suite(seed: int = 0, tier: str = "desk", only: list[int] | None = None) -> tuple[RunReport, list[CriterionResult]]:
    if tier not in TIER_SETTINGS:
        raise ValueError(f"tier must be one of {TIERS}")
    t = TIER_SETTINGS[tier]
    report = RunReport("verify", digest(f"verify:{tier}:{seed}"), meta={"seed": seed, "tier": tier})
    results: dict[int, CriterionResult] = {}
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        t0 = time.perf_counter()
        results[k] = fn(t, seed)
        results[k].seconds = time.perf_counter() - t0
    if not only or 11 in only:
        need = {k: results.get(k) or CRITERIA[k](t, seed) for k in (1, 2, 5)}
        t0 = time.perf_counter()
        results[11] = crit_determinism(t, seed, need)
        results[11].seconds = time.perf_counter() - t0
    for k in sorted(results):
        r = results[k]
        report.add(*r.checks)
        report.timings[f"criterion_{k}"] = r.seconds
        if k in BUDGETS and r.seconds > BUDGETS[k]:
            warnings.warn(f"criterion {k} took {r.seconds:.1f}s (budget {BUDGETS[k]:.0f}s)", RuntimeWarning)
    return report, [results[k] for k in sorted(results)]
