"""Command line entry point: stationary, evolve, sweep-m, verify."""

from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from ..errors import (
    BarrierUnavailable,
    CFLViolated,
    ConfigError,
    HorizonTooLong,
    LambdaOutOfRange,
    NonCauchyWarning,
    NonConvergence,
    RegimePreconditionViolated,
)
from ..geometry import Grid, check_outpointing
from ..limit import (
    complementarity,
    congestion_masks,
    distance_to_reference,
    pressure_integral,
    run_msweep,
    tail_decreasing,
    transport_reference,
    windowed_tv,
)
from ..reaction import ReactionSpec, build_barriers, clamp_map, verify_confinement
from ..semigroup import PorousMediumOperator, mild_solve, mild_solve_reaction, step_scheme, verify_evolution_estimates
from ..stationary import Operators, SolverConfig, StationaryProblem, graph_split, is_m_matrix, solve_stationary, verify_stationary_estimates
from . import oracles
from .config import RunConfig
from .norms import COLUMNS as NORM_COLUMNS, NormLedger
from .report import CheckRecord, RunReport, csv_text, digest, mask_bytes
from .verify import TIERS, run_suite

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
INPUT_ERRORS = (ConfigError, LambdaOutOfRange, HorizonTooLong, BarrierUnavailable, RegimePreconditionViolated,
                CFLViolated)


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return RunConfig.loads(text)


def _coords(grid: Grid) -> np.ndarray:
    return grid.cell_centers().reshape(-1, grid.dim)


def _axis_names(grid: Grid) -> list[str]:
    return ["x", "y"][: grid.dim]


def _solver_cfg(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(tol=cfg.solver_tol)


# ---------------------------------------------------------------------------


def cmd_stationary(cfg: RunConfig) -> tuple[RunReport, dict[str, bytes]]:
    grid = cfg.grid()
    V = cfg.drift.build(grid)
    f = cfg.f.evaluate(grid)
    prob = StationaryProblem(V, cfg.lam, cfg.m, f)
    scfg = _solver_cfg(cfg)
    ops = Operators(V)
    sol = solve_stationary(prob, scfg, ops=ops)
    rep = RunReport("stationary", digest(cfg.dumps()))
    for r in verify_stationary_estimates(sol, prob).rows:
        anchor = "stationary L^q bound" if r.name.startswith("lq") else "stationary energy inequality"
        rep.add(CheckRecord(r.name, anchor, r.value, r.bound, r.slack >= -cfg.tol))
    rep.add(CheckRecord("residual_dual", "plumbing", sol.residual_dual, cfg.tol, sol.residual_dual <= cfg.tol))
    if sol.s is not None and np.any(f):
        _, _, dv, dp = graph_split(sol.s, cfg.m)
        mm = is_m_matrix(ops.jacobian(cfg.lam, dv, dp))
        rep.add(CheckRecord("jacobian_m_matrix", "discrete comparison mechanism", 0.0 if mm else 1.0, 0.0, mm))
    if math.isinf(cfg.m):
        over = float(max(np.max(np.abs(sol.v)) - 1.0, 0.0))
        act = np.abs(sol.p) > cfg.mask_threshold
        gap = float(np.max(1.0 - sol.v[act] * np.sign(sol.p[act]), initial=0.0))
        rep.add(CheckRecord("hs_density_bound", "Hele-Shaw graph |v| <= 1", over, cfg.tol, over <= cfg.tol))
        rep.add(CheckRecord("hs_graph", "Hele-Shaw graph v = sign(p) on {p != 0}", gap, cfg.tol, gap <= cfg.tol))
    names = _axis_names(grid)
    rows = [(*c, a, b, q) for c, a, b, q in zip(_coords(grid), f.ravel(), sol.v.ravel(), sol.p.ravel())]
    files = {"solution.csv": csv_text((*names, "f", "v", "p"), rows).encode()}
    rep.meta.update(newton_iterations=sol.newton_iterations, lambda0=V.lambda0, lambda1=V.lambda1)
    return rep, files


def _reaction_spec(cfg: RunConfig, grid: Grid) -> ReactionSpec | None:
    r = cfg.reaction
    if r.kind == "none":
        return None
    if r.kind == "source":
        return ReactionSpec.source(grid, r.source.evaluate(grid))
    if r.kind == "linear":
        return ReactionSpec.linear(grid, r.coefficient)
    if r.kind == "quadratic":
        return ReactionSpec.quadratic(grid)
    return ReactionSpec.sine(grid, r.coefficient or 1.0)


def _trajectory_csv(grid: Grid, scheme) -> bytes:
    names = _axis_names(grid)
    xs = _coords(grid)
    rows = []
    for i, (t, u, p) in enumerate(zip(scheme.times, scheme.u, scheme.p)):
        for c, a, b in zip(xs, u.ravel(), p.ravel()):
            rows.append((i, t, *c, a, b))
    return csv_text(("step", "time", *names, "u", "p"), rows).encode()


def cmd_evolve(cfg: RunConfig) -> tuple[RunReport, dict[str, bytes]]:
    grid = cfg.grid()
    V = cfg.drift.build(grid)
    u0 = cfg.u0.evaluate(grid)
    f = cfg.f.evaluate(grid)
    op = PorousMediumOperator(V, cfg.m, _solver_cfg(cfg))
    spec = _reaction_spec(cfg, grid)
    eps = cfg.T / cfg.steps
    if not op.valid_lambda(eps):
        raise LambdaOutOfRange(f"time step {eps} must be below lambda0 = {V.lambda0}")
    if cfg.f2 is not None:
        f2 = cfg.f2.evaluate(grid)
        if spec is not None:
            raise ConfigError("f2: comparison pairs are only available without a reaction")
        if np.any(f > f2):
            raise ConfigError("f2: comparison mode needs f <= f2 everywhere")
    rep = RunReport("evolve", digest(cfg.dumps()))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonCauchyWarning)
        if spec is not None:
            bar = build_barriers(spec, u0, V, cfg.T, cfg.steps)
            F = clamp_map(spec, bar)
            mild = mild_solve_reaction(op, u0, F, cfg.T, eps, levels=cfg.levels)
        else:
            mild = mild_solve(op, u0, f, cfg.T, eps, levels=cfg.levels)
    sc = mild.finest
    for r in verify_evolution_estimates(sc, V):
        anchor = "evolution L^q bound" if r.name.startswith("lq") else "evolution energy inequality"
        rep.add(CheckRecord(r.name, anchor, r.value, r.bound, r.slack >= -cfg.tol))
    if len(mild.trace) >= 2:
        rep.add(CheckRecord("self_convergence_trace", "mild solution as limit of Euler schemes",
                            mild.trace[-1], mild.trace[-2], mild.cauchy_ok))
    ledger = NormLedger.from_scheme(grid, sc)
    rep.add(CheckRecord("norm_cross_check", "plumbing", 0.0, 0.0, ledger.cauchy_schwarz_ok()))
    if spec is not None:
        conf = verify_confinement(sc, bar, tol=cfg.tol)
        rep.add(CheckRecord("confinement", "confinement between barriers", conf.worst, cfg.tol, conf.passed))
        rep.meta["barrier_provenance"] = bar.provenance
    elif cfg.m == 1.0 and cfg.drift.kind == "zero" and grid.dim == 1:
        ref = oracles.heat_implicit_euler(u0.ravel(), grid.h[0], cfg.T, sc.n, f.ravel())
        err = max(grid.volume * float(np.sum(np.abs(a - b))) for a, b in zip(sc.u, ref))
        rep.add(CheckRecord("heat_dense_oracle", "implicit Euler heat equation, dense oracle", err, cfg.tol,
                            err <= cfg.tol))
    if cfg.f2 is not None:
        sc2 = step_scheme(op, u0, f2, cfg.T, sc.n)
        worst = float(np.max(sc.u - sc2.u))
        rep.add(CheckRecord("ordered_trajectories", "comparison principle: ordered data", worst, 1e-10,
                            worst <= 1e-10))
    files = {
        "trajectory.csv": _trajectory_csv(grid, sc),
        "norms.csv": csv_text(NORM_COLUMNS, ledger.rows).encode(),
        "trace.csv": csv_text(("n_coarse", "n_fine", "sup_l1_gap"),
                              [(a.n, b.n, g) for a, b, g in zip(mild.schemes, mild.schemes[1:], mild.trace)]).encode(),
    }
    return rep, files


SWEEP_COLUMNS = ("m", "step", "time", "l1", "l2", "linf", "excess", "complementarity", "windowed_tv", "p_l1")


def cmd_sweep(cfg: RunConfig, threads: int = 1) -> tuple[RunReport, dict[str, bytes]]:
    if len(cfg.ms) < 2:
        raise ConfigError("ms: sweep-m needs at least two exponents")
    grid = cfg.grid()
    V = cfg.drift.build(grid)
    u0 = cfg.u0.evaluate(grid)
    f = cfg.f.evaluate(grid)
    eps = cfg.T / cfg.steps
    if not 0 < eps < V.lambda0:
        raise LambdaOutOfRange(f"time step {eps} must be below lambda0 = {V.lambda0}")
    scfg = _solver_cfg(cfg)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda m: run_msweep(V, u0, f, cfg.T, cfg.steps, [m], include_limit=False, cfg=scfg),
                                  cfg.ms + [math.inf]))
        sweep = parts[0]
        sweep.ms = list(cfg.ms)
        for p in parts[1:]:
            sweep.schemes.update(p.schemes)
            sweep.failures.update(p.failures)
    else:
        sweep = run_msweep(V, u0, f, cfg.T, cfg.steps, cfg.ms, cfg=scfg)
    if math.inf in sweep.failures and not sweep.schemes:
        raise NonConvergence("every sweep member failed")
    rep = RunReport("sweep-m", digest(cfg.dumps()))
    rep.meta["failures"] = {str(k): v for k, v in sweep.failures.items()}
    rep.add(CheckRecord("sweep_complete", "plumbing", float(len(sweep.failures)), 0.0, not sweep.failures))
    vol = grid.volume
    rows, comp = [], {}
    for m, sc in sweep.schemes.items():
        comp[m] = complementarity(sc, grid, cfg.mask_threshold)
        for i, (t, u, p) in enumerate(zip(sc.times, sc.u, sc.p)):
            a = np.abs(u)
            step_comp = vol * float(np.sum(np.abs(p) * np.maximum(1.0 - a, 0.0)))
            rows.append((m, i, t, vol * a.sum(), math.sqrt(vol * float(np.sum(a * a))), float(a.max()),
                         float(max(a.max() - 1.0, 0.0)), step_comp, windowed_tv(u, grid, cfg.cutoff_h),
                         vol * float(np.abs(p).sum())))
    finite = sweep.finite_ok
    cons = sweep.consecutive_distances()
    if cons:
        rep.add(CheckRecord("self_cauchy_tail", "convergence u_m -> u in C([0,T);L1)", cons[-1], min(cons),
                            all(math.isfinite(c) for c in cons) and cons[-1] == min(cons)))
    exc = [comp[m].excess for m in finite]
    rep.add(CheckRecord("excess_trend", "density constraint |u| <= 1 in the limit", exc[-1], exc[0],
                        all(e <= cfg.tol for e in exc) or tail_decreasing(exc)))
    if math.inf in sweep.schemes:
        c = comp[math.inf]
        rep.add(CheckRecord("hs_graph", "Hele-Shaw graph u in sign(p)", max(c.excess, c.graph_violation), cfg.tol,
                            c.excess <= cfg.tol and c.graph_violation <= cfg.tol))
        dist = sweep.distances_to_limit()
        if len(dist) >= 2:
            rep.add(CheckRecord("distance_to_limit_trend", "convergence u_m -> u in C([0,T);L1)", dist[-1], dist[-2],
                                tail_decreasing(dist)))
    cert = check_outpointing(V, grid, cfg.cutoff_h)
    rep.meta["outpointing"] = {"boundary_ok": cert.boundary_ok, "support_ok": cert.support_ok,
                               "boundary_worst": cert.boundary_worst, "support_worst": cert.support_worst}
    files: dict[str, bytes] = {"sweep.csv": csv_text(SWEEP_COLUMNS, rows).encode()}
    in_regime = (np.all(u0 >= 0) and np.all(u0 <= 1) and np.all(f >= 0) and np.all(f <= V.divergence))
    if in_regime and finite:
        ref = transport_reference(u0, f, V, cfg.T)
        pint = [pressure_integral(sweep.schemes[m], grid) for m in finite]
        dref = [distance_to_reference(sweep.schemes[m], ref, grid) for m in finite]
        rep.add(CheckRecord("pressure_integral_trend", "transport regime: pressure vanishes", pint[-1], pint[0],
                            pint[-1] == 0.0 or tail_decreasing(pint)))
        files["transport.csv"] = csv_text(("m", "pressure_integral", "dist_to_transport"),
                                          list(zip(finite, pint, dref))).encode()
    crow = []
    for m, sc in sweep.schemes.items():
        masks, meas = congestion_masks(sc, grid, cfg.mask_threshold)
        for i, (mk, mu) in enumerate(zip(masks, meas)):
            crow.append((m, i, mu))
            if mk.any():
                files[f"masks/m{m:g}_step{i:04d}.bin"] = mask_bytes(mk)
    files["congestion.csv"] = csv_text(("m", "step", "measure"), crow).encode()
    return rep, files


# ---------------------------------------------------------------------------


def _write(out: Path, rep: RunReport, files: dict[str, bytes]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, data in sorted(files.items()):
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        rep.files.append(name)
    rep.write(out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmelimit", description="Drift porous medium solver and its large-exponent limit.")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweep members")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("stationary", "evolve", "sweep-m"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to config.json")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--threads", type=int, default=None)
    p = sub.add_parser("verify")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tier", choices=TIERS, default="smoke")
    p.add_argument("--out", help="write run.json and per-criterion CSV files here")
    p.add_argument("--threads", type=int, default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    threads = args.threads or 1
    if args.command == "verify":
        t0 = time.perf_counter()
        rep, results = run_suite(args.seed, args.tier)
        rep.timings["total"] = time.perf_counter() - t0
        for r in results:
            print(f"[{'PASS' if r.passed else 'FAIL'}] criterion {r.number:2d}: {r.title}")
        if args.out:
            _write(Path(args.out), rep, {r.csv_name: r.csv.encode() for r in results})
        if not rep.passed:
            print("failing: " + "; ".join(rep.failing()), file=sys.stderr)
        return EXIT_PASS if rep.passed else EXIT_FAIL
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out or cfg.out
        if not out:
            raise ConfigError("no output directory: pass --out or set 'out' in the config")
        t0 = time.perf_counter()
        if args.command == "stationary":
            rep, files = cmd_stationary(cfg)
        elif args.command == "evolve":
            rep, files = cmd_evolve(cfg)
        else:
            rep, files = cmd_sweep(cfg, threads)
        rep.timings["total"] = time.perf_counter() - t0
        rep.meta["seed"] = cfg.seed
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergence as exc:
        print(f"solver failed: {exc} (step={exc.step}, m={exc.m})", file=sys.stderr)
        return EXIT_SOLVER
    _write(Path(out), rep, files)
    (Path(out) / "config.json").write_text(cfg.dumps())
    for c in rep.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: value={c.value:.6g} bound={c.bound:.6g}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
