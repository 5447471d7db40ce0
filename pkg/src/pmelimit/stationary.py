"""Resolvent of the drift porous medium operator.

For a step ``lam`` and data ``f`` we look for ``v`` with

    v + lam * (-Delta_h p + D_h v) = f,    p = |v|^(m-1) v     (finite m)
                                           v in sign(p)        (m = inf)

on a cell-centered mesh (see :mod:`pmelimit.fv`).  The default solver
parametrizes the monotone graph {(v, p)} by ``s = v + p``: both ``v(s)`` and
``p(s)`` are 1-Lipschitz and nondecreasing, so the Newton Jacobian

    J = (I + lam D) diag(v'(s)) + lam L diag(p'(s))

is a column diagonally dominant M-matrix for every m, including m = inf,
where the graph becomes ``v = clip(s, -1, 1)``.  The regularized route
``v = beta_eps(p)`` with eps-continuation is kept as an independent
cross-check for moderate m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab, spsolve

from . import fv
from .errors import LambdaOutOfRange, NonConvergence
from .geometry import Grid, VectorFieldSpec


# ---------------------------------------------------------------------------
# nonlinearities


def _softplus(z):
    return np.logaddexp(0.0, z)


@dataclass(frozen=True)
class RegularizedProfile:
    """beta_eps(r) = sign(r) ((|r| + eps^m)^(1/m) - eps), an approximation of r^(1/m)."""

    m: float
    eps: float

    def __post_init__(self):
        if not (self.m >= 1 and math.isfinite(self.m)):
            raise ValueError("regularized profile needs finite m >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def _log_shift(self, r):
        # log(|r| + eps^m) - m log eps, without forming eps^m
        a = np.abs(np.asarray(r, dtype=float))
        mle = self.m * math.log(self.eps)
        with np.errstate(divide="ignore"):
            return _softplus(np.log(a) - mle)

    def beta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.sign(r) * self.eps * np.expm1(self._log_shift(r) / self.m)

    def dbeta(self, r) -> np.ndarray:
        m = self.m
        log_base = m * math.log(self.eps) + self._log_shift(r)
        with np.errstate(over="ignore"):
            return np.exp((1.0 / m - 1.0) * log_base) / m

    def inverse(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        a = np.abs(v)
        return np.sign(v) * np.maximum((a + self.eps) ** self.m - self.eps**self.m, 0.0)


def signed_power(v, m: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** m


def graph_split(s, m: float):
    """Split ``s = v + p`` along the graph p = v^m (or v in sign(p) for m = inf).

    Returns ``(v, p, dv/ds, dp/ds)``.
    """
    s = np.asarray(s, dtype=float)
    if math.isinf(m):
        v = np.clip(s, -1.0, 1.0)
        dv = (np.abs(s) < 1.0).astype(float)
        return v, s - v, dv, 1.0 - dv
    a = np.abs(s)
    if m == 1.0:
        w = 0.5 * a
    else:
        with np.errstate(divide="ignore"):
            root = np.exp(np.log(a) / m)
        w = np.minimum(a, root)
        # v + v^m = a is convex in v and w starts above the root: monotone Newton
        for _ in range(200):
            wm1 = w ** (m - 1.0)
            g = w + w * wm1 - a
            step = g / (1.0 + m * wm1)
            w = np.maximum(w - step, 0.0)
            if np.all(np.abs(step) <= 2e-16 * np.maximum(w, 1e-300)):
                break
    sg = np.sign(s)
    v = sg * w
    with np.errstate(over="ignore"):
        slope = m * w ** (m - 1.0)
    dv = 1.0 / (1.0 + slope)
    return v, sg * w**m, dv, 1.0 - dv


# ---------------------------------------------------------------------------
# problem / config / solution


@dataclass
class SolverConfig:
    tol: float = 1e-11
    max_newton: int = 60
    armijo: float = 1e-4
    min_step: float = 2.0**-30
    method: str = "graph"
    m_continuation: bool = True
    eps0: float = 0.1
    eps_factor: float = 4.0
    eps_min: float = 1e-9
    newton_per_eps: int = 50
    linear: str = "auto"
    linear_rtol: float = 1e-12


@dataclass
class StationaryProblem:
    V: VectorFieldSpec
    lam: float
    m: float
    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).reshape(self.V.grid.shape)
        if not np.all(np.isfinite(self.f)):
            raise ValueError("f must be finite")
        if not (self.m >= 1):
            raise ValueError("m must be >= 1")
        check_lambda(self.lam, self.V)

    @property
    def grid(self) -> Grid:
        return self.V.grid


def check_lambda(lam: float, V: VectorFieldSpec) -> None:
    lam0 = V.lambda0
    if not (lam > 0 and lam < lam0):
        raise LambdaOutOfRange(f"lambda={lam} outside (0, {lam0})")


@dataclass
class StationarySolution:
    v: np.ndarray
    p: np.ndarray
    s: np.ndarray | None
    newton_iterations: int
    continuation: list = field(default_factory=list)
    residual_inf: float = 0.0
    residual_dual: float = 0.0
    method: str = "graph"
    m: float = 1.0
    lam: float = 0.0

    def congested(self, threshold: float) -> np.ndarray:
        return np.abs(self.p) > threshold


class Operators:
    """Assembled -Delta_h and upwind divergence for one (grid, drift) pair."""

    def __init__(self, V: VectorFieldSpec):
        self.V = V
        self.grid = V.grid
        self.L = fv.laplacian(self.grid).tocsr()
        self.D = fv.upwind_divergence(self.grid, V.faces).tocsr()
        self.I = sp.identity(self.grid.size, format="csr")

    def residual(self, lam, v, p, f):
        return v + lam * (self.L @ p + self.D @ v) - f

    def jacobian(self, lam, dv, dp) -> sp.csc_matrix:
        return ((self.I + lam * self.D) @ sp.diags(dv) + (lam * self.L) @ sp.diags(dp)).tocsc()

    def dual_norm(self, r) -> float:
        return fv.dual_norm(self.grid, self.L, r)


def is_m_matrix(J: sp.spmatrix, rtol: float = 1e-12) -> bool:
    """Nonpositive off-diagonal entries and weak column diagonal dominance."""
    J = sp.csc_matrix(J)
    d = J.diagonal()
    off = J - sp.diags(d)
    if off.nnz and off.data.max() > 0.0:
        return False
    col = np.asarray(J.sum(axis=0)).ravel()
    return bool(np.all(d >= 0.0) and np.all(col >= -rtol * np.maximum(d, 1.0)))


def _linear_solve(J: sp.csc_matrix, b: np.ndarray, grid: Grid, cfg: SolverConfig) -> np.ndarray:
    mode = cfg.linear
    if mode == "auto":
        mode = "direct" if grid.dim == 1 else "iterative"
    if mode == "iterative":
        d = J.diagonal()
        d = np.where(d != 0.0, d, 1.0)
        M = sp.diags(1.0 / d)
        x, info = bicgstab(J, b, rtol=cfg.linear_rtol, atol=0.0, M=M, maxiter=20 * grid.size)
        if info == 0 and np.all(np.isfinite(x)):
            return x
    return spsolve(J, b)


def _roundoff_floor(ops: Operators, lam, v, p, f) -> float:
    scale = (
        np.max(np.abs(v), initial=0.0)
        + lam * (abs(ops.L).sum(axis=1).max() * np.max(np.abs(p), initial=0.0)
                 + abs(ops.D).sum(axis=1).max() * np.max(np.abs(v), initial=0.0))
        + np.max(np.abs(f), initial=0.0)
    )
    return 64.0 * np.finfo(float).eps * float(scale)


def _newton(ops: Operators, lam: float, f: np.ndarray, x0: np.ndarray, split, cfg: SolverConfig,
            max_iter: int, tol: float, damped: bool = True):
    """Damped Newton on R(x) = v(x) + lam (L p(x) + D v(x)) - f.

    ``split(x)`` returns (v, p, dv/dx, dp/dx).  Returns (x, iterations, |R|_inf, converged).
    """
    x = x0.copy()
    v, p, dv, dp = split(x)
    R = ops.residual(lam, v, p, f)
    for it in range(max_iter + 1):
        rn = float(np.max(np.abs(R), initial=0.0))
        if rn <= max(tol, _roundoff_floor(ops, lam, v, p, f)):
            return x, it, rn, True
        if it == max_iter:
            break
        J = ops.jacobian(lam, dv, dp)
        dx = _linear_solve(J, -R, ops.grid, cfg)
        if not np.all(np.isfinite(dx)):
            break
        if not damped:
            x = x + dx
            v, p, dv, dp = split(x)
            R = ops.residual(lam, v, p, f)
            continue
        phi0 = 0.5 * float(R @ R)
        t = 1.0
        while t >= cfg.min_step:
            xt = x + t * dx
            vt, pt, dvt, dpt = split(xt)
            Rt = ops.residual(lam, vt, pt, f)
            if 0.5 * float(Rt @ Rt) <= (1.0 - 2.0 * cfg.armijo * t) * phi0:
                break
            t *= 0.5
        else:
            break
        x, v, p, dv, dp, R = xt, vt, pt, dvt, dpt, Rt
    return x, it, float(np.max(np.abs(R), initial=0.0)), False


def _m_ladder(m: float) -> list[float]:
    top = 1024.0 if math.isinf(m) else m
    out, k = [], 2.0
    while k < top:
        out.append(k)
        k *= 2.0
    return out + [m]


def _solve_graph(ops: Operators, lam, m, f, s0, cfg: SolverConfig):
    fl = f.ravel()
    s0 = fl.copy() if s0 is None else np.asarray(s0, dtype=float).ravel().copy()
    trace, total, ok = [], 0, False
    if math.isinf(m):
        # the residual is piecewise linear: full semismooth steps settle the active set
        s, it, rn, ok = _newton(ops, lam, fl, s0, lambda x: graph_split(x, m), cfg, cfg.max_newton, cfg.tol,
                                damped=False)
        trace.append(("m-full", m, it, rn))
        total += it
    if not ok:
        s, it, rn, ok = _newton(ops, lam, fl, s0, lambda x: graph_split(x, m), cfg, cfg.max_newton, cfg.tol)
        trace.append(("m", m, it, rn))
        total += it
    if not ok and cfg.m_continuation:
        s = fl.copy()
        for mk in _m_ladder(m):
            s, it, rn, ok = _newton(ops, lam, fl, s, lambda x, mk=mk: graph_split(x, mk), cfg,
                                    cfg.max_newton, cfg.tol)
            trace.append(("m", mk, it, rn))
            total += it
            if not ok and mk == m:
                break
    if not ok:
        raise NonConvergence(f"graph Newton failed (m={m}, residual={rn:.3e})", m=m, residual=rn)
    v, p, _, _ = graph_split(s, m)
    return v, p, s, total, trace, rn


def eps_schedule(cfg: SolverConfig, m: float) -> list[float]:
    # keep beta_eps'(0) = eps^(1-m)/m representable
    floor = cfg.eps_min
    if m > 1:
        floor = max(floor, math.exp(-600.0 / (m - 1.0)))
    out, e = [], cfg.eps0
    while e > floor:
        out.append(e)
        e /= cfg.eps_factor
    return out + [floor]


def _solve_regularized(ops: Operators, lam, m, f, p0, cfg: SolverConfig, schedule=None):
    if math.isinf(m):
        raise ValueError("the regularized route needs finite m")
    fl = f.ravel()
    p = signed_power(fl, m) if p0 is None else np.asarray(p0, dtype=float).ravel().copy()
    trace, total, rn = [], 0, math.inf
    path = []
    for eps in schedule or eps_schedule(cfg, m):
        prof = RegularizedProfile(m, eps)

        def split(x, prof=prof):
            return prof.beta(x), x, prof.dbeta(x), np.ones_like(x)

        p, it, rn, ok = _newton(ops, lam, fl, p, split, cfg, cfg.newton_per_eps, cfg.tol)
        trace.append(("eps", eps, it, rn))
        total += it
        if not ok:
            raise NonConvergence(f"regularized Newton failed at eps={eps:.3e}", m=m, residual=rn)
        path.append((eps, prof.beta(p)))
    return path[-1][1], signed_power(path[-1][1], m), p, total, trace, rn, path


def solve_stationary(prob: StationaryProblem, cfg: SolverConfig | None = None, *, ops: Operators | None = None,
                     initial: np.ndarray | None = None) -> StationarySolution:
    """Solve the resolvent problem; ``initial`` warm-starts the Newton variable."""
    cfg = cfg or SolverConfig()
    ops = ops or Operators(prob.V)
    shape = prob.grid.shape
    if not np.any(prob.f):
        z = np.zeros(shape)
        return StationarySolution(z, z.copy(), np.zeros(prob.grid.size), 0, [], 0.0, 0.0, cfg.method, prob.m, prob.lam)
    if cfg.method == "graph":
        v, p, x, its, trace, rn = _solve_graph(ops, prob.lam, prob.m, prob.f, initial, cfg)
        # residual measured with p = v^m, the reported pressure
    elif cfg.method == "regularized":
        v, p, x, its, trace, rn, _ = _solve_regularized(ops, prob.lam, prob.m, prob.f, initial, cfg)
    else:
        raise ValueError(f"unknown method {cfg.method!r}")
    R = ops.residual(prob.lam, v, p, prob.f.ravel())
    return StationarySolution(
        v=v.reshape(shape),
        p=p.reshape(shape),
        s=x,
        newton_iterations=its,
        continuation=trace,
        residual_inf=float(np.max(np.abs(R))),
        residual_dual=ops.dual_norm(R),
        method=cfg.method,
        m=prob.m,
        lam=prob.lam,
    )


def regularized_path(prob: StationaryProblem, eps_list, cfg: SolverConfig | None = None):
    """Regularized solutions for a decreasing list of eps (warm-started)."""
    cfg = cfg or SolverConfig(method="regularized")
    ops = Operators(prob.V)
    *_, path = _solve_regularized(ops, prob.lam, prob.m, prob.f, None, cfg, schedule=list(eps_list))
    return [(eps, v.reshape(prob.grid.shape)) for eps, v in path]


def resolvent(lam: float, m: float, V: VectorFieldSpec, f, cfg: SolverConfig | None = None) -> np.ndarray:
    """v = (I + lam A_m)^{-1} f."""
    return solve_stationary(StationaryProblem(V, lam, m, f), cfg).v


def resolvent_hs(lam: float, V: VectorFieldSpec, f, cfg: SolverConfig | None = None):
    """Hele-Shaw resolvent: returns (v, p) with |v| <= 1 and v = sign(p) where p != 0."""
    sol = solve_stationary(StationaryProblem(V, lam, math.inf, f), cfg)
    return sol.v, sol.p


# ---------------------------------------------------------------------------
# a-priori estimates


def lq_norm(grid: Grid, u: np.ndarray, q: float) -> float:
    u = np.abs(np.asarray(u, dtype=float))
    if math.isinf(q):
        return float(u.max(initial=0.0))
    return float((grid.volume * np.sum(u**q)) ** (1.0 / q))


def lq_stationary_bound(q: float, lam: float, lam0: float, fq: float) -> float:
    ratio = 0.0 if math.isinf(lam0) else lam / lam0
    k = ratio if math.isinf(q) else (q - 1.0) * ratio
    if k >= 1.0:
        return math.inf
    return fq / (1.0 - k)


@dataclass
class EstimateRow:
    name: str
    value: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.value


@dataclass
class StationaryEstimateReport:
    rows: list[EstimateRow]

    def passed(self, tol: float = 1e-8) -> bool:
        return all(r.slack >= -tol for r in self.rows)

    def row(self, name: str) -> EstimateRow:
        return next(r for r in self.rows if r.name == name)


def verify_stationary_estimates(sol: StationarySolution, prob: StationaryProblem,
                                qs=(1.0, 2.0, math.inf)) -> StationaryEstimateReport:
    grid = prob.grid
    lam0 = prob.V.lambda0
    rows = []
    for q in qs:
        rows.append(EstimateRow(f"lq[{q:g}]", lq_norm(grid, sol.v, q),
                                lq_stationary_bound(q, prob.lam, lam0, lq_norm(grid, prob.f, q))))
    if not math.isinf(prob.m):
        ratio = 0.0 if math.isinf(lam0) else prob.lam / lam0
        L = fv.laplacian(grid)
        lhs = (1.0 - ratio) * grid.volume * float(np.sum(np.abs(sol.v) ** (prob.m + 1.0)))
        lhs += prob.lam * fv.grad_energy(grid, L, sol.p)
        rhs = grid.volume * float(np.sum(prob.f * sol.p))
        rows.append(EstimateRow("energy", lhs, rhs))
    return StationaryEstimateReport(rows)
