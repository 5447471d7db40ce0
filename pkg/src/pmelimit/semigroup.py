"""Implicit Euler stepping through a resolvent and mild-solution drivers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import fv
from .errors import LambdaOutOfRange, NonConvergence, NonCauchyWarning
from .geometry import Grid, VectorFieldSpec
from .stationary import (
    EstimateRow,
    Operators,
    SolverConfig,
    StationaryProblem,
    StationarySolution,
    lq_norm,
    solve_stationary,
)


class AccretiveOperator(Protocol):
    grid: Grid

    def valid_lambda(self, lam: float) -> bool: ...

    def resolve(self, lam: float, rhs: np.ndarray, initial=None) -> StationarySolution: ...


class PorousMediumOperator:
    """B u = -Delta u^m + div(u V) with homogeneous Dirichlet data (m may be inf)."""

    def __init__(self, V: VectorFieldSpec, m: float, cfg: SolverConfig | None = None):
        if not m >= 1:
            raise ValueError("m must be >= 1")
        self.V = V
        self.grid = V.grid
        self.m = float(m)
        self.cfg = cfg or SolverConfig()
        self.ops = Operators(V)

    def valid_lambda(self, lam: float) -> bool:
        return 0.0 < lam < self.V.lambda0

    def resolve(self, lam: float, rhs: np.ndarray, initial=None) -> StationarySolution:
        prob = StationaryProblem(self.V, lam, self.m, rhs)
        return solve_stationary(prob, self.cfg, ops=self.ops, initial=initial)

    def with_m(self, m: float) -> "PorousMediumOperator":
        return PorousMediumOperator(self.V, m, self.cfg)


Source = None | np.ndarray | Callable[[float], np.ndarray] | Sequence[np.ndarray]


def source_samples(f: Source, grid: Grid, T: float, n: int) -> list[np.ndarray]:
    """Per-step sources f_i: midpoint samples of callables, verbatim per-step lists."""
    eps = T / n
    if f is None:
        return [np.zeros(grid.shape) for _ in range(n)]
    if callable(f):
        return [np.broadcast_to(np.asarray(f((i + 0.5) * eps), dtype=float), grid.shape).copy() for i in range(n)]
    if np.isscalar(f) or (isinstance(f, np.ndarray) and f.shape in (grid.shape, ())):
        arr = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
        return [arr.copy() for _ in range(n)]
    seq = [np.asarray(a, dtype=float).reshape(grid.shape) for a in f]
    if len(seq) != n:
        raise ValueError(f"need {n} per-step sources, got {len(seq)}")
    return seq


@dataclass
class EulerScheme:
    T: float
    n: int
    u: np.ndarray  # (n+1, *shape)
    p: np.ndarray  # (n+1, *shape); p[0] is the pressure of u0
    sources: np.ndarray  # (n, *shape)
    newton_iterations: list[int]
    m: float

    @property
    def eps(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n + 1)


def _initial_pressure(u0: np.ndarray, m: float) -> np.ndarray:
    if math.isinf(m):
        return np.zeros_like(u0)
    return np.sign(u0) * np.abs(u0) ** m


def step_scheme(op: AccretiveOperator, u0, f: Source, T: float, n: int,
                reaction: Callable[[float, np.ndarray], np.ndarray] | None = None) -> EulerScheme:
    """u_i = J_eps(u_{i-1} + eps f_i).  With ``reaction`` the source is F(t_mid, u_{i-1})."""
    if not (T > 0 and n >= 1):
        raise ValueError("need T > 0 and n >= 1")
    eps = T / n
    if not op.valid_lambda(eps):
        raise LambdaOutOfRange(f"time step {eps} outside the resolvent range")
    grid = op.grid
    u0 = np.asarray(u0, dtype=float).reshape(grid.shape)
    fixed = None if reaction is not None else source_samples(f, grid, T, n)
    m = getattr(op, "m", 1.0)
    us, ps, srcs, its = [u0.copy()], [_initial_pressure(u0, m)], [], []
    s = None
    for i in range(1, n + 1):
        fi = reaction((i - 0.5) * eps, us[-1]) if reaction is not None else fixed[i - 1]
        fi = np.asarray(fi, dtype=float).reshape(grid.shape)
        try:
            sol = op.resolve(eps, us[-1] + eps * fi, initial=s)
        except NonConvergence as exc:
            exc.step = i
            raise
        s = sol.s
        us.append(sol.v)
        ps.append(sol.p)
        srcs.append(fi)
        its.append(sol.newton_iterations)
    return EulerScheme(T, n, np.array(us), np.array(ps), np.array(srcs), its, m)


def _l1(grid: Grid, a: np.ndarray) -> float:
    return grid.volume * float(np.sum(np.abs(a)))


@dataclass
class MildSolution:
    schemes: list[EulerScheme]
    trace: list[float]
    cauchy_ok: bool
    richardson: np.ndarray | None = None

    @property
    def finest(self) -> EulerScheme:
        return self.schemes[-1]

    def u_eps(self, t: float) -> np.ndarray:
        """Piecewise constant in time: u_i on (t_{i-1}, t_i]."""
        sc = self.finest
        i = min(max(int(math.ceil(t / sc.eps - 1e-12)), 0), sc.n)
        return sc.u[i]

    def u_tilde(self, t: float) -> np.ndarray:
        """Piecewise linear interpolation of the iterates."""
        sc = self.finest
        x = min(max(t / sc.eps, 0.0), float(sc.n))
        i = min(int(math.floor(x)), sc.n - 1)
        w = x - i
        return (1.0 - w) * sc.u[i] + w * sc.u[i + 1]


def sup_gap(grid: Grid, coarse: EulerScheme, fine: EulerScheme) -> float:
    """sup over the coarse grid times of the L1 gap (fine has a multiple of the steps)."""
    r = fine.n // coarse.n
    return max(_l1(grid, coarse.u[i] - fine.u[i * r]) for i in range(coarse.n + 1))


def cauchy_decreasing(trace: Sequence[float]) -> bool:
    tail = list(trace[-3:])
    return len(tail) >= 2 and all(b < a for a, b in zip(tail, tail[1:]))


def _levels(T: float, eps_target: float, levels: int) -> list[int]:
    if levels < 2:
        raise ValueError("need at least two levels for a convergence trace")
    n_fine = max(int(math.ceil(T / eps_target - 1e-12)), 1)
    n0 = max(int(math.ceil(n_fine / 2 ** (levels - 1))), 1)
    return [n0 * 2**k for k in range(levels)]


def _mild(op, u0, T, eps_target, levels, richardson, run) -> MildSolution:
    schemes = [run(n) for n in _levels(T, eps_target, levels)]
    grid = op.grid
    trace = [sup_gap(grid, a, b) for a, b in zip(schemes, schemes[1:])]
    ok = cauchy_decreasing(trace)
    if not ok:
        warnings.warn(f"self-convergence trace not decreasing: {trace}", NonCauchyWarning, stacklevel=3)
    extra = None
    if richardson:
        a, b = schemes[-2], schemes[-1]
        extra = np.array([2.0 * b.u[2 * i] - a.u[i] for i in range(a.n + 1)])
    return MildSolution(schemes, trace, ok, extra)


def mild_solve(op: AccretiveOperator, u0, f: Source, T: float, eps_target: float, *,
               levels: int = 4, richardson: bool = False) -> MildSolution:
    """Euler schemes with step halving down to ``eps_target`` and their L1 self-convergence trace."""
    return _mild(op, u0, T, eps_target, levels, richardson, lambda n: step_scheme(op, u0, f, T, n))


def mild_solve_reaction(op: AccretiveOperator, u0, F: Callable[[float, np.ndarray], np.ndarray], T: float,
                        eps_target: float, *, levels: int = 4, richardson: bool = False) -> MildSolution:
    return _mild(op, u0, T, eps_target, levels, richardson,
                 lambda n: step_scheme(op, u0, None, T, n, reaction=F))


# ---------------------------------------------------------------------------
# continuity in the exponent


@dataclass
class MContinuityTrace:
    ms: list[float]
    consecutive: list[float]
    to_limit: list[float]
    schemes: dict = field(default_factory=dict)

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.to_limit, self.to_limit[1:]))


def scheme_distance(grid: Grid, a: EulerScheme, b: EulerScheme) -> float:
    return max(_l1(grid, x - y) for x, y in zip(a.u, b.u))


def continuity_in_m(u0, f: Source, T: float, m_list: Sequence[float], V: VectorFieldSpec, n: int,
                    cfg: SolverConfig | None = None) -> MContinuityTrace:
    """Run the same Euler scheme for each m and for m = inf; report L1 distances."""
    ms = sorted(float(m) for m in m_list)
    schemes = {}
    for m in ms + [math.inf]:
        try:
            schemes[m] = step_scheme(PorousMediumOperator(V, m, cfg), u0, f, T, n)
        except NonConvergence as exc:
            exc.m = m
            raise
    grid = V.grid
    cons = [scheme_distance(grid, schemes[a], schemes[b]) for a, b in zip(ms, ms[1:])]
    lim = [scheme_distance(grid, schemes[m], schemes[math.inf]) for m in ms]
    return MContinuityTrace(ms, cons, lim, schemes)


# ---------------------------------------------------------------------------
# a-priori estimates along a scheme


def lq_evolution_bound(q: float, T: float, div_neg: float, u0q: float, f_int: float) -> float:
    k = div_neg if math.isinf(q) else (q - 1.0) * div_neg
    return math.exp(k * T) * (u0q + f_int)


def lq_discrete_bound(q: float, eps: float, div_neg: float, u0q: float, fq: Sequence[float]) -> float:
    """Bound obtained by iterating the stationary estimate step by step."""
    k = div_neg if math.isinf(q) else (q - 1.0) * div_neg
    if eps * k >= 1.0:
        return math.inf
    b = u0q
    for x in fq:
        b = (b + eps * x) / (1.0 - eps * k)
    return b


def energy_ledger(scheme: EulerScheme, V: VectorFieldSpec) -> tuple[np.ndarray, np.ndarray]:
    """Running (lhs, rhs) of the time-integrated energy inequality at t_1..t_n."""
    grid, m, eps = V.grid, scheme.m, scheme.eps
    vol = grid.volume
    L = fv.laplacian(grid)
    neg = np.maximum(-V.divergence, 0.0)
    e0 = vol * float(np.sum(np.abs(scheme.u[0]) ** (m + 1.0))) / (m + 1.0)
    lhs, rhs = [], []
    grad = 0.0
    src = 0.0
    for i in range(1, scheme.n + 1):
        u, p = scheme.u[i], scheme.p[i]
        grad += eps * fv.grad_energy(grid, L, p)
        src += eps * vol * float(np.sum(scheme.sources[i - 1] * p + p * u * neg))
        lhs.append(vol * float(np.sum(np.abs(u) ** (m + 1.0))) / (m + 1.0) + grad)
        rhs.append(e0 + src)
    return np.array(lhs), np.array(rhs)


def verify_evolution_estimates(scheme: EulerScheme, V: VectorFieldSpec, qs=(1.0, 2.0, math.inf)) -> list[EstimateRow]:
    grid = V.grid
    neg = V.div_neg_sup
    rows = []
    for q in qs:
        fq = [lq_norm(grid, fi, q) for fi in scheme.sources]
        bound = lq_evolution_bound(q, scheme.T, neg, lq_norm(grid, scheme.u[0], q), scheme.eps * sum(fq))
        worst = max(lq_norm(grid, u, q) for u in scheme.u)
        rows.append(EstimateRow(f"lq_evol[{q:g}]", worst, bound))
    if not math.isinf(scheme.m):
        lhs, rhs = energy_ledger(scheme, V)
        j = int(np.argmin(rhs - lhs))
        rows.append(EstimateRow("energy_evol", float(lhs[j]), float(rhs[j])))
    return rows
