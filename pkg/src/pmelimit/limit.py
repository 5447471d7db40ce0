"""Large-exponent sweeps, Hele-Shaw complementarity, congestion sets, transport
reference and windowed total variation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fv
from .errors import CFLViolated, LambdaOutOfRange, NonConvergence, RegimePreconditionViolated
from .geometry import Grid, VectorFieldSpec, build_cutoff, eta, distance_to_boundary
from .semigroup import EulerScheme, PorousMediumOperator, Source, scheme_distance, step_scheme
from .stationary import SolverConfig, StationaryProblem, solve_stationary


def tail_decreasing(seq: Sequence[float], k: int = 3) -> bool:
    tail = list(seq[-k:])
    return len(tail) >= 2 and all(b < a for a, b in zip(tail, tail[1:]))


@dataclass
class MSweep:
    ms: list[float]
    V: VectorFieldSpec
    T: float
    n: int
    schemes: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.V.grid

    @property
    def finite_ok(self) -> list[float]:
        return [m for m in self.ms if m in self.schemes]

    def consecutive_distances(self) -> list[float]:
        ok = self.finite_ok
        return [scheme_distance(self.grid, self.schemes[a], self.schemes[b]) for a, b in zip(ok, ok[1:])]

    def distances_to_limit(self) -> list[float]:
        if math.inf not in self.schemes:
            return []
        ref = self.schemes[math.inf]
        return [scheme_distance(self.grid, self.schemes[m], ref) for m in self.finite_ok]


def run_msweep(V: VectorFieldSpec, u0, f: Source, T: float, n: int, ms: Sequence[float], *,
               include_limit: bool = True, cfg: SolverConfig | None = None, reaction=None) -> MSweep:
    """Shared data, one Euler scheme per m; a failing m is recorded and skipped."""
    ms = [float(m) for m in ms]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError("m-list must be strictly increasing")
    sweep = MSweep(ms, V, T, n)
    for m in ms + ([math.inf] if include_limit else []):
        try:
            sweep.schemes[m] = step_scheme(PorousMediumOperator(V, m, cfg), u0, f, T, n, reaction=reaction)
        except NonConvergence as exc:
            sweep.failures[m] = f"step {exc.step}: {exc}"
    return sweep


@dataclass
class ComplementarityReport:
    m: float
    excess: float
    residual: float
    graph_violation: float

    def as_tuple(self):
        return (self.excess, self.residual, self.graph_violation)


def complementarity(scheme: EulerScheme, grid: Grid, tol: float = 1e-8) -> ComplementarityReport:
    vol, eps = grid.volume, scheme.eps
    u, p = scheme.u[1:], scheme.p[1:]
    au = np.abs(u)
    excess = float(max(np.max(np.abs(scheme.u)) - 1.0, 0.0))
    residual = eps * vol * float(np.sum(np.abs(p) * np.maximum(1.0 - au, 0.0)))
    bad = (np.abs(p) > tol) & (u * np.sign(p) < 1.0 - tol)
    return ComplementarityReport(scheme.m, excess, residual, eps * vol * float(np.sum(bad)))


def complementarity_diagnostics(sweep: MSweep, tol: float = 1e-8) -> dict:
    return {m: complementarity(sc, sweep.grid, tol) for m, sc in sweep.schemes.items()}


def pressure_integral(scheme: EulerScheme, grid: Grid) -> float:
    """Time-space integral of |p| over the scheme."""
    return scheme.eps * grid.volume * float(np.sum(np.abs(scheme.p[1:])))


def congestion_masks(scheme: EulerScheme, grid: Grid, threshold: float):
    """Per-time masks of {|p| > threshold} and their measures."""
    masks = np.abs(scheme.p) > threshold
    measures = grid.volume * masks.reshape(masks.shape[0], -1).sum(axis=1)
    return masks, measures


# ---------------------------------------------------------------------------
# transport regime


@dataclass
class TransportReference:
    times: np.ndarray
    u: np.ndarray
    balance_residual: np.ndarray

    def at(self, t: float) -> np.ndarray:
        dt = self.times[1] - self.times[0]
        x = min(max(t / dt, 0.0), len(self.times) - 1.0)
        i = min(int(math.floor(x)), len(self.times) - 2)
        w = x - i
        return (1.0 - w) * self.u[i] + w * self.u[i + 1]


def transport_reference(u0, f, V: VectorFieldSpec, T: float, n: int | None = None, cfl: float = 0.5,
                        tol: float = 1e-12) -> TransportReference:
    """Explicit upwind solution of u_t + div(u V) = f in the regime 0 <= f <= div V, 0 <= u0 <= 1."""
    grid = V.grid
    u0 = np.asarray(u0, dtype=float).reshape(grid.shape)
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    if np.any(u0 < -tol) or np.any(u0 > 1.0 + tol):
        raise RegimePreconditionViolated("need 0 <= u0 <= 1")
    if np.any(f < -tol) or np.any(f > V.divergence + tol):
        raise RegimePreconditionViolated("need 0 <= f <= div V")
    D = fv.upwind_divergence(grid, V.faces).tocsr()
    speed = float(D.diagonal().max())
    if n is None:
        n = max(int(math.ceil(T * speed / cfl)), 1)
    dt = T / n
    if dt * speed > cfl * (1.0 + 1e-12):
        raise CFLViolated(f"dt * max outflow rate = {dt * speed:.4g} exceeds {cfl}")
    vol = grid.volume
    us = [u0.copy()]
    bal = []
    u = u0.ravel().copy()
    fl = f.ravel()
    for _ in range(n):
        out = fv.boundary_outflux(grid, V.faces, u)
        new = u + dt * (fl - D @ u)
        bal.append(vol * (new.sum() - u.sum()) - dt * (vol * fl.sum() - out))
        u = new
        us.append(u.reshape(grid.shape).copy())
    return TransportReference(np.linspace(0.0, T, n + 1), np.array(us), np.array(bal))


def distance_to_reference(scheme: EulerScheme, ref: TransportReference, grid: Grid) -> float:
    return max(grid.volume * float(np.sum(np.abs(u - ref.at(t)))) for t, u in zip(scheme.times, scheme.u))


# ---------------------------------------------------------------------------
# windowed total variation


def face_weights(grid: Grid, h: float | None, k: int) -> np.ndarray:
    """omega_h at interior faces normal to axis k (ones when h is None)."""
    n = grid.shape[k]
    xf = np.take(grid.face_centers(k), range(1, n), axis=k)
    if h is None:
        return np.ones(xf.shape[:-1])
    build_cutoff(grid, h)  # range check
    return eta(distance_to_boundary(grid, xf), h)


def windowed_tv(u: np.ndarray, grid: Grid, h: float | None) -> float:
    """sum_i int omega_h d|d_i u| over interior faces."""
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    total = 0.0
    for k in range(grid.dim):
        area = grid.volume / grid.h[k]
        total += area * float(np.sum(face_weights(grid, h, k) * np.abs(np.diff(u, axis=k))))
    return total


def _face_avg(a: np.ndarray, k: int) -> np.ndarray:
    n = a.shape[k]
    return 0.5 * (np.take(a, range(n - 1), axis=k) + np.take(a, range(1, n), axis=k))


def bv_rhs(v, p, f, V: VectorFieldSpec, lam: float, h: float) -> float:
    """Right side of the stationary windowed BV bound, by face quadrature."""
    grid = V.grid
    L = fv.laplacian(grid)
    omega = build_cutoff(grid, h).values
    lap_pos = np.maximum(-(L @ omega.ravel()).reshape(grid.shape), 0.0)
    total = windowed_tv(f, grid, h)
    for k in range(grid.dim):
        vol = grid.volume
        w = face_weights(grid, h, k)
        dp = np.abs(np.diff(p, axis=k)) / grid.h[k]
        ddiv = np.abs(np.diff(V.divergence, axis=k)) / grid.h[k]
        total += lam * vol * float(np.sum(_face_avg(lap_pos, k) * dp))
        total += lam * vol * float(np.sum(w * _face_avg(np.abs(v), k) * ddiv))
    return total


@dataclass
class BVWindowReport:
    h: float
    ms: list[float]
    values: list[float]
    lhs: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    factor: float = 10.0
    notes: list[str] = field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return max(self.values) <= self.factor * self.values[0]


def bv_window(V: VectorFieldSpec, f, lam: float, ms: Sequence[float], h: float,
              cfg: SolverConfig | None = None, factor: float = 10.0) -> BVWindowReport:
    """Windowed TV of stationary solutions across exponents."""
    lam1 = V.lambda1
    notes = []
    if math.isinf(lam1):
        notes.append("lambda1 infinite: the bound carries no drift-gradient factor")
    elif lam >= lam1:
        raise LambdaOutOfRange(f"lambda={lam} must be below lambda1={lam1}")
    scale = 1.0 if math.isinf(lam1) else 1.0 - lam / lam1
    rep = BVWindowReport(h, [float(m) for m in ms], [], factor=factor, notes=notes)
    for m in ms:
        sol = solve_stationary(StationaryProblem(V, lam, m, f), cfg)
        tv = windowed_tv(sol.v, V.grid, h)
        rep.values.append(tv)
        rep.lhs.append(scale * tv)
        rep.rhs.append(bv_rhs(sol.v, sol.p, np.asarray(f, dtype=float).reshape(V.grid.shape), V, lam, h))
    return rep
