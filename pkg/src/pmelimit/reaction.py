"""Reaction terms g(t, x, r), spatially constant barriers and the clamped reaction map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BarrierUnavailable, HorizonTooLong
from .geometry import Grid, VectorFieldSpec

KINDS = ("source", "linear", "quadratic", "sine", "custom")


def _as_time_field(f, grid: Grid) -> Callable[[float], np.ndarray]:
    if callable(f):
        return lambda t: np.broadcast_to(np.asarray(f(t), dtype=float), grid.shape)
    arr = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    return lambda t: arr


@dataclass(frozen=True)
class ReactionSpec:
    """g(t, r) on grid-shaped arrays; ``theta`` bounds dg/dr from above."""

    kind: str
    grid: Grid
    g: Callable[[float, np.ndarray], np.ndarray]
    theta: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, t: float, r) -> np.ndarray:
        r = np.broadcast_to(np.asarray(r, dtype=float), self.grid.shape)
        return np.asarray(self.g(t, r), dtype=float)

    def sup_abs(self, t: float, w: float) -> float:
        return float(np.max(np.abs(self(t, np.full(self.grid.shape, w)))))

    # factories -------------------------------------------------------------
    @classmethod
    def source(cls, grid: Grid, f) -> "ReactionSpec":
        ft = _as_time_field(f, grid)
        return cls("source", grid, lambda t, r: ft(t) + 0.0 * r, lambda r: np.zeros_like(np.asarray(r, float)),
                   {"f": ft})

    @classmethod
    def linear(cls, grid: Grid, c) -> "ReactionSpec":
        cf = np.broadcast_to(np.asarray(c, dtype=float), grid.shape)
        cmax = max(float(cf.max()), 0.0)
        return cls("linear", grid, lambda t, r: cf * r, lambda r: np.full_like(np.asarray(r, float), cmax),
                   {"c": cf})

    @classmethod
    def quadratic(cls, grid: Grid) -> "ReactionSpec":
        return cls("quadratic", grid, lambda t, r: r * r, lambda r: 2.0 * np.abs(np.asarray(r, float)))

    @classmethod
    def sine(cls, grid: Grid, amplitude: float = 1.0) -> "ReactionSpec":
        a = float(amplitude)
        return cls("sine", grid, lambda t, r: a * np.sin(r), lambda r: np.full_like(np.asarray(r, float), abs(a)),
                   {"amplitude": a})

    @classmethod
    def custom(cls, grid: Grid, g, theta) -> "ReactionSpec":
        return cls("custom", grid, g, theta)


def check_one_sided_slope(spec: ReactionSpec, T: float, R: float, rng: np.random.Generator,
                          samples: int = 200, tol: float = 1e-10) -> tuple[bool, float]:
    """Sampled difference quotients against max(theta) on [r1, r2].  Returns (ok, worst excess)."""
    worst = -math.inf
    n = spec.grid.size
    for _ in range(samples):
        t = float(rng.uniform(0.0, T))
        r1, r2 = np.sort(rng.uniform(-R, R, size=2))
        if r2 - r1 < 1e-9:
            continue
        cells = rng.integers(0, n, size=4)
        q = (spec(t, np.full(spec.grid.shape, r2)) - spec(t, np.full(spec.grid.shape, r1))).ravel()[cells] / (r2 - r1)
        th = float(np.max(spec.theta(np.linspace(r1, r2, 33))))
        worst = max(worst, float(np.max(q)) - th)
    return worst <= tol, worst


# ---------------------------------------------------------------------------
# barriers


@dataclass
class BarrierPair:
    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    provenance: str
    lower_fn: Callable[[float], float]
    upper_fn: Callable[[float], float]

    @property
    def bound(self) -> float:
        return float(max(np.max(np.abs(self.lower)), np.max(np.abs(self.upper))))


def _pair(times, lo, up, provenance) -> BarrierPair:
    return BarrierPair(times, np.array([lo(t) for t in times]), np.array([up(t) for t in times]), provenance, lo, up)


def _integral_sup(fsup: Callable[[float], float], t: float, n: int = 64) -> float:
    if t <= 0:
        return 0.0
    dt = t / n
    return dt * sum(fsup((k + 0.5) * dt) for k in range(n))


def integrate_barrier_ode(spec: ReactionSpec, w0: float, neg: float, T: float, n: int):
    """Explicit midpoint for w' = w * neg + ||g(t, ., w)||_inf at step T/(10 n)."""
    steps = 10 * n
    dt = T / steps
    ts = np.linspace(0.0, T, steps + 1)
    ws = np.empty(steps + 1)
    ws[0] = w0

    def rhs(t, w):
        return w * neg + spec.sup_abs(t, w)

    for k in range(steps):
        t, w = ts[k], ws[k]
        half = w + 0.5 * dt * rhs(t, w)
        ws[k + 1] = w + dt * rhs(t + 0.5 * dt, half)
        if not math.isfinite(ws[k + 1]) or ws[k + 1] > 1e12:
            raise HorizonTooLong(f"barrier ODE blows up before t={ts[k + 1]:.6g}")
    return ts, ws


def build_barriers(spec: ReactionSpec, u0, V: VectorFieldSpec, T: float, n: int,
                   supplied: tuple[Callable[[float], float], Callable[[float], float]] | None = None) -> BarrierPair:
    a = float(np.max(np.abs(u0)))
    neg = V.div_neg_sup
    times = np.linspace(0.0, T, n + 1)
    if supplied is not None:
        lo, up = supplied
        pair = _pair(times, lo, up, "supplied")
        if pair.lower[0] > float(np.min(u0)) or pair.upper[0] < float(np.max(u0)):
            raise BarrierUnavailable("supplied barriers do not bracket u0")
        res_up, res_lo = barrier_residuals(pair, spec, V)
        scale = 1e-6 * max(1.0, pair.bound)
        if res_up < -scale or res_lo > scale:
            raise BarrierUnavailable("supplied barriers fail the sub/supersolution residual check")
        return pair
    if spec.kind == "source":
        fsup = lambda t: float(np.max(np.abs(spec.params["f"](t))))  # noqa: E731
        up = lambda t: (a + _integral_sup(fsup, t)) * math.exp(t * neg)  # noqa: E731
        return _pair(times, lambda t: -up(t), up, "closed-form:source")
    if spec.kind == "linear":
        cs = float(np.max(np.abs(spec.params["c"])))
        up = lambda t: a * math.exp(t * neg + t * cs)  # noqa: E731
        return _pair(times, lambda t: -up(t), up, "closed-form:linear")
    if spec.kind == "quadratic" and neg == 0.0:
        if a > 0 and T >= 1.0 / a:
            raise HorizonTooLong(f"T={T} reaches the blow-up time 1/||u0||_inf = {1.0 / a}")
        return _pair(times, lambda t: -a / (1.0 + t * a), lambda t: a / (1.0 - t * a), "closed-form:quadratic")
    if spec.kind == "custom":
        raise BarrierUnavailable("custom reactions need user-supplied barriers")
    ts, ws = integrate_barrier_ode(spec, a, neg, T, n)
    up = lambda t: float(np.interp(t, ts, ws))  # noqa: E731
    return _pair(times, lambda t: -up(t), up, "ode")


def barrier_residuals(pair: BarrierPair, spec: ReactionSpec, V: VectorFieldSpec, samples: int = 200):
    """(min over t, x of w2' + w2 div V - g(w2),  max over t, x of w1' + w1 div V - g(w1))."""
    T = float(pair.times[-1])
    ts = np.linspace(0.0, T, samples + 1)
    dt = 1e-5 * T
    div = V.divergence
    worst_up, worst_lo = math.inf, -math.inf
    for t in 0.5 * (ts[1:] + ts[:-1]):
        for fn, is_up in ((pair.upper_fn, True), (pair.lower_fn, False)):
            w = fn(t)
            dw = (fn(t + 0.5 * dt) - fn(t - 0.5 * dt)) / dt
            r = dw + w * div - spec(t, np.full(div.shape, w))
            if is_up:
                worst_up = min(worst_up, float(r.min()))
            else:
                worst_lo = max(worst_lo, float(r.max()))
    return worst_up, worst_lo


@dataclass(frozen=True)
class ClampedReactionMap:
    spec: ReactionSpec
    M: float

    def __call__(self, t: float, z) -> np.ndarray:
        return self.spec(t, np.clip(np.asarray(z, dtype=float), -self.M, self.M))

    def lipschitz_sample(self, rng: np.random.Generator, t: float = 0.0, pairs: int = 50) -> float:
        """Largest sampled ratio ||F(z1) - F(z2)||_1 / ||z1 - z2||_1."""
        best = 0.0
        shape = self.spec.grid.shape
        for _ in range(pairs):
            z1 = rng.uniform(-2 * self.M, 2 * self.M, size=shape)
            z2 = rng.uniform(-2 * self.M, 2 * self.M, size=shape)
            d = float(np.sum(np.abs(z1 - z2)))
            if d > 0:
                best = max(best, float(np.sum(np.abs(self(t, z1) - self(t, z2)))) / d)
        return best


def clamp_map(spec: ReactionSpec, barriers: BarrierPair) -> ClampedReactionMap:
    return ClampedReactionMap(spec, barriers.bound)


@dataclass
class ConfinementReport:
    times: np.ndarray
    upper_excess: np.ndarray
    lower_excess: np.ndarray
    tol: float

    @property
    def worst(self) -> float:
        return float(max(self.upper_excess.max(), self.lower_excess.max()))

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def verify_confinement(traj, barriers: BarrierPair, tol: float = 1e-8) -> ConfinementReport:
    """Per-time worst violation of w1(t) <= u(t) <= w2(t).  ``traj`` is a scheme or mild solution."""
    scheme = getattr(traj, "finest", traj)
    times = scheme.times
    up = np.array([float(np.max(u)) - barriers.upper_fn(t) for t, u in zip(times, scheme.u)])
    lo = np.array([barriers.lower_fn(t) - float(np.min(u)) for t, u in zip(times, scheme.u)])
    return ConfinementReport(times, up, lo, tol)
