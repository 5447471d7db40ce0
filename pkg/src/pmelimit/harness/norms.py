"""Per-time norm ledger with fixed cell quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import fv
from ..geometry import Grid

COLUMNS = ("time", "l1", "l2", "linf", "lm1", "grad_energy")


def norm(grid: Grid, u: np.ndarray, q: float) -> float:
    a = np.abs(np.asarray(u, dtype=float))
    if math.isinf(q):
        return float(a.max(initial=0.0))
    return float((grid.volume * np.sum(a**q)) ** (1.0 / q))


@dataclass
class NormLedger:
    grid: Grid
    m: float
    rows: list[tuple[float, ...]] = field(default_factory=list)

    def record(self, t: float, u: np.ndarray, p: np.ndarray) -> None:
        L = fv.laplacian(self.grid)
        q = self.m + 1.0
        lm1 = norm(self.grid, u, q) if math.isfinite(q) else norm(self.grid, u, math.inf)
        self.rows.append((float(t), norm(self.grid, u, 1), norm(self.grid, u, 2), norm(self.grid, u, math.inf),
                          lm1, fv.grad_energy(self.grid, L, p)))

    @classmethod
    def from_scheme(cls, grid: Grid, scheme) -> "NormLedger":
        led = cls(grid, scheme.m)
        for t, u, p in zip(scheme.times, scheme.u, scheme.p):
            led.record(t, u, p)
        return led

    def cauchy_schwarz_ok(self, rtol: float = 1e-12) -> bool:
        root = math.sqrt(self.grid.measure)
        return all(r[1] <= root * r[2] * (1 + rtol) + 1e-300 and r[2] <= root * r[3] * (1 + rtol) + 1e-300
                   for r in self.rows)
