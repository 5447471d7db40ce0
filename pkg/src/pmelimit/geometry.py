"""Box meshes, distance to the boundary, interior cutoffs and drift fields.

Domains are axis-aligned boxes in one or two dimensions.  Fields live on
cell centers and are stored as arrays of shape ``grid.shape``; flattening
is row-major (C order) throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CutoffRangeError

C1 = 0.5
C2 = math.sqrt(5.0) / (2.0 * math.sqrt(2.0))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh of a box ``prod [a_k, b_k]``."""

    cells: tuple[int, ...]
    extent: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        extent = tuple((float(a), float(b)) for a, b in self.extent)
        if len(cells) not in (1, 2):
            raise ValueError("only 1D and 2D boxes are supported")
        if len(extent) != len(cells):
            raise ValueError("extent must give one interval per axis")
        if any(n < 3 for n in cells):
            raise ValueError("need at least 3 cells per axis")
        if any(not b > a for a, b in extent):
            raise ValueError("each extent interval must have b > a")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)

    @classmethod
    def uniform(cls, n: int | Sequence[int], length: float = 1.0, dim: int | None = None) -> "Grid":
        if isinstance(n, int):
            n = (n,) * (dim or 1)
        return cls(tuple(n), tuple((0.0, float(length)) for _ in n))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / n for (a, b), n in zip(self.extent, self.cells))

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def volume(self) -> float:
        """Volume of one cell."""
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        """Volume of the whole box."""
        return float(np.prod([b - a for a, b in self.extent]))

    def axis_centers(self, k: int) -> np.ndarray:
        a, _ = self.extent[k]
        return a + (np.arange(self.cells[k]) + 0.5) * self.h[k]

    def axis_faces(self, k: int) -> np.ndarray:
        a, _ = self.extent[k]
        return a + np.arange(self.cells[k] + 1) * self.h[k]

    def cell_centers(self) -> np.ndarray:
        """Cell-center coordinates, shape ``(*shape, dim)``."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def face_shape(self, k: int) -> tuple[int, ...]:
        s = list(self.cells)
        s[k] += 1
        return tuple(s)

    def face_centers(self, k: int) -> np.ndarray:
        """Centers of the faces normal to axis ``k``, shape ``(*face_shape(k), dim)``."""
        axes = [self.axis_faces(j) if j == k else self.axis_centers(j) for j in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def distance_to_boundary(grid: Grid, points: np.ndarray) -> np.ndarray:
    """Exact distance from ``points`` (last axis = coordinates) to the box boundary."""
    points = np.asarray(points, dtype=float)
    d = np.full(points.shape[:-1], np.inf)
    for k, (a, b) in enumerate(grid.extent):
        x = points[..., k]
        d = np.minimum(d, np.minimum(x - a, b - x))
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class DistanceField:
    grid: Grid
    values: np.ndarray


def build_distance(grid: Grid) -> DistanceField:
    return DistanceField(grid, _frozen(distance_to_boundary(grid, grid.cell_centers())))


def cutoff_constant(h: float) -> float:
    """``C_h`` such that both exponential branches of eta_h meet at 1/2."""
    m_h = (C2**2 - C1**2) * h * h
    return m_h * math.log(2.0)


def eta(r, h: float) -> np.ndarray:
    """Nondecreasing C^1 profile: 0 on [0, c1 h], 1 on [h, inf)."""
    r = np.asarray(r, dtype=float)
    ch = cutoff_constant(h)
    out = np.ones_like(r)
    lo = r <= C1 * h
    mid_a = (r > C1 * h) & (r <= C2 * h)
    mid_b = (r > C2 * h) & (r < h)
    out[lo] = 0.0
    with np.errstate(divide="ignore", over="ignore"):
        out[mid_a] = np.exp(-ch / (r[mid_a] ** 2 - (C1 * h) ** 2))
        out[mid_b] = 1.0 - np.exp(-ch / (h * h - r[mid_b] ** 2))
    return out


def xi(r, h: float) -> np.ndarray:
    return np.minimum(h, np.asarray(r, dtype=float)) / h


@dataclass(frozen=True)
class CutoffFamily:
    h: float
    kind: str
    values: np.ndarray
    c1: float = C1
    c2: float = C2
    c_h: float = 0.0


def _check_cutoff_width(grid: Grid, h: float) -> None:
    half = 0.5 * min(b - a for a, b in grid.extent)
    if not 0.0 < h < half:
        raise CutoffRangeError(f"cutoff width h={h} outside (0, {half})")


def build_cutoff(grid: Grid, h: float, kind: str = "omega") -> CutoffFamily:
    """Sample xi_h = min(h, d)/h or omega_h = eta_h(d) at cell centers."""
    _check_cutoff_width(grid, h)
    d = build_distance(grid).values
    if kind in ("xi", "xi_h"):
        return CutoffFamily(h, "xi_h", _frozen(xi(d, h)))
    if kind in ("omega", "omega_h"):
        return CutoffFamily(h, "omega_h", _frozen(eta(d, h)), c_h=cutoff_constant(h))
    raise ValueError(f"unknown cutoff kind {kind!r}")


# ---------------------------------------------------------------------------
# drift fields


def flux_divergence(grid: Grid, faces: Sequence[np.ndarray]) -> np.ndarray:
    div = np.zeros(grid.shape)
    for k, a in enumerate(faces):
        div += np.diff(a, axis=k) / grid.h[k]
    return div


@dataclass(frozen=True)
class VectorFieldSpec:
    """Drift sampled on faces (normal components) with derived cell data.

    ``gradient_sup[i, k]`` holds the discrete sup-norm of d V_k / d x_i.
    """

    grid: Grid
    faces: tuple[np.ndarray, ...]
    divergence: np.ndarray
    centers: np.ndarray
    gradient_sup: np.ndarray
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_faces(cls, grid: Grid, faces: Sequence[np.ndarray], name: str = "tabulated") -> "VectorFieldSpec":
        faces = tuple(np.asarray(a, dtype=float) for a in faces)
        if len(faces) != grid.dim:
            raise ValueError("need one face array per axis")
        for k, a in enumerate(faces):
            if a.shape != grid.face_shape(k):
                raise ValueError(f"face array {k} has shape {a.shape}, expected {grid.face_shape(k)}")
        centers = np.stack(
            [0.5 * (np.take(a, range(grid.shape[k]), axis=k) + np.take(a, range(1, grid.shape[k] + 1), axis=k))
             for k, a in enumerate(faces)],
            axis=-1,
        )
        return cls._assemble(grid, faces, centers, name)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray], name: str = "closed-form") -> "VectorFieldSpec":
        """``fn`` maps points ``(..., dim)`` to vectors ``(..., dim)``."""
        faces = tuple(np.asarray(fn(grid.face_centers(k)), dtype=float)[..., k] for k in range(grid.dim))
        centers = np.asarray(fn(grid.cell_centers()), dtype=float).reshape(*grid.shape, grid.dim)
        return cls._assemble(grid, faces, centers, name)

    @classmethod
    def zero(cls, grid: Grid) -> "VectorFieldSpec":
        return cls.from_faces(grid, [np.zeros(grid.face_shape(k)) for k in range(grid.dim)], name="zero")

    @classmethod
    def _assemble(cls, grid, faces, centers, name):
        dim = grid.dim
        grad = np.zeros((dim, dim))
        for i in range(dim):
            diffs = np.diff(centers, axis=i) / grid.h[i]
            for k in range(dim):
                grad[i, k] = float(np.max(np.abs(diffs[..., k]))) if diffs.size else 0.0
        return cls(
            grid=grid,
            faces=tuple(_frozen(a) for a in faces),
            divergence=_frozen(flux_divergence(grid, faces)),
            centers=_frozen(centers),
            gradient_sup=_frozen(grad),
            name=name,
        )

    def scaled(self, s: float) -> "VectorFieldSpec":
        return VectorFieldSpec._assemble(self.grid, [s * a for a in self.faces], s * self.centers, f"{s}*{self.name}")

    @property
    def div_neg_sup(self) -> float:
        return float(np.max(np.maximum(-self.divergence, 0.0)))

    @property
    def lambda0(self) -> float:
        return compute_thresholds(self)[0]

    @property
    def lambda1(self) -> float:
        return compute_thresholds(self)[1]


def compute_thresholds(V: VectorFieldSpec) -> tuple[float, float]:
    """(lambda_0, lambda_1) = (1/||(div V)^-||_inf, 1/sum_{i,k} ||d_i V_k||_inf)."""
    neg = V.div_neg_sup
    lip = float(np.sum(V.gradient_sup))
    lam0 = math.inf if neg == 0.0 else 1.0 / neg
    lam1 = math.inf if lip == 0.0 else 1.0 / lip
    return lam0, lam1


@dataclass(frozen=True)
class OutpointingCertificate:
    h: float
    tol: float
    boundary_ok: bool
    boundary_worst: float
    boundary_worst_at: tuple[float, ...]
    support_ok: bool
    support_worst: float
    support_worst_at: tuple[float, ...] | None

    @property
    def passed(self) -> bool:
        return self.boundary_ok and self.support_ok

    @property
    def margin(self) -> float:
        return min(self.boundary_worst, self.support_worst)


def _boundary_normal_flux(V: VectorFieldSpec):
    """Outward normal velocity and location on every boundary face."""
    grid = V.grid
    vals, locs = [], []
    for k, a in enumerate(V.faces):
        xc = grid.face_centers(k)
        n = grid.shape[k]
        for idx, sign in ((0, -1.0), (n, 1.0)):
            vals.append(sign * np.take(a, idx, axis=k).ravel())
            locs.append(np.take(xc, idx, axis=k).reshape(-1, grid.dim))
    return np.concatenate(vals), np.concatenate(locs)


def check_outpointing(V: VectorFieldSpec, grid: Grid | None = None, h: float | None = None,
                      tol: float = 1e-12) -> OutpointingCertificate:
    """Check V.nu >= 0 on the boundary and V.(-grad d) >= 0 on {d < h}.

    Where several walls are equidistant (corners, midlines) every
    minimizing wall is checked.
    """
    grid = grid or V.grid
    if h is None:
        h = 0.25 * min(b - a for a, b in grid.extent)
    _check_cutoff_width(grid, h)

    flux, where = _boundary_normal_flux(V)
    j = int(np.argmin(flux))
    b_worst = float(flux[j])

    x = grid.cell_centers().reshape(-1, grid.dim)
    vc = V.centers.reshape(-1, grid.dim)
    d = distance_to_boundary(grid, x)
    band = d < h
    tie = 1e-12 * max(b - a for a, b in grid.extent)
    worst = np.full(x.shape[0], np.inf)
    for k, (a, b) in enumerate(grid.extent):
        lo_wall = np.abs((x[:, k] - a) - d) <= tie
        hi_wall = np.abs((b - x[:, k]) - d) <= tie
        worst = np.where(lo_wall, np.minimum(worst, -vc[:, k]), worst)
        worst = np.where(hi_wall, np.minimum(worst, vc[:, k]), worst)
    if band.any():
        idx = np.flatnonzero(band)
        i = idx[int(np.argmin(worst[idx]))]
        s_worst, s_at = float(worst[i]), tuple(float(c) for c in x[i])
    else:
        s_worst, s_at = math.inf, None
    return OutpointingCertificate(
        h=float(h),
        tol=tol,
        boundary_ok=b_worst >= -tol,
        boundary_worst=b_worst,
        boundary_worst_at=tuple(float(c) for c in where[j]),
        support_ok=s_worst >= -tol,
        support_worst=s_worst,
        support_worst_at=s_at,
    )
