"""Finite-volume operators on a box with homogeneous Dirichlet data.

``laplacian`` returns the positive operator -Delta_h (two-point fluxes,
boundary value 0 imposed on the boundary face, half a cell away).
``upwind_divergence`` returns the flux-form upwind discretization of
div(v V); an inflow boundary face carries the boundary value 0.

Both matrices have nonpositive off-diagonals and nonnegative column sums,
which is what makes the resolvent an L1 contraction on the grid.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .geometry import Grid


def _index(grid: Grid) -> np.ndarray:
    return np.arange(grid.size).reshape(grid.shape)


def _pairs(grid: Grid, k: int):
    idx = _index(grid)
    n = grid.shape[k]
    left = np.take(idx, range(n - 1), axis=k).ravel()
    right = np.take(idx, range(1, n), axis=k).ravel()
    first = np.take(idx, 0, axis=k).ravel()
    last = np.take(idx, n - 1, axis=k).ravel()
    return left, right, first, last


def laplacian(grid: Grid) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.size)
    for k in range(grid.dim):
        c = 1.0 / grid.h[k] ** 2
        left, right, first, last = _pairs(grid, k)
        rows += [left, right]
        cols += [right, left]
        vals += [np.full(left.size, -c)] * 2
        np.add.at(diag, left, c)
        np.add.at(diag, right, c)
        np.add.at(diag, first, 2.0 * c)
        np.add.at(diag, last, 2.0 * c)
    rows.append(np.arange(grid.size))
    cols.append(np.arange(grid.size))
    vals.append(diag)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.size, grid.size)
    )


def upwind_divergence(grid: Grid, faces) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.size)
    for k, a in enumerate(faces):
        inv_h = 1.0 / grid.h[k]
        n = grid.shape[k]
        left, right, first, last = _pairs(grid, k)
        interior = np.take(a, range(1, n), axis=k).ravel()
        ap, am = np.maximum(interior, 0.0), np.maximum(-interior, 0.0)
        # flux left -> right: ap*v_left - am*v_right
        np.add.at(diag, left, ap * inv_h)
        np.add.at(diag, right, am * inv_h)
        rows += [left, right]
        cols += [right, left]
        vals += [-am * inv_h, -ap * inv_h]
        a_lo = np.take(a, 0, axis=k).ravel()
        a_hi = np.take(a, n, axis=k).ravel()
        np.add.at(diag, first, np.maximum(-a_lo, 0.0) * inv_h)
        np.add.at(diag, last, np.maximum(a_hi, 0.0) * inv_h)
    rows.append(np.arange(grid.size))
    cols.append(np.arange(grid.size))
    vals.append(diag)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.size, grid.size)
    )


def boundary_outflux(grid: Grid, faces, v: np.ndarray) -> float:
    """Total outward flux of ``v V`` through the boundary (upwinded)."""
    v = np.asarray(v).reshape(grid.shape)
    total = 0.0
    for k, a in enumerate(faces):
        n = grid.shape[k]
        area = grid.volume / grid.h[k]
        a_lo = np.take(a, 0, axis=k)
        a_hi = np.take(a, n, axis=k)
        total += area * float(np.sum(np.maximum(-a_lo, 0.0) * np.take(v, 0, axis=k)))
        total += area * float(np.sum(np.maximum(a_hi, 0.0) * np.take(v, n - 1, axis=k)))
    return total


def grad_energy(grid: Grid, L: sp.spmatrix, p: np.ndarray) -> float:
    """Discrete integral of |grad p|^2, equal to vol * p^T (-Delta_h) p."""
    p = np.asarray(p).ravel()
    return grid.volume * float(p @ (L @ p))


def dual_norm(grid: Grid, L: sp.spmatrix, r: np.ndarray) -> float:
    """Discrete H^-1 norm of a cell residual."""
    from scipy.sparse.linalg import spsolve

    r = np.asarray(r).ravel()
    if not np.any(r):
        return 0.0
    w = spsolve(L.tocsc(), r)
    return float(np.sqrt(max(grid.volume * float(r @ w), 0.0)))
