"""Dense, loop-built reference solvers used as independent oracles."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm


def dense_neg_laplacian_1d(n: int, h: float) -> np.ndarray:
    """-u'' with u = 0 on the walls, half a cell beyond the first/last centers."""
    A = np.zeros((n, n))
    for i in range(n):
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                A[i, i] += 1.0 / h**2
                A[i, j] -= 1.0 / h**2
            else:
                A[i, i] += 2.0 / h**2
    return A


def dense_upwind_1d(faces: np.ndarray, h: float) -> np.ndarray:
    """Upwind div(u V) from n+1 face velocities; inflow through a wall carries 0."""
    n = len(faces) - 1
    A = np.zeros((n, n))
    for i in range(n):
        a_l, a_r = faces[i], faces[i + 1]
        # outflow on the right face, inflow from the right neighbour
        A[i, i] += max(a_r, 0.0) / h
        if i + 1 < n:
            A[i, i + 1] -= max(-a_r, 0.0) / h
        # outflow on the left face, inflow from the left neighbour
        A[i, i] += max(-a_l, 0.0) / h
        if i > 0:
            A[i, i - 1] -= max(a_l, 0.0) / h
    return A


def heat_implicit_euler(u0: np.ndarray, h: float, T: float, n: int, f: np.ndarray | None = None) -> np.ndarray:
    """Iterates of (I + eps A) u_i = u_{i-1} + eps f, returned as (n+1, cells)."""
    eps = T / n
    A = dense_neg_laplacian_1d(len(u0), h)
    M = np.eye(len(u0)) + eps * A
    f = np.zeros_like(u0) if f is None else f
    out = [np.array(u0, dtype=float)]
    for _ in range(n):
        out.append(np.linalg.solve(M, out[-1] + eps * f))
    return np.array(out)


def linear_reaction_exact(u0: np.ndarray, h: float, c: float, t: float) -> np.ndarray:
    """Semi-discrete solution of u' = -A u + c u at time t."""
    A = dense_neg_laplacian_1d(len(u0), h)
    return expm(t * (c * np.eye(len(u0)) - A)) @ u0
