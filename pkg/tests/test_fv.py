from __future__ import annotations

import numpy as np
from hypothesis import given, settings, strategies as st

from pmelimit import fv
from pmelimit.geometry import Grid, VectorFieldSpec
from pmelimit.harness import oracles


def test_laplacian_matches_dense_loops():
    g = Grid((9,), ((0.0, 2.0),))
    assert np.allclose(fv.laplacian(g).toarray(), oracles.dense_neg_laplacian_1d(9, g.h[0]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_upwind_matches_dense_loops(faces):
    g = Grid.uniform(7)
    a = np.array(faces)
    D = fv.upwind_divergence(g, [a]).toarray()
    assert np.allclose(D, oracles.dense_upwind_1d(a, g.h[0]))
    off = D - np.diag(np.diag(D))
    assert np.all(off <= 0)
    assert np.all(D.sum(axis=0) >= -1e-12)


def test_upwind_column_sums_equal_outflow_2d():
    g = Grid((5, 6), ((0.0, 1.0), (0.0, 1.5)))
    V = VectorFieldSpec.from_callable(g, lambda X: np.stack([np.cos(3 * X[..., 1]), X[..., 0] - 0.3], -1))
    D = fv.upwind_divergence(g, V.faces)
    v = np.random.default_rng(0).uniform(size=g.size)
    # interior fluxes telescope: total = boundary outflow
    assert np.isclose(g.volume * (D @ v).sum(), fv.boundary_outflux(g, V.faces, v))


def test_laplacian_2d_symmetric_positive():
    g = Grid((6, 4), ((0.0, 1.0), (0.0, 0.5)))
    L = fv.laplacian(g).toarray()
    assert np.allclose(L, L.T)
    assert np.all(np.linalg.eigvalsh(L) > 0)
    # constant on a quadratic profile: -u'' = 2 for u = x(1-x) away from the walls
    g1 = Grid.uniform(20)
    x = g1.cell_centers()[..., 0]
    r = fv.laplacian(g1) @ (x * (1 - x))
    assert np.allclose(r[1:-1], 2.0)


def test_grad_energy_and_dual_norm():
    g = Grid.uniform(16)
    L = fv.laplacian(g)
    p = np.sin(np.pi * g.cell_centers()[..., 0])
    assert fv.grad_energy(g, L, p) > 0
    assert fv.dual_norm(g, L, np.zeros(g.size)) == 0.0
    r = L @ p
    assert np.isclose(fv.dual_norm(g, L, r) ** 2, fv.grad_energy(g, L, p))
