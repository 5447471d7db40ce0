from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmelimit.errors import CutoffRangeError
from pmelimit.geometry import (
    C1,
    C2,
    Grid,
    VectorFieldSpec,
    build_cutoff,
    build_distance,
    check_outpointing,
    compute_thresholds,
    distance_to_boundary,
    eta,
    xi,
)


def test_grid_basic():
    g = Grid(((10, 5)), ((0.0, 2.0), (1.0, 2.0)))
    assert g.h == (0.2, 0.2)
    assert g.size == 50 and g.dim == 2
    assert math.isclose(g.volume, 0.04)
    with pytest.raises(ValueError):
        Grid((2,), ((0.0, 1.0),))
    with pytest.raises(ValueError):
        Grid((4,), ((1.0, 1.0),))


@pytest.mark.parametrize("x, d", [(0.5, 0.5), (0.1, 0.1)])
def test_distance_1d_points(x, d):
    g = Grid.uniform(10)
    assert math.isclose(float(distance_to_boundary(g, np.array([[x]]))[0]), d)


def test_distance_2d_point():
    g = Grid.uniform(10, dim=2)
    assert math.isclose(float(distance_to_boundary(g, np.array([[0.2, 0.7]]))[0]), 0.2)


def test_distance_field_matches_formula():
    g = Grid(((7, 9)), ((0.0, 1.4), (-1.0, 0.8)))
    d = build_distance(g).values
    x = g.cell_centers()
    ref = np.minimum.reduce([x[..., 0], 1.4 - x[..., 0], x[..., 1] + 1.0, 0.8 - x[..., 1]])
    assert np.allclose(d, ref, atol=1e-15, rtol=0)
    assert np.all(d >= 0)
    # cell 0.5 of a 5-cell unit interval
    assert build_distance(Grid.uniform(5)).values[2] == pytest.approx(0.5)


def test_eta_profile_values():
    h = 0.2
    assert eta(np.array([h]), h)[0] == 1.0
    assert eta(np.array([2 * h]), h)[0] == 1.0
    assert eta(np.array([C2 * h]), h)[0] == pytest.approx(0.5, abs=1e-14)
    assert np.all(eta(np.linspace(0, C1 * h, 11), h) == 0.0)
    r = np.linspace(0, 1.5 * h, 2001)
    e = eta(r, h)
    assert np.all(np.diff(e) >= -1e-15)
    assert np.all((e >= 0) & (e <= 1))


def test_eta_is_c1_at_matching_point():
    h = 0.3
    r0 = C2 * h
    dr = 1e-7
    left = (eta(np.array([r0]), h) - eta(np.array([r0 - dr]), h)) / dr
    right = (eta(np.array([r0 + dr]), h) - eta(np.array([r0]), h)) / dr
    assert left[0] == pytest.approx(right[0], rel=1e-4)


def test_cutoff_families():
    g = Grid.uniform(50)
    fam = build_cutoff(g, 0.2, "omega")
    d = build_distance(g).values
    assert np.all(fam.values[d >= 0.2] == 1.0)
    assert np.all(fam.values[d <= C1 * 0.2] == 0.0)
    xf = build_cutoff(g, 0.2, "xi")
    assert np.allclose(xf.values, np.minimum(d, 0.2) / 0.2)
    assert xi(np.array([0.2]), 0.2)[0] == 1.0
    with pytest.raises(CutoffRangeError):
        build_cutoff(g, 0.5)
    with pytest.raises(CutoffRangeError):
        build_cutoff(g, 0.0)


def test_outpointing_examples():
    g = Grid.uniform(32)
    zero = check_outpointing(VectorFieldSpec.zero(g), g, 0.2)
    assert zero.passed and zero.margin == 0.0
    exp = check_outpointing(VectorFieldSpec.from_callable(g, lambda X: X - 0.5), g, 0.2)
    assert exp.passed and exp.boundary_worst == pytest.approx(0.5)
    const = check_outpointing(VectorFieldSpec.from_callable(g, lambda X: -np.ones_like(X)), g, 0.2)
    assert not const.boundary_ok and const.boundary_worst == pytest.approx(-1.0)
    # V = -1 leaves through x = 0 and enters through x = 1
    assert const.boundary_worst_at == (1.0,)
    assert not const.support_ok and const.support_worst_at[0] > 0.8


def test_outpointing_radial_bump_and_flip():
    g = Grid.uniform(24, dim=2)
    w2 = 0.3**2

    def outward(X):
        return 2 * (X - 0.5) / w2 * np.exp(-np.sum((X - 0.5) ** 2, axis=-1, keepdims=True) / w2)

    assert check_outpointing(VectorFieldSpec.from_callable(g, outward), g, 0.2).passed
    flipped = check_outpointing(VectorFieldSpec.from_callable(g, lambda X: -outward(X)), g, 0.2)
    assert not flipped.passed and flipped.support_worst < 0 and flipped.support_worst_at is not None


def test_thresholds_examples():
    g = Grid.uniform(16)
    assert compute_thresholds(VectorFieldSpec.from_callable(g, lambda X: X - 0.5))[0] == math.inf
    lam0, lam1 = compute_thresholds(VectorFieldSpec.from_callable(g, lambda X: -X))
    assert lam0 == pytest.approx(1.0) and lam1 == pytest.approx(1.0)
    g2 = Grid.uniform(12, dim=2)
    V = VectorFieldSpec.from_callable(g2, lambda X: np.stack([X[..., 1], X[..., 0]], axis=-1))
    lam0, lam1 = compute_thresholds(V)
    assert lam0 == math.inf and lam1 == pytest.approx(0.5)
    assert compute_thresholds(VectorFieldSpec.zero(g)) == (math.inf, math.inf)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.1, 10.0), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_thresholds_scale_covariant(s, a, b):
    g = Grid.uniform(9, dim=2)
    V = VectorFieldSpec.from_callable(g, lambda X: np.stack([a * X[..., 0] + X[..., 1] ** 2, b * X[..., 1]], axis=-1))
    l0, l1 = compute_thresholds(V)
    s0, s1 = compute_thresholds(V.scaled(s))
    for base, scaled in ((l0, s0), (l1, s1)):
        if math.isinf(base):
            assert math.isinf(scaled)
        else:
            assert scaled == pytest.approx(base / s, rel=1e-12)


def test_divergence_consistent_with_faces():
    g = Grid((8, 11), ((0.0, 1.0), (0.0, 2.0)))
    V = VectorFieldSpec.from_callable(g, lambda X: np.stack([np.sin(X[..., 1]) * X[..., 0], X[..., 0] ** 2], -1))
    div = sum(np.diff(a, axis=k) / g.h[k] for k, a in enumerate(V.faces))
    assert np.allclose(V.divergence, div, atol=1e-13, rtol=0)
    # closed-form divergence of this field is sin(y); consistency within O(h^2)
    x = g.cell_centers()
    assert np.max(np.abs(V.divergence - np.sin(x[..., 1]))) < g.hmin**2


def test_from_faces_roundtrip():
    g = Grid.uniform(6)
    faces = [np.linspace(-1, 1, 7)]
    V = VectorFieldSpec.from_faces(g, faces)
    assert np.allclose(V.centers[..., 0], 0.5 * (faces[0][1:] + faces[0][:-1]))
    with pytest.raises(ValueError):
        VectorFieldSpec.from_faces(g, [np.zeros(6)])


def test_geometry_objects_immutable():
    g = Grid.uniform(5)
    V = VectorFieldSpec.from_callable(g, lambda X: X)
    with pytest.raises(ValueError):
        V.divergence[0] = 3.0
    with pytest.raises(Exception):
        g.cells = (6,)
