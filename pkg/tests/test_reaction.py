from __future__ import annotations

import math

import numpy as np
import pytest

from pmelimit.errors import BarrierUnavailable, HorizonTooLong
from pmelimit.geometry import Grid, VectorFieldSpec
from pmelimit.reaction import (
    ReactionSpec,
    barrier_residuals,
    build_barriers,
    check_one_sided_slope,
    clamp_map,
    integrate_barrier_ode,
    verify_confinement,
)
from pmelimit.semigroup import PorousMediumOperator, step_scheme

from conftest import bump


@pytest.fixture
def g32():
    return Grid.uniform(32)


@pytest.fixture
def zero32(g32):
    return VectorFieldSpec.zero(g32)


def test_null_reaction_barriers_are_unit(g32, zero32):
    u0 = np.full(g32.shape, 1.0)
    bar = build_barriers(ReactionSpec.source(g32, 0.0), u0, zero32, 1.0, 10)
    assert np.allclose(bar.upper, 1.0) and np.allclose(bar.lower, -1.0)


def test_unit_source_barrier_is_linear(g32, zero32):
    bar = build_barriers(ReactionSpec.source(g32, 1.0), np.zeros(g32.shape), zero32, 1.0, 10)
    assert np.allclose(bar.upper, bar.times, atol=1e-12)
    assert np.allclose(bar.lower, -bar.times, atol=1e-12)


def test_quadratic_barrier_closed_form(g32, zero32):
    u0 = np.full(g32.shape, 1.0)
    bar = build_barriers(ReactionSpec.quadratic(g32), u0, zero32, 0.5, 10)
    assert np.allclose(bar.upper, 1.0 / (1.0 - bar.times))
    assert np.allclose(bar.lower, -1.0 / (1.0 + bar.times))
    up, lo = barrier_residuals(bar, ReactionSpec.quadratic(g32), zero32)
    assert up >= -1e-6 and lo <= 1e-6


def test_quadratic_horizon_too_long(g32, zero32):
    with pytest.raises(HorizonTooLong):
        build_barriers(ReactionSpec.quadratic(g32), np.ones(g32.shape), zero32, 1.5, 10)


def test_ode_barrier_blowup_detected(g32, zero32):
    spec = ReactionSpec.custom(g32, lambda t, r: r**3, lambda r: 3 * np.asarray(r) ** 2)
    with pytest.raises(HorizonTooLong):
        integrate_barrier_ode(spec, 1.0, 0.0, 2.0, 20)


def test_ode_barrier_matches_linear_growth(g32, zero32):
    ts, ws = integrate_barrier_ode(ReactionSpec.linear(g32, 2.0), 1.0, 0.0, 1.0, 20)
    assert ws[-1] == pytest.approx(math.e**2, rel=1e-4)


def test_custom_needs_supplied_barriers(g32, zero32):
    spec = ReactionSpec.custom(g32, lambda t, r: -r, lambda r: np.zeros_like(r))
    u0 = bump(g32)
    with pytest.raises(BarrierUnavailable):
        build_barriers(spec, u0, zero32, 1.0, 10)
    ok = build_barriers(spec, u0, zero32, 1.0, 10, supplied=(lambda t: -1.0, lambda t: 1.0))
    assert ok.provenance == "supplied"
    with pytest.raises(BarrierUnavailable):
        build_barriers(spec, u0, zero32, 1.0, 10, supplied=(lambda t: -0.5, lambda t: 0.5))
    grow = ReactionSpec.custom(g32, lambda t, r: 1.0 + 0 * r, lambda r: np.zeros_like(r))
    with pytest.raises(BarrierUnavailable):
        build_barriers(grow, u0, zero32, 1.0, 10, supplied=(lambda t: -1.0, lambda t: 1.0))


def test_one_sided_slope_check(g32):
    rng = np.random.default_rng(0)
    for spec in (ReactionSpec.linear(g32, 0.7), ReactionSpec.quadratic(g32), ReactionSpec.sine(g32, 2.0)):
        ok, _ = check_one_sided_slope(spec, 1.0, 3.0, rng)
        assert ok
    lying = ReactionSpec.custom(g32, lambda t, r: 5 * r, lambda r: np.ones_like(r))
    assert not check_one_sided_slope(lying, 1.0, 1.0, rng)[0]


def test_clamp_properties(g32, zero32):
    spec = ReactionSpec.quadratic(g32)
    bar = build_barriers(spec, 0.5 * np.ones(g32.shape), zero32, 0.5, 10)
    F = clamp_map(spec, bar)
    M = bar.bound
    rng = np.random.default_rng(3)
    z = rng.uniform(-3, 3, g32.shape)
    assert np.array_equal(F(0.0, z), F(0.0, np.clip(z, -M, M)))
    zin = rng.uniform(-M, M, g32.shape)
    assert np.array_equal(F(0.0, zin), spec(0.0, zin))
    assert F.lipschitz_sample(rng) <= 2 * M + 1e-12


def test_linear_clamped_lipschitz(g32, zero32):
    spec = ReactionSpec.linear(g32, -1.3)
    F = clamp_map(spec, build_barriers(spec, bump(g32), zero32, 1.0, 10))
    assert F.lipschitz_sample(np.random.default_rng(5)) <= 1.3 + 1e-12


@pytest.mark.parametrize("kind", ["zero", "linear", "sine", "quadratic"])
def test_confinement_along_scheme(kind, g32):
    V = VectorFieldSpec.from_callable(g32, lambda X: X - 0.5)
    u0 = bump(g32, 0.3)
    spec = {
        "zero": ReactionSpec.source(g32, 0.0),
        "linear": ReactionSpec.linear(g32, 0.5),
        "sine": ReactionSpec.sine(g32, 1.0),
        "quadratic": ReactionSpec.quadratic(g32),
    }[kind]
    T, n = 0.5, 20
    bar = build_barriers(spec, u0, V, T, n)
    sc = step_scheme(PorousMediumOperator(V, 2.0), u0, None, T, n, reaction=clamp_map(spec, bar))
    rep = verify_confinement(sc, bar)
    assert rep.passed, rep.worst


def test_nonnegative_data_stay_nonnegative(g32, zero32):
    spec = ReactionSpec.source(g32, bump(g32, 0.5))
    sc = step_scheme(PorousMediumOperator(zero32, 3.0), bump(g32), None, 0.5, 10,
                     reaction=clamp_map(spec, build_barriers(spec, bump(g32), zero32, 0.5, 10)))
    assert sc.u.min() >= -1e-14
