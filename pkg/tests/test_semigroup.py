from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from pmelimit.errors import LambdaOutOfRange, NonCauchyWarning, NonConvergence
from pmelimit.geometry import Grid, VectorFieldSpec
from pmelimit.harness import oracles
from pmelimit.semigroup import (
    PorousMediumOperator,
    cauchy_decreasing,
    continuity_in_m,
    lq_discrete_bound,
    mild_solve,
    mild_solve_reaction,
    source_samples,
    step_scheme,
    verify_evolution_estimates,
)
from pmelimit.stationary import resolvent, resolvent_hs

from conftest import bump, l1


def test_zero_data_zero_scheme(expanding):
    sc = step_scheme(PorousMediumOperator(expanding, 3.0), np.zeros(64), None, 1.0, 10)
    assert not np.any(sc.u)


def test_heat_scheme_matches_dense_oracle():
    g = Grid.uniform(32)
    u0 = bump(g)
    sc = step_scheme(PorousMediumOperator(VectorFieldSpec.zero(g), 1.0), u0, None, 0.2, 25)
    ref = oracles.heat_implicit_euler(u0, g.h[0], 0.2, 25)
    assert max(l1(g, a - b) for a, b in zip(sc.u, ref)) < 1e-12


def test_scheme_is_iterated_resolvent(expanding, grid64):
    u0, f = bump(grid64), 0.3 * bump(grid64, c=0.3)
    sc = step_scheme(PorousMediumOperator(expanding, 2.0), u0, f, 0.5, 5)
    u = u0
    for i in range(1, 6):
        u = resolvent(0.1, 2.0, expanding, u + 0.1 * f)
        assert np.allclose(sc.u[i], u, atol=1e-12)


def test_midpoint_source_samples(grid64):
    s = source_samples(lambda t: t * np.ones(64), grid64, 1.0, 4)
    assert [float(a[0]) for a in s] == [0.125, 0.375, 0.625, 0.875]
    assert len(source_samples(0.5, grid64, 1.0, 3)) == 3
    with pytest.raises(ValueError):
        source_samples([np.zeros(64)], grid64, 1.0, 3)


def test_step_outside_lambda_range(compressing, grid64):
    with pytest.raises(LambdaOutOfRange):
        step_scheme(PorousMediumOperator(compressing, 2.0), bump(grid64), None, 2.0, 2)


def test_nonconvergence_carries_step(grid64):
    class Failing:
        grid = grid64
        m = 2.0

        def __init__(self):
            self.calls = 0

        def valid_lambda(self, lam):
            return True

        def resolve(self, lam, rhs, initial=None):
            self.calls += 1
            if self.calls == 3:
                raise NonConvergence("stalled")
            from pmelimit.stationary import StationarySolution

            return StationarySolution(rhs, rhs, None, 1)

    with pytest.raises(NonConvergence) as exc:
        step_scheme(Failing(), bump(grid64), None, 1.0, 5)
    assert exc.value.step == 3


def test_ordered_sources_give_ordered_iterates(expanding, grid64):
    rng = np.random.default_rng(7)
    op = PorousMediumOperator(expanding, 4.0)
    for _ in range(3):
        f1 = rng.uniform(-1, 1, 64)
        f2 = f1 + rng.uniform(0, 1, 64)
        u0 = rng.uniform(-0.5, 0.5, 64)
        a = step_scheme(op, u0, f1, 1.0, 10)
        b = step_scheme(op, u0 + rng.uniform(0, 0.2, 64), f2, 1.0, 10)
        assert np.all(a.u <= b.u + 1e-10)


def test_l1_stability_in_data(expanding, grid64):
    op = PorousMediumOperator(expanding, 3.0)
    rng = np.random.default_rng(1)
    u0, w0 = rng.uniform(-1, 1, 64), rng.uniform(-1, 1, 64)
    f1, f2 = bump(grid64), bump(grid64, c=0.4)
    a = step_scheme(op, u0, f1, 1.0, 20)
    b = step_scheme(op, w0, f1, 1.0, 20)
    assert max(l1(grid64, x - y) for x, y in zip(a.u, b.u)) <= l1(grid64, u0 - w0) + 1e-10
    c = step_scheme(op, w0, f2, 1.0, 20)
    bound = l1(grid64, u0 - w0) + sum(0.05 * l1(grid64, x - y) for x, y in zip(a.sources, c.sources))
    assert max(l1(grid64, x - y) for x, y in zip(a.u, c.u)) <= bound + 1e-10


def test_exponential_formula_trace_decreases(expanding, grid64):
    ms = mild_solve(PorousMediumOperator(expanding, 2.0), bump(grid64), None, 0.5, 0.5 / 64, levels=4)
    assert [s.n for s in ms.schemes] == [8, 16, 32, 64]
    assert ms.cauchy_ok and all(b < a for a, b in zip(ms.trace, ms.trace[1:]))


def test_interpolants_agree_at_grid_times(expanding, grid64):
    ms = mild_solve(PorousMediumOperator(expanding, 2.0), bump(grid64), None, 0.4, 0.0125, levels=3)
    sc = ms.finest
    for i, t in enumerate(sc.times):
        assert np.array_equal(ms.u_eps(t), sc.u[i])
        assert np.allclose(ms.u_tilde(t), sc.u[i], atol=1e-15)
    mid = 0.5 * (sc.times[2] + sc.times[3])
    assert np.allclose(ms.u_tilde(mid), 0.5 * (sc.u[2] + sc.u[3]))
    assert np.array_equal(ms.u_eps(mid), sc.u[3])


def test_heat_mild_solution_first_order_in_eps():
    g = Grid.uniform(32)
    u0 = bump(g)
    T = 0.1
    exact = oracles.linear_reaction_exact(u0, g.h[0], 0.0, T)
    errs = []
    for n in (10, 20, 40):
        sc = step_scheme(PorousMediumOperator(VectorFieldSpec.zero(g), 1.0), u0, None, T, n)
        errs.append(l1(g, sc.u[-1] - exact))
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.1)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.1)
    assert errs[-1] <= 1.0 * T / 40  # C eps with C = 1


def test_cauchy_flag_and_warning():
    assert cauchy_decreasing([3.0, 2.0, 1.0])
    assert not cauchy_decreasing([3.0, 1.0, 2.0])
    assert not cauchy_decreasing([1.0])

    class Echo:
        def __init__(self, grid):
            self.grid = grid
            self.m = 1.0
            self.k = 0

        def valid_lambda(self, lam):
            return True

        def resolve(self, lam, rhs, initial=None):
            from pmelimit.stationary import StationarySolution

            # alternate sign flips make the trace grow
            self.k += 1
            return StationarySolution(rhs * (-1) ** self.k, rhs, None, 0)

    g = Grid.uniform(8)
    with pytest.warns(NonCauchyWarning):
        ms = mild_solve(Echo(g), np.ones(8), None, 1.0, 1 / 8, levels=3)
    assert not ms.cauchy_ok


def test_reaction_zero_matches_plain(expanding, grid64):
    op = PorousMediumOperator(expanding, 3.0)
    u0 = bump(grid64)
    a = mild_solve_reaction(op, u0, lambda t, z: np.zeros_like(z), 0.5, 0.05, levels=3)
    b = mild_solve(op, u0, None, 0.5, 0.05, levels=3)
    assert np.array_equal(a.finest.u, b.finest.u)


def test_reaction_independent_of_state_matches_source(expanding, grid64):
    op = PorousMediumOperator(expanding, 3.0)
    u0 = bump(grid64)

    def f(t):
        return (1 + t) * bump(grid64, 0.5, c=0.3)

    a = mild_solve_reaction(op, u0, lambda t, z: f(t), 0.5, 0.05, levels=3)
    b = mild_solve(op, u0, f, 0.5, 0.05, levels=3)
    assert np.array_equal(a.finest.u, b.finest.u)


def test_linear_reaction_against_dense_exponential():
    g = Grid.uniform(16)
    u0 = bump(g)
    c, T = 1.5, 0.2
    exact = oracles.linear_reaction_exact(u0, g.h[0], c, T)
    op = PorousMediumOperator(VectorFieldSpec.zero(g), 1.0)
    errs = []
    for n in (20, 40, 80):
        sc = step_scheme(op, u0, None, T, n, reaction=lambda t, z: c * z)
        errs.append(l1(g, sc.u[-1] - exact))
    assert errs[2] < errs[1] < errs[0]
    assert errs[-1] <= 2.0 * T / 80


def test_lq_and_energy_estimates_hold(expanding, compressing, grid64):
    for V in (expanding, compressing):
        for m in (1.0, 3.0, 8.0):
            sc = step_scheme(PorousMediumOperator(V, m), bump(grid64), 0.5 * bump(grid64), 1.0, 20)
            for r in verify_evolution_estimates(sc, V):
                assert r.slack >= -1e-8, (V.name, m, r)


def test_discrete_bound_dominates_continuous():
    # iterating the stationary bound grows at least like the exponential
    assert lq_discrete_bound(2.0, 0.1, 1.0, 1.0, [0.0] * 10) >= math.exp(1.0)


def test_continuity_in_m_trivial(expanding):
    tr = continuity_in_m(np.zeros(64), None, 0.5, [4, 8], expanding, 5)
    assert tr.consecutive == [0.0] and tr.to_limit == [0.0, 0.0]


def test_resolvent_level_precursor(expanding, grid64):
    f = bump(grid64, 2.0, w=0.1)
    v_inf, _ = resolvent_hs(0.5, expanding, f)
    d = [l1(grid64, resolvent(0.5, m, expanding, f) - v_inf) for m in (8.0, 32.0, 128.0)]
    assert d[0] > d[1] > d[2]


def test_continuity_in_m_transport_regime(expanding, grid64):
    from pmelimit.limit import distance_to_reference, transport_reference

    u0 = np.clip((0.25 - np.abs(grid64.cell_centers()[..., 0] - 0.5)) / 0.1, 0, 1)
    tr = continuity_in_m(u0, 0.5, 0.5, [4, 16, 64], expanding, 25)
    ref = transport_reference(u0, 0.5, expanding, 0.5)
    d = [distance_to_reference(tr.schemes[m], ref, grid64) for m in tr.ms]
    assert d[0] > d[1] > d[2]
    assert tr.decreasing


def test_continuity_in_m_capacity(expanding, grid64):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr = continuity_in_m(bump(grid64), bump(grid64, 2.0, w=0.1), 0.5, [8, 32, 128], expanding, 10)
    assert tr.decreasing and all(math.isfinite(x) for x in tr.consecutive)
