import numpy as np
import pytest

from bernoulli_diffuse.bernoulli import BernoulliParams, Constant, RationalDecay, Seasonal, Tabulated, dS_dt
from bernoulli_diffuse.elliptic import solve_brezis_oswald
from bernoulli_diffuse.errors import PreconditionError, StabilityError, ValidationError
from bernoulli_diffuse.grid import BC, Domain, Grid2D
from bernoulli_diffuse.parabolic import (BarrierPair, Sign, cfl_max_dt, evolve, monotone_iterate,
                                         monotonicity_constant, separable_solution, step_explicit,
                                         verify_comparison, verify_sandwich)


@pytest.fixture(scope="module")
def setup():
    d = Domain.unit_square(16)
    sol = solve_brezis_oswald(d, 2.0, tol=1e-12)
    p = BernoulliParams(2.0, 1.0, Constant(1.0))
    return d, sol, p


def test_cfl():
    ones = Grid2D(3, 3, 1.0, np.ones(9), BC.PERIODIC)
    assert cfl_max_dt(ones, 4.0) == pytest.approx(1 / 16)
    assert 0.0118 < cfl_max_dt(ones, 4.0)
    assert cfl_max_dt(Grid2D(2, 2, 1.0, np.zeros(4)), 4.0) > 1e10
    assert cfl_max_dt(Grid2D(2, 2, 0.1, np.full(4, 7.0)), 1.0) == pytest.approx(0.01 / 4)


def test_step_fixed_point_and_absorption():
    z = Domain(4, 4, 0.2).zeros()
    assert np.all(step_explicit(z, 0.3, 0.01, 2.0, Constant(1.0)).data == 0)
    v = Grid2D(5, 5, 1.0, np.full(25, 0.6), BC.PERIODIC)
    for k in range(5):
        v = step_explicit(v, k * 0.1, 0.1, 3.0, Constant(2.0), Sign.ABSORPTION)
    assert np.allclose(v.data, 0.6 * 0.8 ** 5, rtol=1e-14)


def test_step_refuses_unstable():
    v = Domain(4, 4, 0.1).full(1.0)
    with pytest.raises(StabilityError) as info:
        step_explicit(v, 0.0, 1.0, 2.0, Constant(1.0))
    assert info.value.dt_max == pytest.approx(cfl_max_dt(v, 2.0))


def test_one_step_matches_time_derivative(setup):
    d, sol, p = setup
    q = BernoulliParams(2.0, 0.5, Constant(1.0))
    v0 = separable_solution(sol.u, q, 0.0)
    dt = 1e-6
    v1 = step_explicit(v0, 0.0, dt, 2.0, q.mu)
    expected = dS_dt(q, 0.0) * np.sqrt(sol.u.data)
    assert np.allclose((v1.data - v0.data) / dt, expected, atol=1e-8)


def test_separable_solution(setup):
    d, sol, p = setup
    s0 = separable_solution(sol.u, BernoulliParams(2.0, 0.7, Constant(1.0)), 0.0)
    assert np.allclose(s0.data, 0.7 * np.sqrt(sol.u.data), rtol=1e-15)
    zero = separable_solution(d.zeros(), p, 1.0)
    assert np.all(zero.data == 0)


def test_evolve_trace_layout(setup):
    d, sol, p = setup
    v0 = separable_solution(sol.u, p, 0.0)
    tr0 = evolve(v0, 0.0, 0.01, 2.0, p.mu)
    assert tr0.times == [0.0] and tr0.final is v0
    dt = 0.5 * cfl_max_dt(v0, 2.0)
    tr = evolve(v0, 0.1, dt, 2.0, p.mu, snapshot_every=7)
    assert tr.times[0] == 0.0 and tr.times[-1] == 0.1
    assert all(np.all(g.data >= 0) for g in tr.snapshots)
    assert tr.steps == int(np.ceil(0.1 / dt - 1e-9))


def test_evolve_tracks_separable(setup):
    d, sol, _ = setup
    p = BernoulliParams(2.0, 0.5, Constant(1.0))
    v0 = separable_solution(sol.u, p, 0.0)
    dt = 0.5 * cfl_max_dt(v0, 2.0)
    errs = []
    for k in (1, 2):
        tr = evolve(v0, 0.5, dt / k, 2.0, p.mu, snapshot_every=10 ** 9)
        ref = separable_solution(sol.u, p, 0.5)
        errs.append(np.max(np.abs(tr.final.data - ref.data)) / ref.data.max())
    assert errs[0] < 1e-2
    assert 1.8 < errs[0] / errs[1] < 2.2


def test_evolve_partial_trace_on_failure():
    v = Domain(4, 4, 0.1).full(0.1)
    with pytest.raises(StabilityError) as info:
        # strong growth eventually breaks the fixed step
        evolve(v, 50.0, 0.8 * cfl_max_dt(v, 2.0), 2.0, Constant(20.0), snapshot_every=1)
    assert info.value.partial is not None and len(info.value.partial.times) > 1


def test_comparison_reports(setup):
    d, sol, p = setup
    w0 = separable_solution(sol.u, p, 0.0)
    dt = 0.5 * cfl_max_dt(w0, 2.0)
    tw = evolve(w0, 0.2, dt, 2.0, p.mu, snapshot_every=10)
    assert verify_comparison(tw, tw).max_violation == 0.0
    tv = evolve(w0.with_data(0.5 * w0.data), 0.2, dt, 2.0, p.mu, snapshot_every=10)
    assert verify_comparison(tv, tw).ok
    tv2 = evolve(w0, 0.2, dt, 2.0, Constant(0.5), snapshot_every=10)
    assert verify_comparison(tv2, tw).ok
    with pytest.raises(PreconditionError):
        verify_comparison(tw, tv)
    with pytest.raises(PreconditionError):
        verify_comparison(tw, tv2)


def test_sandwich(setup):
    d, sol, p = setup
    bp = BarrierPair.from_solution(sol, p)
    v0 = separable_solution(sol.u, p, 0.0)
    x, _ = d.coordinates()
    for init in (v0, bp.blend(1 / 8), bp.blend(x / d.lengths[0])):
        dt = 0.25 * cfl_max_dt(init.with_data(2 * bp.profiles()[1]), 2.0)
        rep = verify_sandwich(evolve(init, 0.5, dt, 2.0, p.mu, snapshot_every=20), bp)
        assert rep.ok and rep.min_lower_margin >= 0 and rep.min_upper_margin >= 0
    outside = v0.with_data(v0.data * 100)
    with pytest.raises(PreconditionError):
        verify_sandwich(evolve(outside, 0.0, 1.0, 2.0, p.mu), bp)
    with pytest.raises(ValidationError):
        bp.blend(1.5)


def test_monotonicity_constants():
    assert monotonicity_constant(Constant(0.7), 3.0) == 0.7
    assert monotonicity_constant(RationalDecay(0.3), 3.0) == 0.3
    assert monotonicity_constant(Seasonal(1.0), 3.0) == 2.0
    assert monotonicity_constant(Tabulated([0, 1, 2], [1, 4, 2]), 0.5) == pytest.approx(2.5)


def test_monotone_iteration_matches_evolve(setup):
    d, sol, p = setup
    bp = BarrierPair.from_solution(sol, p)
    v0 = separable_solution(sol.u, p, 0.0)
    dt = 0.25 * cfl_max_dt(v0.with_data(2 * bp.profiles()[1]), 2.0)
    lo = monotone_iterate(v0, 0.3, dt, 2.0, p.mu, bp, tol=1e-8, direction="lower")
    hi = monotone_iterate(v0, 0.3, dt, 2.0, p.mu, bp, tol=1e-8, direction="upper")
    ref = evolve(v0, 0.3, dt, 2.0, p.mu)
    assert lo.worst_order_increment >= -1e-12 and hi.worst_order_increment >= -1e-12
    assert np.max(np.abs(lo.trace.stack() - ref.stack())) < 1e-7
    assert np.max(np.abs(hi.trace.stack() - ref.stack())) < 1e-7
    assert np.all(lo.trace.stack() <= hi.trace.stack() + 1e-12)
