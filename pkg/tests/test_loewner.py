import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slecone.loewner import (
    LoewnerError,
    Trace,
    hydrodynamic_check,
    map_point,
    map_points,
    pullback,
    solve_forward,
    solve_tail,
)
from slecone.rng import make_rng


def brownian(n, dt, kappa, seed):
    return np.concatenate([[0.0], np.cumsum(make_rng(seed).standard_normal(n))]) * np.sqrt(kappa * dt)


def test_zero_driving_gives_vertical_slit():
    n = 10_000
    tr = solve_forward(np.zeros(n + 1), 1.0 / n)
    # closed form: tip at 2i sqrt(t); the lift sqrt(dt) puts it at 2i sqrt(t + dt/4)
    assert abs(tr.points[-1] - 2j) < 1e-3
    t = tr.capacity_times[1:]
    np.testing.assert_allclose(tr.points[1:], 2j * np.sqrt(t + 0.25 / n), atol=1e-9)


def test_constant_driving_translates():
    a = solve_forward(np.zeros(2001), 1e-3)
    b = solve_forward(np.full(2001, 0.7), 1e-3)
    np.testing.assert_allclose(b.points, a.points + 0.7, atol=1e-12)


def test_trace_invariants():
    W = brownian(5000, 1e-4, 3.0, 1)
    tr = solve_forward(W, 1e-4)
    assert tr.points[0] == 0 and tr.points[0].imag == 0
    assert len(tr.capacity_times) == len(tr.points) == 5001
    assert np.all(np.diff(tr.capacity_times) > 0)
    assert np.all(tr.points.imag >= -1e-9)


def test_tree_matches_naive():
    W = brownian(3000, 1e-4, 6.0, 2)
    a = solve_forward(W, 1e-4, method="tree")
    b = solve_forward(W, 1e-4, method="naive")
    assert np.max(np.abs(a.points - b.points)) < 1e-9


def test_array_dt_equals_scalar_dt():
    W = brownian(2000, 1e-4, 2.0, 3)
    a = solve_forward(W, 1e-4)
    b = solve_forward(W, np.full(2000, 1e-4))
    np.testing.assert_allclose(a.points, b.points, atol=1e-12)
    np.testing.assert_allclose(a.capacity_times, b.capacity_times)


def test_nonuniform_grid_slit():
    h = np.where(np.arange(4000) % 2 == 0, 1e-4, 4e-4)
    tr = solve_forward(np.zeros(4001), h)
    np.testing.assert_allclose(tr.points[-1], 2j * np.sqrt(h.sum()), atol=2e-3)


def test_map_point_examples():
    n = 1000
    W = np.zeros(n + 1)
    assert map_point(W, 1.0 / n, 0.3 + 0.2j, 0.0).value == 0.3 + 0.2j
    r = map_point(W, 1.0 / n, 2j, 1.0)
    assert abs(r.value) < 1e-4 and not r.swallowed
    s = map_point(W, 1.0 / n, 1e-6j, 1.0)
    assert s.swallowed and s.swallow_time <= 2.0 / n


def test_map_point_closed_form():
    n = 4000
    for z in (1 + 1j, -2 + 0.5j, 3j):
        g = map_point(np.zeros(n + 1), 1.0 / n, z, 1.0).value
        exact = np.sqrt(z * z + 4)
        exact = exact if exact.imag >= 0 else -exact
        assert abs(g - exact) < 1e-9


def test_capacity_additivity():
    # forward composition of the first k then the last N-k equals all N
    n, dt = 1000, 1e-3
    W = brownian(n, dt, 3.0, 4)
    z = np.array([0.5 + 2j, -1 + 1j, 3j])
    full, _ = map_points(W, dt, z, n * dt)
    k = 400
    mid, _ = map_points(W, dt, z, k * dt)
    rest, _ = map_points(W[k:], dt, mid, (n - k) * dt)
    np.testing.assert_allclose(full, rest, atol=1e-9)


def test_pullback_inverts_forward():
    n, dt = 800, 1e-3
    W = brownian(n, dt, 2.0, 5)
    z = np.array([0.3 + 3j, -2 + 1j])
    g, _ = map_points(W, dt, z, n * dt)
    np.testing.assert_allclose(pullback(W, dt, g), z, atol=1e-8)


def test_hydrodynamic_examples():
    n = 2000
    assert hydrodynamic_check(np.zeros(n + 1), 1.0 / n, 100.0) <= 1e-3
    assert hydrodynamic_check(np.zeros(n + 1), 1.0 / n, 100.0, t=0.0) == 0.0
    devs = [hydrodynamic_check(brownian(n, 1.0 / n, 3.0, s), 1.0 / n, 100.0) for s in range(10)]
    assert np.median(devs) <= 1e-2


def test_scaling_equivariance():
    # W'(t) = r W(t / r^2) drives the trace scaled by r
    r, n, dt = 2.0, 4000, 1e-4
    W = brownian(n, dt, 3.0, 6)
    a = solve_forward(W, dt)
    b = solve_forward(r * W, r * r * dt)
    assert np.max(np.abs(b.points - r * a.points)) < 1e-2 * np.max(np.abs(b.points))


def test_solve_tail_matches_full_solution():
    W = brownian(3000, 1e-4, 3.0, 7)
    full = solve_forward(W, 1e-4)
    tail = solve_tail(W, 1e-4, 1200)
    np.testing.assert_allclose(tail.points, full.points[1200:], atol=1e-12)
    assert tail.capacity_times[0] == pytest.approx(full.capacity_times[1200])


def test_upto():
    tr = solve_forward(np.zeros(101), 0.01)
    assert len(tr.upto(0.5)) == 51


@pytest.mark.parametrize("dt", [0.0, -1e-3])
def test_bad_dt(dt):
    with pytest.raises(ValueError):
        solve_forward(np.zeros(10), dt)


def test_nonfinite_driving_reports_step():
    W = np.zeros(10)
    W[6] = np.nan
    with pytest.raises(LoewnerError) as exc:
        solve_forward(W, 1e-3)
    assert exc.value.step == 6


def test_trace_length_mismatch():
    with pytest.raises(ValueError):
        Trace(np.zeros(3), np.zeros(2))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), kappa=st.floats(0.5, 8.0), c=st.floats(-5, 5))
def test_translation_equivariance_property(seed, kappa, c):
    W = brownian(300, 1e-3, kappa, seed)
    a = solve_forward(W, 1e-3)
    b = solve_forward(W + c, 1e-3)
    np.testing.assert_allclose(b.points, a.points + c, atol=1e-9)
    assert np.all(a.points.imag >= -1e-9)
