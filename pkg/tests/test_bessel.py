import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slecone.bessel import (
    bes_from_increments,
    bridge_zero_probability,
    first_zero_index,
    sample_bes_adaptive,
    sample_bes_with_driver,
    sample_besq_exact,
    zero_set_local_time,
    zero_hit_fraction,
)
from slecone.rng import make_rng


def test_besq_initial_value():
    z = sample_besq_exact(2.0, 1.0, [0.0, 0.5], make_rng(0))
    assert z[0] == 1.0


def test_besq_mean_matches_drift():
    # E[Z_t] = z0 + delta t
    n = 100_000
    z = sample_besq_exact(1.5, np.ones(n), [0.0, 1.0, 2.0], make_rng(1))
    m, se = z[-1].mean(), z[-1].std(ddof=1) / np.sqrt(n)
    assert abs(m - 4.0) < 3 * se


def test_besq_high_dimension_avoids_zero():
    n = 2000
    times = np.linspace(0, 10, 201)
    z = sample_besq_exact(3.0, np.ones(n), times, make_rng(2))
    assert np.all(z.min(axis=0) > 0)


@pytest.mark.parametrize("times", [[0.0, 1.0, 1.0], [0.5, 1.0], [0.0, 2.0, 1.0]])
def test_besq_rejects_bad_grids(times):
    with pytest.raises(ValueError):
        sample_besq_exact(2.0, 1.0, times, make_rng(0))


def test_besq_rejects_bad_delta():
    with pytest.raises(ValueError):
        sample_besq_exact(0.0, 1.0, [0.0, 1.0], make_rng(0))


def test_zero_steps():
    p = sample_bes_with_driver(0.5, 0.3, 1e-3, 0, make_rng(0))
    assert p.X.tolist() == [0.3] and p.B.tolist() == [0.0] and p.U.tolist() == [0.0]


@pytest.mark.parametrize("delta", [1.0, 1.0 + 5e-7, -0.5])
def test_guard_band(delta):
    with pytest.raises(ValueError):
        sample_bes_with_driver(delta, 0.0, 1e-3, 10, make_rng(0))


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0.1, 3.5).filter(lambda d: abs(d - 1) > 1e-3),
       x0=st.floats(0.0, 2.0), seed=st.integers(0, 2**32))
def test_path_invariants(delta, x0, seed):
    p = sample_bes_with_driver(delta, x0, 1e-3, 500, make_rng(seed))
    assert len(p.X) == len(p.B) == len(p.U) == 501
    assert np.all(p.X >= 0)
    assert p.X[0] == x0 and p.B[0] == 0 and p.U[0] == 0
    # identity X = x0 + (delta-1)/2 U + B
    np.testing.assert_allclose(p.X, x0 + 0.5 * (delta - 1) * p.U + p.B, atol=1e-9)


def test_u_increasing_away_from_zero():
    p = sample_bes_with_driver(0.5, 1.0, 1e-5, 20_000, make_rng(3))
    k = first_zero_index(p.X, 0.2)
    k = p.X.size if k < 0 else k
    assert k > 100
    assert np.all(np.diff(p.U[:k]) > 0)


def test_u_matches_riemann_sum_on_excursion():
    dt = 1e-5
    p = sample_bes_with_driver(0.5, 1.0, dt, 200_000, make_rng(4))
    k = first_zero_index(p.X, 0.1)
    k = p.X.size if k < 0 else k
    assert k > 1000
    riemann = np.concatenate([[0.0], np.cumsum(dt / p.X[:k - 1])])
    rel = abs(p.U[k - 1] - riemann[-1]) / riemann[-1]
    assert rel < 1e-2


def test_same_seed_same_path():
    a = sample_bes_with_driver(0.7, 0.0, 1e-3, 1000, make_rng(9, 1))
    b = sample_bes_with_driver(0.7, 0.0, 1e-3, 1000, make_rng(9, 1))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.U, b.U)


def test_euler_and_milstein_agree_to_first_order():
    dB = make_rng(5).standard_normal(10_000) * np.sqrt(1e-5)
    a = bes_from_increments(2.5, 1.0, 1e-5, dB, "euler")
    b = bes_from_increments(2.5, 1.0, 1e-5, dB, "milstein")
    assert np.max(np.abs(a.X - b.X)) < 1e-2


def test_adaptive_grid_covers_horizon():
    p = sample_bes_adaptive(0.5, 0.0, 0.5, make_rng(6), resolution=0.05, hmin=1e-8, hmax=1e-3)
    assert p.times[0] == 0 and p.times[-1] == pytest.approx(0.5)
    assert np.all(p.steps > 0) and np.all(p.steps <= 1e-3 * (1 + 1e-12))
    assert np.all(p.X >= 0)


def test_local_time_trivial_cases():
    assert np.all(zero_set_local_time(np.full(10, 2.0), 0.1, 0.5) == 0)
    lt = zero_set_local_time(np.zeros(11), 0.1, 0.5)
    np.testing.assert_allclose(np.diff(lt), 0.2)


def test_local_time_grows_with_horizon():
    dt = 1e-3
    finals = {T: [] for T in (1.0, 4.0)}
    for s in range(200):
        p = sample_bes_with_driver(0.5, 0.0, dt, 4000, make_rng(7, s))
        lt = zero_set_local_time(p.X, dt, 0.05)
        finals[1.0].append(lt[1000])
        finals[4.0].append(lt[4000])
    assert np.median(finals[4.0]) > np.median(finals[1.0])


def test_brownian_scaling_of_marginals():
    from scipy import stats

    n = 10_000
    # X_{alpha t} / sqrt(alpha) from 0 against X_t from 0, delta = 0.6
    z1 = sample_besq_exact(0.6, np.zeros(n), [0.0, 1.0], make_rng(8))[-1]
    z4 = sample_besq_exact(0.6, np.zeros(n), [0.0, 4.0], make_rng(9))[-1] / 4.0
    assert stats.ks_2samp(np.sqrt(z1), np.sqrt(z4)).statistic < 0.05


def test_bridge_zero_probability_limits():
    assert bridge_zero_probability(2.5, 1e-8, 1e-8, 1.0) == 0
    assert bridge_zero_probability(1.5, 0.0, 1.0, 0.1) == 1
    # far from zero on a short step: essentially never
    assert bridge_zero_probability(1.5, 1.0, 1.0, 1e-3) < 1e-100
    p = bridge_zero_probability(0.5, np.array([0.01, 0.1, 1.0]), 0.01, 0.01)
    assert np.all(np.diff(p) < 0)


@pytest.mark.parametrize("delta", [0.5, 1.5])
def test_zero_hit_fraction_matches_gamma_law(delta):
    # the first zero of BES^delta from x0 is x0^2 / (2 G), G ~ Gamma(1 - delta/2)
    from scipy import stats

    exact = stats.gamma(1 - delta / 2).sf(1.0 / (2 * 3.0))
    m, se = zero_hit_fraction(delta, 1.0, 3.0, 3000, 150, make_rng(9))
    assert abs(m - exact) < 3 * se + 1e-3
