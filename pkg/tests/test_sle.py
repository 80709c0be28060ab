import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from slecone.rng import make_rng
from slecone.sle import (
    Phase,
    classify_phase,
    driving_pair_from_increments,
    params,
    sample_driving_pair,
    sample_force_point_driving,
    sample_multi_force_driving,
    sample_sle_trace,
)


def table_phase(kappa, rho):
    """Independent reading of the phase table (with the kappa <= 2 merger)."""
    if rho <= -2 - kappa / 2:
        return "not_defined"
    if rho < -2:
        if kappa > 2 and rho <= kappa / 2 - 4:
            return "trunk_plus_loops"
        return "light_cone"
    if rho == -2:
        return "boundary_tracing"
    return "boundary_hitting" if rho < kappa / 2 - 2 else "boundary_avoiding"


@pytest.mark.parametrize("kappa,rho,phase", [
    (3, -3.6, Phase.NOT_DEFINED), (3, -3.0, Phase.TRUNK_PLUS_LOOPS), (3, -2.2, Phase.LIGHT_CONE),
    (3, -2.0, Phase.BOUNDARY_TRACING), (3, -1.0, Phase.BOUNDARY_HITTING), (3, 0.0, Phase.BOUNDARY_AVOIDING),
    (1.5, -2.5, Phase.LIGHT_CONE), (3, -2.5, Phase.TRUNK_PLUS_LOOPS), (3, -0.5, Phase.BOUNDARY_AVOIDING),
])
def test_phase_examples(kappa, rho, phase):
    assert classify_phase(kappa, rho).phase is phase


@settings(max_examples=200)
@given(kappa=st.floats(0.05, 10.0), rho=st.floats(-12.0, 6.0))
def test_classifier_total_and_consistent(kappa, rho):
    info = classify_phase(kappa, rho)
    assert info.phase.value == table_phase(kappa, rho)
    assert (params(kappa, rho).delta > 0) == (info.phase is not Phase.NOT_DEFINED)


def test_params_examples():
    assert params(4, 0.3).chi == 0
    assert params(2.7, -2).delta == 1
    p = params(3, -2.5)
    assert p.theta_rho == pytest.approx(math.pi, rel=1e-12)
    assert p.dimension == pytest.approx(5 / 3, rel=1e-12)
    assert params(3, -2).dimension == pytest.approx(1.375, rel=1e-12)
    assert params(4, 0).theta_rho is None


@settings(max_examples=100)
@given(kappa=st.floats(0.1, 3.99))
def test_constant_identities(kappa):
    p = params(kappa, -2.3)
    assert p.lambda_prime == pytest.approx(p.lambda_ - math.pi / 2 * p.chi, rel=1e-12)
    # dimension formula reduces to the table at rho = -2 and rho = kappa/2 - 4
    assert params(kappa, -2).dimension == pytest.approx(1 + kappa / 8, rel=1e-12)
    assert params(kappa, kappa / 2 - 4).dimension == pytest.approx(1 + 2 / kappa, rel=1e-12)


@pytest.mark.parametrize("rho", [-2.0, -3.6])
def test_driving_pair_rejects(rho):
    with pytest.raises(ValueError):
        sample_driving_pair(3, rho, 1.0, 1e-3, make_rng(0))


@settings(max_examples=20, deadline=None)
@given(kappa=st.floats(0.5, 3.9), frac=st.floats(0.02, 0.98).filter(lambda f: abs(f - 0.5) > 0.02),
       seed=st.integers(0, 10_000), side=st.sampled_from(["right", "left"]))
def test_driving_pair_invariants(kappa, frac, seed, side):
    # rho anywhere in (-2 - kappa/2, kappa/2 + 2), away from -2
    rho = -2 - kappa / 2 + frac * kappa
    if abs(rho + 2) < 1e-3:
        return
    pair = sample_driving_pair(kappa, rho, 0.5, 1e-3, make_rng(seed), side=side)
    assert pair.W[0] == 0 and pair.V[0] == 0
    gap = pair.V - pair.W if side == "right" else pair.W - pair.V
    assert np.all(gap >= 0)
    np.testing.assert_allclose(np.abs(gap), math.sqrt(kappa) * pair.bessel.X, atol=1e-12)


def test_rho_zero_is_brownian():
    kappa, n, dt = 3.0, 4000, 1e-2
    rng = make_rng(11)
    w = np.array([sample_driving_pair(kappa, 0.0, 1.0, dt, rng).W[-1] for _ in range(n)])
    ref = make_rng(12).standard_normal(n) * math.sqrt(kappa)
    assert stats.ks_2samp(w, ref).statistic < 0.05


def test_force_point_leaves_real_line_below_minus_two():
    # V has a decreasing stretch on almost every path for rho < -2
    hits = 0
    for s in range(100):
        V = sample_driving_pair(3.0, -2.5, 1.0, 1e-4, make_rng(13, s)).V
        hits += np.any(np.diff(V) < 0)
    assert hits / 100 > 0.95


def test_driving_pair_deterministic_in_increments():
    dB = make_rng(3).standard_normal(500) * math.sqrt(1e-3)
    a = driving_pair_from_increments(3, -2.3, 1e-3, dB)
    b = driving_pair_from_increments(3, -2.3, 1e-3, dB)
    assert np.array_equal(a.W, b.W)


def test_adaptive_pair_has_grid():
    pair = sample_driving_pair(3, -2.5, 0.2, 1e-4, make_rng(4), grid="adaptive")
    assert np.ndim(pair.dt) == 1 and pair.times[-1] == pytest.approx(0.2)
    assert np.all(pair.W <= pair.V + 1e-12)


def test_multi_force_ordering():
    d = sample_multi_force_driving(3.0, 0.5, -1.0, -0.3, 0.4, 1.0, 1e-4, make_rng(5))
    assert np.all(d.V_left[:, 0] <= d.W + 1e-12)
    assert np.all(d.W <= d.V_right[:, 0] + 1e-12)


def test_multi_force_zero_weights_is_brownian():
    kappa, n = 2.0, 3000
    w = np.array([sample_multi_force_driving(kappa, 0, 0, -1e6, 1e6, 1.0, 1e-2, make_rng(6, s)).W[-1]
                  for s in range(n)])
    ref = make_rng(7).standard_normal(n) * math.sqrt(kappa)
    assert stats.ks_2samp(w, ref).statistic < 0.05


def test_multi_force_no_collision_above_threshold():
    # weight kappa/2 - 2 makes V - W a dimension-2 Bessel process: it never reaches 0
    kappa = 3.0
    rho_r = kappa / 2 - 2
    touched = 0
    for s in range(200):
        d = sample_multi_force_driving(kappa, 0.0, rho_r, -1e6, 0.5, 1.0, 1e-4, make_rng(8, s), floor=1e-12)
        touched += np.any(d.V_right[:, 0] - d.W <= 1e-10)
    assert touched / 200 <= 0.01


@pytest.mark.parametrize("args", [(-2.0, 0.0, -1, 1), (0.0, -2.5, -1, 1), (0.0, 0.0, 0.5, 1)])
def test_multi_force_errors(args):
    rl, rr, xl, xr = args
    with pytest.raises(ValueError):
        sample_multi_force_driving(3.0, rl, rr, xl, xr, 1.0, 1e-3, make_rng(0))


def test_force_points_stop_at_threshold():
    # two right points of weights -0.5 and -1.5 sum to -2 once both are hit
    d = sample_force_point_driving(3.0, [-0.5, -1.5], [0.0, 0.0], 1.0, 1e-4, make_rng(9))
    assert d.stopped_at is not None


def test_sle_trace_starts_at_origin():
    tr = sample_sle_trace(2.0, 0.0, 0.1, 1e-4, 1)
    assert tr.points[0] == 0
    assert tr.meta["seed"] == 1 and tr.kappa == 2.0


def test_sle_trace_not_defined():
    with pytest.raises(ValueError):
        sample_sle_trace(3.0, -4.0, 0.1, 1e-3, 0)


def test_scale_invariance_of_driving():
    kappa, rho, n = 3.0, -2.3, 2000
    dt = 1e-2
    w1 = [sample_driving_pair(kappa, rho, 1.0, dt, make_rng(20, s)).W[-1] for s in range(n)]
    w4 = [sample_driving_pair(kappa, rho, 4.0, 4 * dt, make_rng(21, s)).W[-1] / 2 for s in range(n)]
    assert stats.ks_2samp(w1, w4).statistic < 0.05
