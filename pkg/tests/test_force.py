"""Tests for the force estimation and compliance chain."""

import numpy as np
import pytest

from guidebot.force import (
    EstimatorParams,
    ForceEstimator,
    ImpulseBuffer,
    InertiaParams,
    RlsState,
    Wrench2D,
    accumulate_impulse,
    compliance_velocity,
    extract_base_wrench,
    planar_fixture_step,
    rls_step,
)
from guidebot.geometry import Pose2D, VelocityCommand


# ---------------------------------------------------------------- oracles

def scalar_rls_oracle(taus, alpha, p0):
    """Independent scalar recursion (j = 1)."""
    a, p = 0.0, p0
    history = []
    for tau in taus:
        k = p / (alpha + p)
        a = a + k * (tau - a)
        p = (1 - k) * p / alpha
        history.append(a)
    return history


# -------------------------------------------------------------------- RLS

def test_rls_scalar_constant_signal():
    state = RlsState(np.zeros(1), np.array([[1000.0]]), alpha=1.0)
    oracle = scalar_rls_oracle([5.0] * 50, 1.0, 1000.0)
    for i in range(50):
        state = rls_step(state, np.eye(1), np.array([5.0]))
        assert state.estimate[0] == pytest.approx(oracle[i], rel=1e-10)
    assert state.estimate[0] == pytest.approx(5.0, abs=1e-3)


def test_rls_zero_fixed_point():
    state = RlsState.initial(3)
    for _ in range(10):
        state = rls_step(state, np.eye(3), np.zeros(3))
    assert np.allclose(state.estimate, 0.0)


def test_rls_forgetting_tracks_step_change():
    # oracle-derived: post-step error decays ~ (1 - K_ss) per step, so with
    # alpha = 0.9 the estimate is within 2% of 10 after 33 iterations (the
    # scalar recursion gives 2.11% at step 30, 1.55% at 33)
    def settle(alpha, post_steps):
        taus = [5.0] * 50 + [10.0] * post_steps
        oracle = scalar_rls_oracle(taus, alpha, 1000.0)
        state = RlsState(np.zeros(1), np.array([[1000.0]]), alpha=alpha)
        got = []
        for tau in taus:
            state = rls_step(state, np.eye(1), np.array([tau]))
            got.append(float(state.estimate[0]))
        assert got == pytest.approx(oracle, rel=1e-10)
        return got

    fading = settle(0.9, 33)
    flat = settle(1.0, 33)
    assert abs(fading[-1] - 10.0) <= 0.02 * 10.0
    # forgetting adapts strictly faster than the unweighted filter
    assert abs(fading[-1] - 10.0) < abs(flat[-1] - 10.0)


def test_rls_covariance_stays_spd():
    rng = np.random.default_rng(0)
    state = RlsState.initial(3, alpha=0.95)
    for _ in range(200):
        j = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        state = rls_step(state, j, rng.normal(size=3))
        p = state.covariance
        assert np.allclose(p, p.T)
        assert np.linalg.eigvalsh(p).min() > 0


def test_rls_error_non_increasing_alpha_one():
    rng = np.random.default_rng(3)
    truth = np.array([4.0, -2.0, 1.0])
    state = RlsState(np.zeros(3), 1e3 * np.eye(3), alpha=1.0)
    prev_err = np.linalg.norm(truth)
    errs = []
    for i in range(100):
        j = np.eye(3) + 0.05 * rng.normal(size=(3, 3))
        state = rls_step(state, j, j.T @ truth)
        errs.append(np.linalg.norm(state.estimate - truth))
    for a, b in zip(errs, errs[1:]):
        assert b <= a + 1e-12
    assert errs[-1] < 1e-3 * np.linalg.norm(truth)


def test_rls_rejects_bad_dimensions():
    state = RlsState.initial(3)
    with pytest.raises(ValueError):
        rls_step(state, np.eye(2), np.zeros(3))


def test_rls_state_validation():
    with pytest.raises(ValueError):
        RlsState(np.zeros(2), np.eye(2), alpha=0.0)
    with pytest.raises(ValueError):
        RlsState(np.zeros(2), -np.eye(2))


# --------------------------------------------------------- extract wrench

def test_extract_planar_identity():
    w = extract_base_wrench(np.array([3.0, -1.0, 0.2]))
    assert (w.fx, w.fy, w.mz) == (3.0, -1.0, 0.2)


def test_extract_base_block_rows():
    v = np.zeros(24)
    v[0], v[1], v[5] = 1.0, 2.0, 7.0
    w = extract_base_wrench(v)
    assert (w.fx, w.fy, w.mz) == (1.0, 2.0, 7.0)


def test_extract_zero():
    w = extract_base_wrench(np.zeros(3))
    assert (w.fx, w.fy, w.mz) == (0.0, 0.0, 0.0)


def test_extract_rejects_short():
    with pytest.raises(ValueError):
        extract_base_wrench(np.zeros(4))


# ---------------------------------------------------------------- impulse

def test_impulse_plain_sum_gamma_one():
    buf = ImpulseBuffer(capacity=10, gamma=1.0)
    for _ in range(10):
        buf.push(Wrench2D(10, 0, 0), 0.1)
    left = accumulate_impulse(buf)
    assert left[0] == pytest.approx(10.0 * 0.1 * 10)


def test_impulse_geometric_series():
    buf = ImpulseBuffer(capacity=10, gamma=0.5)
    for _ in range(10):
        buf.push(Wrench2D(10, 0, 0), 0.1)
    left = accumulate_impulse(buf)
    assert left[0] == pytest.approx(10 * 0.1 * (2 - 2**-9), rel=1e-12)


def test_impulse_zero_wrenches():
    buf = ImpulseBuffer(capacity=5, gamma=0.9)
    for _ in range(5):
        buf.push(Wrench2D.zero(), 0.1)
    assert np.allclose(accumulate_impulse(buf), 0.0)


def test_impulse_empty_rejected():
    with pytest.raises(ValueError):
        accumulate_impulse(ImpulseBuffer(5, 0.9))


def test_impulse_linearity_and_gamma_monotonicity():
    def total(scale, gamma):
        buf = ImpulseBuffer(capacity=8, gamma=gamma)
        for i in range(8):
            buf.push(Wrench2D(scale * (i + 1), -scale, scale * 0.5), 0.05)
        return accumulate_impulse(buf)

    assert np.allclose(total(3.0, 0.8), 3.0 * total(1.0, 0.8), rtol=1e-12)
    lows = total(1.0, 0.5)
    highs = total(1.0, 0.95)
    assert highs[0] > lows[0]


def test_impulse_ring_capacity():
    buf = ImpulseBuffer(capacity=3, gamma=1.0)
    for v in (1.0, 2.0, 3.0, 4.0):
        buf.push(Wrench2D(v, 0, 0), 1.0)
    assert accumulate_impulse(buf)[0] == pytest.approx(2 + 3 + 4)


# ----------------------------------------------------- compliance velocity

def test_compliance_direct():
    v = compliance_velocity(
        np.array([10.0, 0, 0]),
        VelocityCommand.zero(),
        InertiaParams(m=50, jz=8),
        (5.0, 2.0),
        Wrench2D(30, 0, 0),
    )
    assert v.vx == pytest.approx(0.2, abs=1e-15)
    assert v.vy == 0.0 and v.wz == 0.0


def test_compliance_deadband_zeroes():
    v = compliance_velocity(
        np.array([100.0, 100.0, 100.0]),
        VelocityCommand(1, 1, 1),
        InertiaParams(),
        (5.0, 2.0),
        Wrench2D(1.0, 1.0, 0.5),
    )
    assert (v.vx, v.vy, v.wz) == (0.0, 0.0, 0.0)


def test_compliance_moment():
    v = compliance_velocity(
        np.array([0, 0, 4.0]),
        VelocityCommand.zero(),
        InertiaParams(m=50, jz=8),
        (5.0, 2.0),
        Wrench2D(0, 0, 10.0),
    )
    assert v.wz == pytest.approx(0.5, abs=1e-15)


def test_compliance_passthrough_v0():
    v0 = VelocityCommand(0.3, -0.1, 0.2)
    v = compliance_velocity(
        np.zeros(3), v0, InertiaParams(), (0.0, 0.0), Wrench2D(100, 0, 0)
    )
    assert (v.vx, v.vy, v.wz) == (v0.vx, v0.vy, v0.wz)


# ----------------------------------------------------------------- fixture

def test_fixture_rest_zero_tau():
    _, _, tau, reg = planar_fixture_step(
        Pose2D(0, 0, 0), VelocityCommand.zero(), Wrench2D.zero(), InertiaParams(), 0.02
    )
    assert np.allclose(tau, 0.0)
    assert np.allclose(reg, np.eye(3))


def test_fixture_newton_acceleration():
    _, v, tau, _ = planar_fixture_step(
        Pose2D(0, 0, 0),
        VelocityCommand.zero(),
        Wrench2D(10, 0, 0),
        InertiaParams(m=50, jz=8),
        0.02,
        damping=(0.0, 0.0),
    )
    assert v.vx == pytest.approx(0.2 * 0.02)
    assert np.allclose(tau, [10, 0, 0])


def test_fixture_tau_equals_applied_with_damping():
    v = VelocityCommand(0.4, -0.2, 0.1)
    _, _, tau, _ = planar_fixture_step(
        Pose2D(0, 0, 0), v, Wrench2D(7, -3, 1), InertiaParams(), 0.02
    )
    assert np.allclose(tau, [7, -3, 1], atol=1e-12)


def test_fixture_dt_validation():
    with pytest.raises(ValueError):
        planar_fixture_step(
            Pose2D(0, 0, 0), VelocityCommand.zero(), Wrench2D.zero(), InertiaParams(), 0.0
        )


# ------------------------------------------------------------- full chain

def run_chain(wrench, steps, noise_sigma=0.0, seed=0):
    params = EstimatorParams()
    est = ForceEstimator(params)
    pose, vel = Pose2D(0, 0, 0), VelocityCommand.zero()
    rng = np.random.default_rng(seed)
    snap = None
    for _ in range(steps):
        pose, vel, tau, reg = planar_fixture_step(
            pose,
            vel,
            wrench,
            params.inertia,
            params.dt,
            damping=(params.damping_linear, params.damping_rotational),
        )
        if noise_sigma:
            tau = tau + rng.normal(scale=noise_sigma, size=3)
        snap = est.step(tau, reg, vel)
    return snap


def test_chain_recovers_wrench_noiseless():
    snap = run_chain(Wrench2D(10, 0, 0), 200)
    assert snap.wrench.fx == pytest.approx(10.0, rel=0.02)


def test_chain_deadband_keeps_target_zero():
    snap = run_chain(Wrench2D(2.0, 0, 0), 100)
    assert snap.v_tgt == VelocityCommand.zero()


def test_chain_push_raises_target():
    snap = run_chain(Wrench2D(30, 0, 0), 150)
    assert snap.v_tgt.vx > 0.05
