"""Controlled models: GBM wealth pair, generic Euler driver, payoffs, features."""
import numpy as np
import pytest

from skeleton_control.exceptions import InvalidParameterError, ModelBreakdownError
from skeleton_control.models import (EulerSkeletonModel, GBMWealthModel,
                                     PayoffKind, PayoffSpec, euler_skeleton_step,
                                     evolve_gbm_step, path_feature,
                                     quadratic_hedging_payoff)
from skeleton_control.rng import substream


def test_evolve_gbm_examples():
    s, x = evolve_gbm_step([49.0, 0.0], 0.0, +0.125, 0.015625, sigma=0.2, mu=0.0)
    assert s == pytest.approx(50.225, abs=1e-12)
    assert x == 0.0
    s, x = evolve_gbm_step([49.0, 0.0], 1.0, -0.125, 0.015625, sigma=0.2, mu=0.0)
    assert s == pytest.approx(47.775, abs=1e-12)
    assert x == pytest.approx(-1.225, abs=1e-12)


def test_evolve_gbm_identity():
    state = np.array([42.0, 3.0])
    for phi in (-1.0, 0.0, 0.7):
        out = evolve_gbm_step(state, phi, 0.0, 0.01, sigma=0.2, mu=0.0)
        assert np.array_equal(out, state)


def test_evolve_gbm_breakdown():
    with pytest.raises(ModelBreakdownError):
        evolve_gbm_step([49.0, 0.0], 0.0, -6.0, 0.01, sigma=0.2, mu=0.0)


def test_quadratic_hedging_payoff_examples():
    assert quadratic_hedging_payoff(0.0, 55.0, 55.0, 0.0) == 0.0
    assert quadratic_hedging_payoff(0.0, 60.0, 55.0, 1.8) == pytest.approx(10.24)
    # perfect hedge x = H - c zeroes the cost for any terminal price
    for y in (40.0, 55.0, 70.0):
        h = max(y - 55.0, 0.0)
        c = 1.81
        assert quadratic_hedging_payoff(h - c, y, 55.0, c) == pytest.approx(0.0, abs=1e-24)


def test_euler_step_examples():
    prefix = np.array([[2.0]])
    out = euler_skeleton_step(lambda t, p, u: 0.0, lambda t, p, u: 1.0,
                              0.0, prefix, 0.3, dA=0.125, dT=0.01)
    assert out[0] == pytest.approx(2.125)
    out = euler_skeleton_step(lambda t, p, u: 1.0, lambda t, p, u: 0.0,
                              0.0, prefix, 0.3, dA=0.125, dT=0.25)
    assert out[0] == pytest.approx(2.25)


def test_euler_step_rejects_nonfinite():
    prefix = np.array([[1.0]])
    with pytest.raises(ModelBreakdownError):
        euler_skeleton_step(lambda t, p, u: np.inf, lambda t, p, u: 0.0,
                            0.0, prefix, 0.0, dA=0.1, dT=0.1)


def test_euler_linear_sigma_reproduces_gbm():
    # sigma(t, path, u) = sigma * x reproduces the price leg of the GBM step
    sigma = 0.2
    model_sigma = lambda t, prefix, u: sigma * float(np.asarray(prefix)[-1, 0])
    rng = substream(17)
    s = 49.0
    prefix = [[s]]
    for _ in range(1000):
        dA = float(rng.choice([-0.125, 0.125]))
        dT = 0.015625
        via_euler = euler_skeleton_step(lambda t, p, u: 0.0, model_sigma,
                                        0.0, np.asarray(prefix), 0.0, dA, dT)[0]
        via_gbm = evolve_gbm_step([s, 0.0], 0.0, dA, dT, sigma=sigma, mu=0.0)[0]
        assert via_euler == pytest.approx(via_gbm, rel=1e-14)
        s = via_gbm
        prefix.append([s])


def test_path_feature_examples():
    states = np.array([[49.0, 0.0]] * 5)
    f = path_feature(states, 4, 8)
    assert f.tolist() == [49.0, 0.0, 49.0, 0.5]
    # peak is remembered by the running max
    states = np.array([[49.0, 0.0], [52.0, 0.1], [50.0, 0.2]])
    f = path_feature(states, 2, 4)
    assert f[2] == 52.0
    # prefix-measurability: extending the path never changes earlier features
    longer = np.vstack([states, [[60.0, 0.3]]])
    assert np.array_equal(path_feature(longer, 2, 4), f)
    with pytest.raises(InvalidParameterError):
        path_feature(np.zeros((0, 2)), 0, 4)


def test_non_anticipativity():
    model = GBMWealthModel()
    eps, dt = 0.125, 0.015625
    rng = substream(5)
    signs = rng.choice([-1.0, 1.0], size=6)
    actions_a = rng.uniform(-1, 1, size=6)
    actions_b = actions_a.copy()
    actions_b[3:] = rng.uniform(-1, 1, size=3)  # perturb only the future
    state_a = state_b = model.initial_state
    for j in range(3):
        state_a = model.evolve(state_a, actions_a[j], eps * signs[j], dt)
        state_b = model.evolve(state_b, actions_b[j], eps * signs[j], dt)
    assert np.array_equal(state_a, state_b)


def test_wealth_control_continuity_bound():
    # |X^u_n - X^v_n| <= sum |u_j - v_j| |dS_j| with constant 1 (telescoping)
    model = GBMWealthModel()
    eps, dt = 0.25, 0.0625
    rng = substream(6)
    signs = rng.choice([-1.0, 1.0], size=8)
    u = rng.uniform(-1, 1, size=8)
    v = rng.uniform(-1, 1, size=8)
    su = sv = model.initial_state
    bound = 0.0
    for j in range(8):
        s_before = su[0]
        su = model.evolve(su, u[j], eps * signs[j], dt)
        sv = model.evolve(sv, v[j], eps * signs[j], dt)
        bound += abs(u[j] - v[j]) * abs(su[0] - s_before)
        assert abs(su[1] - sv[1]) <= bound + 1e-12


def test_zero_control_zero_wealth():
    model = GBMWealthModel()
    state = model.initial_state
    rng = substream(7)
    for j in range(64):
        state = model.evolve(state, 0.0, 0.125 * float(rng.choice([-1, 1])), 0.015625)
        assert state[1] == 0.0


def test_payoff_conventions():
    model = GBMWealthModel(payoff_spec=PayoffSpec(PayoffKind.QUADRATIC_HEDGING, premium=1.8))
    path = np.array([[49.0, 0.0], [60.0, 0.0]])
    assert model.payoff(path) == pytest.approx(-10.24)
    batch = model.payoff_batch(path[None, :, :])
    assert batch[0] == pytest.approx(-10.24)

    runmax_payoff = PayoffSpec(PayoffKind.PATH_DEPENDENT,
                               terminal_functional=lambda terminal, m: min(m, 60.0))
    model2 = GBMWealthModel(payoff_spec=runmax_payoff)
    path = np.array([[49.0, 0.0], [52.0, 0.0], [50.0, 0.0]])
    assert model2.payoff(path) == 52.0


def test_path_dependent_requires_functional():
    with pytest.raises(InvalidParameterError):
        PayoffSpec(PayoffKind.PATH_DEPENDENT)


def test_gbm_batch_matches_scalar():
    model = GBMWealthModel()
    states = np.array([[49.0, 0.0], [52.0, 1.0], [40.0, -2.0]])
    actions = np.array([0.5, -0.3, 1.0])
    dA = np.array([0.125, -0.125, 0.125])
    out = model.evolve_batch(states, actions, dA, 0.015625)
    for i in range(3):
        assert np.allclose(out[i], model.evolve(states[i], actions[i], dA[i], 0.015625))


def test_euler_model_stability_guard():
    m = GBMWealthModel(sigma=0.9)
    with pytest.raises(InvalidParameterError):
        m.require_stable(2.0)
