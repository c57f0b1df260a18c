"""Dynamic-programming engines against each other and against enumeration."""
import math

import numpy as np
import pytest

from skeleton_control.controls import ActionCube, ActionGrid
from skeleton_control.dp import (DPConfig, Engine, FixedActionPolicy,
                                 RandomAdaptedPolicy, brute_force_value,
                                 evaluate_policy, solve_exact_tree,
                                 solve_regression_mc)
from skeleton_control.exceptions import (InvalidParameterError,
                                         ResourceLimitError,
                                         UnsupportedModeError)
from skeleton_control.hedging import HedgingSpec
from skeleton_control.models import (ControlledModel, GBMWealthModel,
                                     PayoffKind, PayoffSpec)
from skeleton_control.skeleton import SkeletonParams, TimingMode

import _oracles as orc

DET = TimingMode.DETERMINISTIC_STEP_COUNT


def grid1(m, a=1.0):
    return ActionGrid(ActionCube(1, a), m)


def two_step_hedging(premium=0.0):
    spec = HedgingSpec(k=1, horizon=0.5)  # e(1, 1/2) = 2
    return spec, spec.model(premium), spec.skeleton(DET)


class SignBetModel(ControlledModel):
    """x' = x + phi * f(dA)/eps; payoff = terminal x (control-times-noise toy)."""

    state_dim = 1

    def __init__(self, eps, transform=lambda d: d):
        self.eps = eps
        self.transform = transform
        self.initial_state = np.zeros(1)

    def evolve(self, state, action, dA, dT, step=0, prefix=None):
        phi = float(np.atleast_1d(action)[0])
        return np.array([state[0] + phi * self.transform(dA) / self.eps])

    def payoff(self, states):
        return float(np.asarray(states)[-1, 0])


# ---------------------------------------------------------------------------
# exact tree
# ---------------------------------------------------------------------------


def test_tree_symmetric_bet_is_worthless():
    skel = SkeletonParams(k=1, horizon_T=0.25, timing_mode=DET)
    model = SignBetModel(skel.epsilon)
    pol = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(3)))
    assert pol.v0 == 0.0
    # every action ties at 0; lowest grid index (-1) wins
    assert pol.node_actions[0][()] == 0
    assert pol.grid.points[0, 0] == -1.0


def test_tree_one_step_gbm_out_of_the_money():
    spec = HedgingSpec(k=1, horizon=0.25)
    model, skel = spec.model(0.0), spec.skeleton(DET)
    pol = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(3)))
    # children prices 53.9 and 44.1 are both under the strike: H = 0, and the
    # best wealth is 0 via phi = 0
    assert pol.v0 == 0.0
    assert pol.grid.points[pol.node_actions[0][()], 0] == 0.0


def test_tree_constant_payoff():
    skel = SkeletonParams(k=1, horizon_T=0.5, timing_mode=DET)

    class Const(SignBetModel):
        def payoff(self, states):
            return 2.5

    pol = solve_exact_tree(Const(skel.epsilon), skel, DPConfig(Engine.EXACT_TREE, grid1(3)))
    assert pol.v0 == 2.5
    assert all(idx == 0 for idx in pol.node_actions[0].values())


def test_tree_boundary_condition_exact():
    _, model, skel = two_step_hedging(1.0)
    pol = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(3)))
    # terminal table stores the payoff on every sign node; recompute each leaf
    eps, dt = skel.epsilon, skel.mean_waiting_time
    for leaf in orc.enumerate_sign_paths(2):
        state = model.initial_state
        path = [state]
        for j, sgn in enumerate(leaf):
            a = pol.grid.points[pol.node_actions[j][leaf[:j]]]
            state = model.evolve(state, a, eps * sgn, dt, j, np.asarray(path))
            path.append(state)
        assert pol.node_values[2][leaf] == pytest.approx(model.payoff(np.asarray(path)), abs=1e-14)


def test_tree_requires_deterministic_mode():
    spec = HedgingSpec(k=1, horizon=0.5)
    with pytest.raises(UnsupportedModeError):
        solve_exact_tree(spec.model(), spec.skeleton(TimingMode.SAMPLED_WAITING_TIMES),
                         DPConfig(Engine.EXACT_TREE, grid1(3)))


def test_tree_step_limit():
    spec = HedgingSpec(k=3)  # e(3,1) = 64 steps
    with pytest.raises(ResourceLimitError):
        solve_exact_tree(spec.model(), spec.skeleton(DET),
                         DPConfig(Engine.EXACT_TREE, grid1(3)))


# ---------------------------------------------------------------------------
# brute force oracle
# ---------------------------------------------------------------------------


def test_brute_force_symmetric_bet():
    skel = SkeletonParams(k=1, horizon_T=0.25, timing_mode=DET)
    assert brute_force_value(SignBetModel(skel.epsilon), skel, grid1(3)) == 0.0


def test_brute_force_monotone_bet():
    skel = SkeletonParams(k=1, horizon_T=0.25, timing_mode=DET)
    model = SignBetModel(skel.epsilon, transform=abs)
    assert brute_force_value(model, skel, grid1(3)) == pytest.approx(1.0)


def test_brute_force_matches_tree_on_two_step_hedging():
    _, model, skel = two_step_hedging(1.8)
    g = grid1(5)
    tree = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, g))
    assert brute_force_value(model, skel, g) == pytest.approx(tree.v0, abs=1e-12)


def test_brute_force_resource_guard():
    spec = HedgingSpec(k=1)  # 4 steps
    with pytest.raises(ResourceLimitError):
        brute_force_value(spec.model(), spec.skeleton(DET), grid1(3), n_steps=4)
    with pytest.raises(InvalidParameterError):
        brute_force_value(spec.model(), spec.skeleton(DET), grid1(3), n_steps=5)


def _random_instance(rng):
    """Random small hedging-type instance (possibly path-dependent payoff)."""
    s0 = float(rng.uniform(20, 60))
    sigma = float(rng.uniform(0.1, 0.4))
    strike = float(s0 * rng.uniform(0.8, 1.2))
    c = float(rng.uniform(0.0, 3.0))
    a = float(rng.choice([0.7, 1.0, 1.5]))
    n = int(rng.integers(1, 4))
    m = int(rng.integers(2, 6))
    if rng.random() < 0.3:
        payoff = PayoffSpec(
            PayoffKind.PATH_DEPENDENT,
            terminal_functional=lambda term, runmax, c=c, k=strike:
                -(c + term[1] - max(runmax - k, 0.0)) ** 2)
    else:
        payoff = PayoffSpec(PayoffKind.QUADRATIC_HEDGING, premium=c)
    model = GBMWealthModel(s0, sigma, 0.0, strike, payoff)
    skel = SkeletonParams(k=1, horizon_T=n / 4, timing_mode=DET)
    return model, skel, ActionGrid(ActionCube(1, a), m), n


def test_tree_equals_brute_force_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(8):
        model, skel, g, n = _random_instance(rng)
        tree = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, g), n_steps=n)
        bf = brute_force_value(model, skel, g, n_steps=n)
        assert tree.v0 == pytest.approx(bf, abs=1e-12)


def test_grid_refinement_monotone():
    _, model, skel = two_step_hedging(1.8)
    v_coarse = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(3))).v0
    v_fine = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(5))).v0
    assert v_fine >= v_coarse  # {-1,0,1} is a subset of {-1,-.5,0,.5,1}


# ---------------------------------------------------------------------------
# regression Monte Carlo
# ---------------------------------------------------------------------------


def test_regression_mc_constant_state_payoff():
    # payoff independent of actions and state: the fit is a constant and V0
    # lands on the sample mean of the payoff
    spec = HedgingSpec(k=1, horizon=0.5)
    payoff = PayoffSpec(PayoffKind.PATH_DEPENDENT,
                        terminal_functional=lambda term, runmax: float(term[0]))
    model = GBMWealthModel(spec.s0, spec.sigma, 0.0, spec.strike, payoff)
    skel = spec.skeleton(DET)
    with pytest.warns(RuntimeWarning):
        pol = solve_regression_mc(model, skel, DPConfig(
            Engine.REGRESSION_MC, grid1(3), n_paths=4000, seed=3))
    # terminal price is a martingale: E S_T = S0
    assert abs(pol.v0 - spec.s0) <= 3 * max(pol.v0_stderr, 1e-9)


def test_regression_mc_close_to_tree_two_step():
    _, model, skel = two_step_hedging(1.8)
    g = grid1(21)
    tree = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, g))
    mc = solve_regression_mc(model, skel, DPConfig(
        Engine.REGRESSION_MC, g, n_paths=10_000, seed=11))
    assert abs(mc.v0 - tree.v0) <= 3 * mc.v0_stderr


def test_regression_mc_error_halves_with_quadrupled_paths():
    _, model, skel = two_step_hedging(1.8)
    g = grid1(5)
    v_small, v_big = [], []
    for rep in range(30):
        v_small.append(solve_regression_mc(model, skel, DPConfig(
            Engine.REGRESSION_MC, g, n_paths=10_000, seed=1000 + rep)).v0)
        v_big.append(solve_regression_mc(model, skel, DPConfig(
            Engine.REGRESSION_MC, g, n_paths=40_000, seed=5000 + rep)).v0)
    ratio = np.std(v_small, ddof=1) / np.std(v_big, ddof=1)
    assert 1.4 <= ratio <= 2.8


def test_regression_mc_requires_enough_paths():
    _, model, skel = two_step_hedging()
    with pytest.raises(InvalidParameterError):
        solve_regression_mc(model, skel, DPConfig(
            Engine.REGRESSION_MC, grid1(3), n_paths=50, basis_degree=2))


def test_regression_mc_deterministic_given_seed():
    _, model, skel = two_step_hedging(1.0)
    cfg = DPConfig(Engine.REGRESSION_MC, grid1(5), n_paths=2000, seed=42)
    a = solve_regression_mc(model, skel, cfg)
    b = solve_regression_mc(model, skel, cfg)
    assert a.v0 == b.v0
    assert np.array_equal(a.coefs, b.coefs)


def test_tree_policy_deterministic_given_seed():
    _, model, skel = two_step_hedging(1.0)
    a = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(5)))
    b = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(5)))
    assert a.node_actions == b.node_actions and a.v0 == b.v0


# ---------------------------------------------------------------------------
# policy evaluation
# ---------------------------------------------------------------------------


def test_evaluate_zero_policy_is_minus_second_moment():
    # with zero control and zero premium the value is -E[H^2]; enumerate it
    spec, model, skel = two_step_hedging(0.0)
    second_moment = orc.exact_policy_mse(spec, lambda j, prefix, s: 0.0, 0.0)
    ev = evaluate_policy(model, skel, FixedActionPolicy(0.0), 20_000, seed=77)
    assert abs(ev.mean - (-second_moment)) <= 3 * ev.stderr


def test_evaluate_tree_policy_consistent_with_v0():
    _, model, skel = two_step_hedging(1.8)
    pol = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(5)))
    ev = evaluate_policy(model, skel, pol, 20_000, seed=5)
    assert abs(ev.mean - pol.v0) <= 3 * ev.stderr


def test_no_policy_beats_brute_force():
    _, model, skel = two_step_hedging(1.8)
    g = grid1(5)
    bf = brute_force_value(model, skel, g)
    bench = [FixedActionPolicy(0.0), FixedActionPolicy(0.5), FixedActionPolicy(-0.5),
             RandomAdaptedPolicy(1, 2), RandomAdaptedPolicy(2, 2)]
    for pol in bench:
        ev = evaluate_policy(model, skel, pol, 10_000, seed=31)
        assert ev.mean <= bf + 3 * ev.stderr


def test_tree_policy_as_step_control_is_adapted():
    from skeleton_control.controls import check_adapted
    _, model, skel = two_step_hedging(1.8)
    pol = solve_exact_tree(model, skel, DPConfig(Engine.EXACT_TREE, grid1(5)))
    control = pol.as_step_control()
    histories = orc.enumerate_sign_paths(2)
    assert check_adapted(control, ActionCube(1, 1.0), histories)
