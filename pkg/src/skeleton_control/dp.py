"""Backward dynamic programming on the skeleton.

Three routes to the value process V^k and its argmax policy:

* ``solve_exact_tree``  -- exact backward recursion on the non-recombining
  sign tree (d=1, deterministic step count); conditional expectations are
  exact because each increment is +/-eps with probability 1/2.
* ``solve_regression_mc`` -- regression Monte Carlo with control
  randomization: forward-simulated paths, backward per-step least squares of
  re-evolved continuation values on polynomial path features.
* ``brute_force_value`` -- definitional supremum: enumerate every adapted
  grid-valued control (one action per history node) and every sign path.
  Kept deliberately independent of the recursion as its oracle.

The grid max replaces the essential supremum over the cube; argmax ties break
toward the lowest grid index everywhere.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .controls import ActionGrid, StepControl
from .exceptions import (InvalidParameterError, ResourceLimitError,
                         UnsupportedModeError)
from .models import ControlledModel
from .rng import substream
from .skeleton import SkeletonParams, TimingMode, sample_sign_wait_batch

__all__ = [
    "Engine",
    "DPConfig",
    "ValuePolicy",
    "PolicyEvaluation",
    "SimContext",
    "FixedActionPolicy",
    "RandomAdaptedPolicy",
    "solve_exact_tree",
    "solve_regression_mc",
    "brute_force_value",
    "evaluate_policy",
]

_EXPLORATION_STREAM = 1 << 20  # substream id offset for exploration actions


class Engine(Enum):
    EXACT_TREE = "exact_tree"
    REGRESSION_MC = "regression_mc"


@dataclass
class DPConfig:
    engine: Engine
    action_grid: ActionGrid
    n_paths: int = 10_000
    basis_degree: int = 2
    seed: int = 0
    exploration: str = "uniform"
    ridge_scale: float = 1e-8
    cond_threshold: float = 1e10
    max_tree_work: int = 4_000_000
    max_enumeration: int = 400_000

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise InvalidParameterError("n_paths must be positive")
        if self.basis_degree < 0:
            raise InvalidParameterError("basis_degree must be nonnegative")
        if self.exploration != "uniform":
            raise InvalidParameterError(f"unknown exploration policy {self.exploration!r}")


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


@dataclass
class SimContext:
    """What a policy may look at when choosing step-j actions (its history)."""

    step: int
    signs: np.ndarray   # (n_paths, step) of +/-1 observed so far
    paths: np.ndarray   # (n_paths, step+1, state_dim) states so far
    n_steps: int
    model: ControlledModel


def _monomial_powers(n_vars: int, degree: int) -> np.ndarray:
    """Exponent rows of all monomials with total degree <= degree."""
    rows = [np.zeros(n_vars, dtype=int)]
    frontier = [np.zeros(n_vars, dtype=int)]
    for _ in range(degree):
        nxt = []
        seen = set()
        for p in frontier:
            start = int(np.nonzero(p)[0][-1]) if p.any() else 0
            for v in range(start, n_vars):
                q = p.copy()
                q[v] += 1
                key = tuple(q)
                if key not in seen:
                    seen.add(key)
                    nxt.append(q)
        rows.extend(nxt)
        frontier = nxt
    return np.array(rows, dtype=int)


def _expand(feats: np.ndarray, powers: np.ndarray) -> np.ndarray:
    return np.prod(feats[:, None, :] ** powers[None, :, :], axis=2)


@dataclass
class ValuePolicy:
    """Per-step value representation and argmax policy.

    Exact-tree engine: per-node tables keyed by the sign prefix; the terminal
    level stores the payoff on every node (boundary condition).  Regression
    engine: per-step, per-action coefficient vectors on standardized
    polynomial features.
    """

    engine: Engine
    v0: float
    grid: ActionGrid
    n_steps: int
    # exact tree
    node_values: Optional[list] = None    # j = 0..n: {sign prefix: value}
    node_actions: Optional[list] = None   # j = 0..n-1: {sign prefix: action index}
    # regression MC
    coefs: Optional[np.ndarray] = None          # (n_steps, n_actions, n_basis)
    feat_mean: Optional[np.ndarray] = None      # (n_steps, n_features)
    feat_std: Optional[np.ndarray] = None
    powers: Optional[np.ndarray] = None
    v0_stderr: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    # -- evaluation ----------------------------------------------------------

    def q_values(self, step: int, features: np.ndarray) -> np.ndarray:
        """Fitted Q(features, a) for every grid action, shape (n, n_actions)."""
        z = (features - self.feat_mean[step]) / self.feat_std[step]
        basis = _expand(z, self.powers)
        return basis @ self.coefs[step].T

    def action_indices(self, ctx: SimContext) -> np.ndarray:
        j = ctx.step
        if self.engine is Engine.EXACT_TREE:
            table = self.node_actions[j]
            keys = ctx.signs[:, :j].astype(int)
            return np.array([table[tuple(row)] for row in keys])
        feats = ctx.model.feature_batch(ctx.paths, j, self.n_steps)
        return np.argmax(self.q_values(j, feats), axis=1)

    def actions_for(self, ctx: SimContext) -> np.ndarray:
        return self.grid.points[self.action_indices(ctx)]

    def as_step_control(self) -> StepControl:
        """Tree policy as an adapted step control (history-node lookup)."""
        if self.engine is not Engine.EXACT_TREE:
            raise UnsupportedModeError("only tree policies convert to step controls")

        def make_entry(j: int):
            def entry(history: tuple) -> np.ndarray:
                idx = self.node_actions[j][tuple(int(s) for s in history[:j])]
                return self.grid.points[idx]
            return entry

        return StepControl(tuple(make_entry(j) for j in range(self.n_steps)))


@dataclass
class FixedActionPolicy:
    """Constant action at every step (benchmark control)."""

    action: np.ndarray

    def __post_init__(self) -> None:
        self.action = np.atleast_1d(np.asarray(self.action, dtype=float))

    def actions_for(self, ctx: SimContext) -> np.ndarray:
        return np.broadcast_to(self.action, (ctx.paths.shape[0], self.action.shape[0]))


@dataclass
class RandomAdaptedPolicy:
    """Random but adapted control: a fixed random function of (step, sign sum).

    The per-step lookup tables are drawn once from the seed, so the action at
    step j is a deterministic function of the history node (adapted), while
    varying across steps and nodes (a nontrivial benchmark).
    """

    seed: int
    n_steps: int
    cube_halfwidth: float = 1.0

    def __post_init__(self) -> None:
        rng = substream(self.seed, 999_983)
        self.tables = [
            self.cube_halfwidth * rng.uniform(-1.0, 1.0, size=j + 1)
            for j in range(self.n_steps)
        ]

    def actions_for(self, ctx: SimContext) -> np.ndarray:
        j = ctx.step
        ups = ((ctx.signs[:, :j] > 0).sum(axis=1) if j else
               np.zeros(ctx.paths.shape[0], dtype=int))
        return self.tables[j][ups][:, None]


# ---------------------------------------------------------------------------
# Exact tree engine
# ---------------------------------------------------------------------------


def _check_tree_instance(skeleton: SkeletonParams, n_steps: int, n_actions: int,
                         max_work: int) -> None:
    if skeleton.timing_mode is not TimingMode.DETERMINISTIC_STEP_COUNT:
        raise UnsupportedModeError("exact tree requires DeterministicStepCount timing")
    if skeleton.d != 1:
        raise UnsupportedModeError("exact tree requires d=1 noise")
    if n_steps > 24:
        raise ResourceLimitError(f"{n_steps} steps exceed the 24-step tree limit")
    if (2 * n_actions) ** n_steps > max_work:
        raise ResourceLimitError(
            f"(2m)^n = {(2 * n_actions) ** n_steps} exceeds the work budget {max_work}")


def solve_exact_tree(model: ControlledModel, skeleton: SkeletonParams,
                     cfg: DPConfig, n_steps: Optional[int] = None) -> ValuePolicy:
    """Exact backward recursion on the sign tree.

    At every history node, value = max over grid actions of the equally
    weighted average of the children values, children states evolved with the
    chosen action and increments +/-eps over the deterministic waiting time
    eps^2 chi_d.  V(0) is the root value; the terminal level stores the payoff
    on every node.
    """
    if cfg.engine is not Engine.EXACT_TREE:
        raise InvalidParameterError("config engine must be EXACT_TREE")
    n = skeleton.n_steps if n_steps is None else n_steps
    actions = cfg.action_grid.points
    m = actions.shape[0]
    _check_tree_instance(skeleton, n, m, cfg.max_tree_work)
    eps = skeleton.epsilon
    dt = skeleton.mean_waiting_time

    def continuation(state, path, j):
        """Pure value of the node reached with ``state`` at depth j."""
        if j == n:
            return model.payoff(np.asarray(path))
        best = -math.inf
        for a in actions:
            up = model.evolve(state, a, +eps, dt, j, np.asarray(path))
            dn = model.evolve(state, a, -eps, dt, j, np.asarray(path))
            v = 0.5 * (continuation(up, path + [up], j + 1)
                       + continuation(dn, path + [dn], j + 1))
            if v > best:
                best = v
        return best

    node_values = [dict() for _ in range(n + 1)]
    node_actions = [dict() for _ in range(n)]

    def fill(state, path, prefix, j):
        """Walk the sign tree along policy-induced states, storing tables."""
        if j == n:
            node_values[n][prefix] = model.payoff(np.asarray(path))
            return node_values[n][prefix]
        best_v, best_i, best_children = -math.inf, -1, None
        for i, a in enumerate(actions):
            up = model.evolve(state, a, +eps, dt, j, np.asarray(path))
            dn = model.evolve(state, a, -eps, dt, j, np.asarray(path))
            v = 0.5 * (continuation(up, path + [up], j + 1)
                       + continuation(dn, path + [dn], j + 1))
            if v > best_v:
                best_v, best_i, best_children = v, i, (up, dn)
        node_values[j][prefix] = best_v
        node_actions[j][prefix] = best_i
        up, dn = best_children
        fill(up, path + [up], prefix + (1,), j + 1)
        fill(dn, path + [dn], prefix + (-1,), j + 1)
        return best_v

    v0 = fill(model.initial_state, [model.initial_state], (), 0)
    return ValuePolicy(Engine.EXACT_TREE, float(v0), cfg.action_grid, n,
                       node_values=node_values, node_actions=node_actions)


# ---------------------------------------------------------------------------
# Regression Monte Carlo engine
# ---------------------------------------------------------------------------


def _simulate_forward(model, skeleton, n, n_paths, seed, action_picker):
    """Simulate signs, waiting times and controlled states forward."""
    signs, waits = sample_sign_wait_batch(skeleton, n, n_paths, seed)
    eps = skeleton.epsilon
    dA = eps * signs
    dT = waits if waits is not None else np.full((n_paths, n), skeleton.mean_waiting_time)
    paths = np.empty((n_paths, n + 1, model.state_dim))
    paths[:, 0] = model.initial_state
    for j in range(n):
        acts = action_picker(j, signs, paths)
        paths[:, j + 1] = model.evolve_batch(paths[:, j], acts, dA[:, j], dT[:, j], j, paths)
    return signs, dA, dT, paths


def _fit_ls(basis: np.ndarray, y: np.ndarray, ridge_scale: float,
            cond_threshold: float, diag: dict) -> np.ndarray:
    beta, _, rank, sv = np.linalg.lstsq(basis, y, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    diag["max_condition"] = max(diag.get("max_condition", 0.0), cond)
    if rank == basis.shape[1] and cond <= cond_threshold:
        return beta
    diag["ridge_fallbacks"] = diag.get("ridge_fallbacks", 0) + 1
    if diag["ridge_fallbacks"] == 1:
        warnings.warn(
            f"regression ill-conditioned (cond={cond:.3g}); using ridge fallback",
            RuntimeWarning, stacklevel=3)
    gram = basis.T @ basis
    lam = ridge_scale * np.trace(gram) / basis.shape[1]
    return np.linalg.solve(gram + lam * np.eye(basis.shape[1]), basis.T @ y)


def solve_regression_mc(model: ControlledModel, skeleton: SkeletonParams,
                        cfg: DPConfig, n_steps: Optional[int] = None) -> ValuePolicy:
    """Regression Monte Carlo with control randomization.

    Forward pass draws exploration actions uniformly from the grid.  Backward,
    for each step j and grid action a, the path's step-j action is replaced by
    a, the state re-evolved one step, and the path then replayed to the
    horizon along its realized increments under the already-fitted downstream
    policy; the realized payoffs are regressed on polynomial features of the
    unmodified step-j history.  Value = max over actions of the fit; V(0) is
    the path average of the step-0 value.
    """
    if cfg.engine is not Engine.REGRESSION_MC:
        raise InvalidParameterError("config engine must be REGRESSION_MC")
    if skeleton.d != 1:
        raise UnsupportedModeError("regression engine requires d=1 noise")
    n = skeleton.n_steps if n_steps is None else n_steps
    actions = cfg.action_grid.points
    m = actions.shape[0]
    powers = _monomial_powers(model.n_features, cfg.basis_degree)
    n_basis = powers.shape[0]
    if cfg.n_paths < 10 * n_basis:
        raise InvalidParameterError(
            f"n_paths = {cfg.n_paths} below 10 x {n_basis} basis functions")

    expl = substream(cfg.seed, _EXPLORATION_STREAM)
    expl_idx = expl.integers(0, m, size=(cfg.n_paths, n))
    signs, dA, dT, paths = _simulate_forward(
        model, skeleton, n, cfg.n_paths, cfg.seed,
        lambda j, s, p: actions[expl_idx[:, j]])

    policy = ValuePolicy(
        Engine.REGRESSION_MC, math.nan, cfg.action_grid, n,
        coefs=np.zeros((n, m, n_basis)),
        feat_mean=np.zeros((n, model.n_features)),
        feat_std=np.ones((n, model.n_features)),
        powers=powers)
    diag: dict = {}

    def replay_payoffs_all_actions(j: int) -> np.ndarray:
        """Re-evolve step j once per grid action (stacked into one batch),
        then follow the stored increments under the fitted downstream
        policy.  Returns (n_actions, n_paths) realized payoffs."""
        replay = np.repeat(paths[None], m, axis=0).reshape(m * cfg.n_paths, n + 1, -1)
        act_j = np.repeat(np.arange(m), cfg.n_paths)
        dA_t = np.tile(dA, (m, 1))
        dT_t = np.tile(dT, (m, 1))
        replay[:, j + 1] = model.evolve_batch(
            replay[:, j], actions[act_j], dA_t[:, j], dT_t[:, j], j, replay)
        for l in range(j + 1, n):
            feats = model.feature_batch(replay, l, n)
            idx = np.argmax(policy.q_values(l, feats), axis=1)
            replay[:, l + 1] = model.evolve_batch(
                replay[:, l], actions[idx], dA_t[:, l], dT_t[:, l], l, replay)
        return model.payoff_batch(replay).reshape(m, cfg.n_paths)

    last_targets = None
    for j in range(n - 1, -1, -1):
        feats = model.feature_batch(paths, j, n)
        mu, sd = feats.mean(axis=0), feats.std(axis=0)
        sd = np.where(sd < 1e-12, 1.0, sd)
        policy.feat_mean[j], policy.feat_std[j] = mu, sd
        basis = _expand((feats - mu) / sd, powers)
        targets = replay_payoffs_all_actions(j)
        for a in range(m):
            policy.coefs[j, a] = _fit_ls(basis, targets[a], cfg.ridge_scale,
                                         cfg.cond_threshold, diag)
        if j == 0:
            last_targets = targets

    feats0 = model.feature_batch(paths, 0, n)
    q0 = policy.q_values(0, feats0)
    best0 = np.argmax(q0, axis=1)
    policy.v0 = float(np.max(q0, axis=1).mean())
    # dispersion of the chosen action's realized targets, as the V(0) error bar
    chosen = last_targets[best0, np.arange(cfg.n_paths)]
    policy.v0_stderr = float(chosen.std(ddof=1) / math.sqrt(cfg.n_paths))
    policy.diagnostics = diag
    return policy


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def brute_force_value(model: ControlledModel, skeleton: SkeletonParams,
                      grid: ActionGrid, n_steps: Optional[int] = None,
                      max_enumeration: int = 400_000) -> float:
    """Definitional value: max over every adapted grid control of E[payoff].

    A control assigns one grid action to each history node (2^n - 1 nodes);
    the expectation sums the 2^n equally likely sign paths.  Independent of
    the backward recursion by construction.
    """
    n = skeleton.n_steps if n_steps is None else n_steps
    if skeleton.timing_mode is not TimingMode.DETERMINISTIC_STEP_COUNT:
        raise UnsupportedModeError("brute force requires DeterministicStepCount timing")
    if skeleton.d != 1:
        raise UnsupportedModeError("brute force requires d=1 noise")
    if n < 1 or n > 4:
        raise InvalidParameterError(f"brute force supports 1 <= n_steps <= 4, got {n}")
    actions = grid.points
    m = actions.shape[0]
    n_nodes = 2 ** n - 1
    n_assign = m ** n_nodes
    if n_assign > max_enumeration or (2 ** n) * m ** n > max_enumeration:
        raise ResourceLimitError(f"{n_assign} control assignments exceed the budget")
    eps = skeleton.epsilon
    dt = skeleton.mean_waiting_time

    def node_id(bits: tuple) -> int:
        j = len(bits)
        return (2 ** j - 1) + sum(b << (j - 1 - i) for i, b in enumerate(bits))

    # payoff of each sign path under each per-step action combo
    sign_paths = [tuple((i >> (n - 1 - j)) & 1 for j in range(n)) for i in range(2 ** n)]
    xi = np.empty((2 ** n, m ** n))
    for p, bits in enumerate(sign_paths):
        for combo in range(m ** n):
            idxs = [(combo // m ** (n - 1 - j)) % m for j in range(n)]
            path = [model.initial_state]
            state = model.initial_state
            for j in range(n):
                dAj = eps if bits[j] else -eps
                state = model.evolve(state, actions[idxs[j]], dAj, dt, j, np.asarray(path))
                path.append(state)
            xi[p, combo] = model.payoff(np.asarray(path))

    codes = np.arange(n_assign, dtype=np.int64)
    digits = {i: (codes // m ** i) % m for i in range(n_nodes)}
    total = np.zeros(n_assign)
    for p, bits in enumerate(sign_paths):
        combo_idx = np.zeros(n_assign, dtype=np.int64)
        for j in range(n):
            combo_idx += digits[node_id(bits[:j])] * m ** (n - 1 - j)
        total += xi[p, combo_idx]
    return float(total.max() / 2 ** n)


# ---------------------------------------------------------------------------
# Policy evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyEvaluation:
    mean: float
    stderr: float
    n_paths: int


def simulate_with_policy(model: ControlledModel, skeleton: SkeletonParams, policy,
                         n_paths: int, seed: int, n_steps: Optional[int] = None):
    """Forward-simulate ``n_paths`` controlled paths under a policy.

    Returns (signs, dA, dT, paths); ``paths`` has shape
    (n_paths, n_steps + 1, state_dim).
    """
    n = skeleton.n_steps if n_steps is None else n_steps

    def picker(j, signs, paths):
        ctx = SimContext(j, signs[:, :j], paths[:, : j + 1], n, model)
        return policy.actions_for(ctx)

    return _simulate_forward(model, skeleton, n, n_paths, seed, picker)


def evaluate_policy(model: ControlledModel, skeleton: SkeletonParams, policy,
                    n_paths: int, seed: int, n_steps: Optional[int] = None) -> PolicyEvaluation:
    """Fresh forward simulation applying the stored policy.

    Returns the Monte Carlo mean of the payoff under the policy with its
    standard error.  Any object with ``actions_for(ctx)`` works as a policy.
    """
    _, _, _, paths = simulate_with_policy(model, skeleton, policy, n_paths, seed, n_steps)
    payoffs = model.payoff_batch(paths)
    return PolicyEvaluation(float(payoffs.mean()),
                            float(payoffs.std(ddof=1) / math.sqrt(n_paths)), n_paths)
