"""Controlled state models driven by skeleton increments.

A model maps (state, action, increment, waiting time) to the next state and
scores a discrete path of states with a terminal payoff functional.  The key
structural property is non-anticipativity: the state after step n depends on
the control only through its first n actions.  Payoffs follow the
maximization convention throughout (the dynamic-programming engines take a
supremum), so cost functionals enter with a minus sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidParameterError, ModelBreakdownError

__all__ = [
    "ControlledModel",
    "GBMWealthModel",
    "EulerSkeletonModel",
    "PayoffKind",
    "PayoffSpec",
    "evolve_gbm_step",
    "quadratic_hedging_payoff",
    "euler_skeleton_step",
    "path_feature",
]


def quadratic_hedging_payoff(x: float, y: float, strike: float, premium: float) -> float:
    """Squared hedging shortfall (premium + wealth - call payoff)^2."""
    return (premium + x - max(y - strike, 0.0)) ** 2


def evolve_gbm_step(state, action, dA: float, dT: float, sigma: float, mu: float = 0.0):
    """One skeleton step of the controlled Black-Scholes pair (price, wealth).

    S' = S (1 + mu dT + sigma dA); X' = X + phi (S' - S).  Requires
    sigma * |dA| < 1 so the price stays positive when mu = 0.
    """
    s, x = float(state[0]), float(state[1])
    phi = float(np.atleast_1d(action)[0])
    s_next = s * (1.0 + mu * dT + sigma * dA)
    if s_next <= 0.0:
        raise ModelBreakdownError(f"price became nonpositive: {s_next}")
    return np.array([s_next, x + phi * (s_next - s)])


def euler_skeleton_step(alpha, sigma, t: float, prefix, action, dA, dT):
    """First-order Euler step for dX = alpha dt + sigma dA on the skeleton.

    ``prefix`` is the path of states so far (the coefficients may look at the
    whole history); the current state is its last entry.
    """
    x = np.atleast_1d(np.asarray(prefix[-1], dtype=float))
    a = np.asarray(alpha(t, prefix, action), dtype=float)
    s = np.asarray(sigma(t, prefix, action), dtype=float)
    dA = np.atleast_1d(np.asarray(dA, dtype=float))
    nxt = x + a * dT + (s * dA if s.ndim <= 1 else s @ dA)
    if not np.all(np.isfinite(nxt)):
        raise ModelBreakdownError(f"non-finite state after Euler step: {nxt}")
    return nxt


def path_feature(states, step: int, n_total: int) -> np.ndarray:
    """Regression covariates of a path prefix: (S, X, running max S, step/n).

    ``states`` is the (step+1, state_dim) prefix with coordinate 0 the price
    and coordinate 1 the wealth (wealth taken as 0 for 1-d models).  The value
    depends only on the prefix, so features are adapted.
    """
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        raise InvalidParameterError("path_feature needs a nonempty prefix")
    s = states[step, 0]
    x = states[step, 1] if states.shape[1] > 1 else 0.0
    running_max = states[: step + 1, 0].max()
    frac = step / n_total if n_total > 0 else 0.0
    return np.array([s, x, running_max, frac])


class PayoffKind(Enum):
    QUADRATIC_HEDGING = "quadratic_hedging"
    PATH_DEPENDENT = "path_dependent"


@dataclass(frozen=True)
class PayoffSpec:
    """Terminal payoff functional on the discrete path.

    QUADRATIC_HEDGING scores -(premium + X_T - (S_T - K)^+)^2 (maximization of
    a negative cost).  PATH_DEPENDENT applies ``terminal_functional`` to
    (terminal state, running max of the price coordinate); the functional is
    expected bounded and Lipschitz in the running max.  ``holder_gamma`` is
    the continuity exponent of the functional, recorded as metadata only.
    """

    kind: PayoffKind = PayoffKind.QUADRATIC_HEDGING
    premium: float = 0.0
    holder_gamma: float = 1.0
    terminal_functional: Optional[Callable[[np.ndarray, float], float]] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.holder_gamma <= 1.0:
            raise InvalidParameterError(f"holder_gamma must be in (0, 1], got {self.holder_gamma}")
        if self.kind is PayoffKind.PATH_DEPENDENT and self.terminal_functional is None:
            raise InvalidParameterError("path-dependent payoff needs a terminal_functional")


class ControlledModel:
    """Interface the dynamic-programming engines drive.

    Subclasses define scalar ``evolve``/``payoff``/``feature_map``; the
    ``*_batch`` methods have generic per-path fallbacks and may be overridden
    with vectorized versions.
    """

    state_dim: int = 1
    initial_state: np.ndarray

    def evolve(self, state, action, dA, dT, step: int = 0, prefix=None) -> np.ndarray:
        raise NotImplementedError

    def payoff(self, states) -> float:
        raise NotImplementedError

    def feature_map(self, states, step: int, n_total: int) -> np.ndarray:
        return path_feature(states, step, n_total)

    @property
    def n_features(self) -> int:
        return 4

    # -- vectorized fallbacks ------------------------------------------------

    def evolve_batch(self, states, actions, dA, dT, step: int = 0, prefixes=None) -> np.ndarray:
        n = states.shape[0]
        out = np.empty_like(states)
        dA = np.broadcast_to(np.asarray(dA, dtype=float), (n,))
        dT = np.broadcast_to(np.asarray(dT, dtype=float), (n,))
        actions = np.asarray(actions, dtype=float)
        if actions.ndim == 1:
            actions = actions[:, None]
        for i in range(n):
            pref = None if prefixes is None else prefixes[i, : step + 1]
            out[i] = self.evolve(states[i], actions[i], dA[i], dT[i], step, pref)
        return out

    def payoff_batch(self, paths) -> np.ndarray:
        return np.array([self.payoff(p) for p in paths])

    def feature_batch(self, paths, step: int, n_total: int) -> np.ndarray:
        return np.stack([self.feature_map(p[: step + 1], step, n_total) for p in paths])


@dataclass
class GBMWealthModel(ControlledModel):
    """Skeleton Black-Scholes price with a self-financing controlled wealth.

    State (S, X): price and accumulated trading gains; the action is the
    holding over the coming step.  ``sigma * eps_max`` must stay below 1 so
    the price cannot cross zero.
    """

    s0: float = 49.0
    sigma: float = 0.2
    mu: float = 0.0
    strike: float = 55.0
    payoff_spec: PayoffSpec = field(default_factory=PayoffSpec)
    state_dim: int = 2

    def __post_init__(self) -> None:
        if self.s0 <= 0 or self.sigma <= 0 or self.strike <= 0:
            raise InvalidParameterError("s0, sigma and strike must be positive")
        self.initial_state = np.array([self.s0, 0.0])

    def require_stable(self, epsilon: float) -> None:
        if self.sigma * epsilon >= 1.0:
            raise InvalidParameterError(
                f"sigma * epsilon = {self.sigma * epsilon} >= 1: price may hit zero")

    def evolve(self, state, action, dA, dT, step: int = 0, prefix=None) -> np.ndarray:
        return evolve_gbm_step(state, action, dA, dT, self.sigma, self.mu)

    def evolve_batch(self, states, actions, dA, dT, step: int = 0, prefixes=None) -> np.ndarray:
        s = states[:, 0]
        s_next = s * (1.0 + self.mu * np.asarray(dT) + self.sigma * np.asarray(dA))
        if np.any(s_next <= 0.0):
            raise ModelBreakdownError("price became nonpositive on some path")
        phi = np.asarray(actions, dtype=float)
        if phi.ndim == 2:
            phi = phi[:, 0]
        return np.column_stack([s_next, states[:, 1] + phi * (s_next - s)])

    def payoff(self, states) -> float:
        states = np.asarray(states, dtype=float)
        s_T, x_T = states[-1, 0], states[-1, 1]
        if self.payoff_spec.kind is PayoffKind.QUADRATIC_HEDGING:
            return -quadratic_hedging_payoff(x_T, s_T, self.strike, self.payoff_spec.premium)
        return float(self.payoff_spec.terminal_functional(states[-1], states[:, 0].max()))

    def payoff_batch(self, paths) -> np.ndarray:
        paths = np.asarray(paths, dtype=float)
        s_T, x_T = paths[:, -1, 0], paths[:, -1, 1]
        if self.payoff_spec.kind is PayoffKind.QUADRATIC_HEDGING:
            h = np.maximum(s_T - self.strike, 0.0)
            return -((self.payoff_spec.premium + x_T - h) ** 2)
        runmax = paths[:, :, 0].max(axis=1)
        f = self.payoff_spec.terminal_functional
        return np.array([f(paths[i, -1], runmax[i]) for i in range(paths.shape[0])])

    def feature_batch(self, paths, step: int, n_total: int) -> np.ndarray:
        paths = np.asarray(paths, dtype=float)
        frac = step / n_total if n_total > 0 else 0.0
        return np.column_stack([
            paths[:, step, 0],
            paths[:, step, 1],
            paths[:, : step + 1, 0].max(axis=1),
            np.full(paths.shape[0], frac),
        ])


@dataclass
class EulerSkeletonModel(ControlledModel):
    """Generic Euler-on-skeleton driver for a functional SDE.

    ``alpha(t, prefix, u)`` and ``sigma(t, prefix, u)`` may depend on the whole
    stored path prefix (non-Markovian dependence); ``payoff_fn`` scores the
    full discrete path.
    """

    alpha: Callable = lambda t, prefix, u: 0.0
    sigma: Callable = lambda t, prefix, u: 1.0
    x0: float = 0.0
    payoff_fn: Callable = lambda states: float(np.asarray(states)[-1, 0])
    state_dim: int = 1

    def __post_init__(self) -> None:
        self.initial_state = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.state_dim = self.initial_state.shape[0]

    def evolve(self, state, action, dA, dT, step: int = 0, prefix=None) -> np.ndarray:
        if prefix is None:
            prefix = np.asarray(state, dtype=float)[None, :]
        t = step * dT if np.isscalar(dT) else 0.0
        return euler_skeleton_step(self.alpha, self.sigma, t, prefix, action, dA, dT)

    def payoff(self, states) -> float:
        return float(self.payoff_fn(np.asarray(states, dtype=float)))
