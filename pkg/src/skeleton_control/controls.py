"""Action space and adapted step controls.

Actions live in the compact cube A = {x in R^r : max_i |x_i| <= a}.  A step
control assigns one action per skeleton step; each entry is either a constant
point of A or a function of the history node (the tuple of skeleton signs
observed so far), which makes predictability hold by construction.  The
concatenation / restriction / splicing algebra mirrors the control classes the
dynamic-programming recursion optimizes over.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import InvalidCompositionError, InvalidParameterError

ActionEntry = Union[np.ndarray, float, Callable[[tuple], np.ndarray]]


@dataclass(frozen=True)
class ActionCube:
    """Cube of admissible actions with half-width ``a`` in dimension ``r``."""

    r: int = 1
    a: float = 1.0

    def __post_init__(self) -> None:
        if self.r < 1:
            raise InvalidParameterError(f"action dimension must be >= 1, got {self.r}")
        if self.a <= 0:
            raise InvalidParameterError(f"cube half-width must be positive, got {self.a}")

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return x.shape == (self.r,) and bool(np.max(np.abs(x)) <= self.a)

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), -self.a, self.a)


def grid_points(cube: ActionCube, m: int) -> np.ndarray:
    """Uniform lattice of m^r points covering the cube, corners included.

    m odd puts the center 0 on the grid.  Shape (m**r, r), lexicographic order
    (first axis slowest), so index 0 is the corner (-a, ..., -a).
    """
    if m < 2:
        raise InvalidParameterError(f"points_per_axis must be >= 2, got {m}")
    axis = np.linspace(-cube.a, cube.a, m)
    if m % 2 == 1:
        axis[m // 2] = 0.0  # exact center
    mesh = np.meshgrid(*([axis] * cube.r), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class ActionGrid:
    """Finite search grid over the cube (exhaustive-search discretization)."""

    cube: ActionCube
    points_per_axis: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pts = grid_points(self.cube, self.points_per_axis)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_actions(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class StepControl:
    """Adapted control over skeleton steps [start_index, end_index).

    ``actions[i]`` is the action applied on the interval (T_j, T_{j+1}] with
    j = start_index + i; a callable entry receives the sign history of length
    j and must return a point of the action cube.
    """

    actions: tuple
    start_index: int = 0

    @property
    def end_index(self) -> int:
        return self.start_index + len(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def action_at(self, j: int, history: tuple = ()) -> np.ndarray:
        """Resolve the action for step j given the sign history up to j."""
        if not self.start_index <= j < self.end_index:
            raise InvalidParameterError(
                f"step {j} outside control domain [{self.start_index}, {self.end_index})")
        entry = self.actions[j - self.start_index]
        if callable(entry):
            entry = entry(tuple(history[:j]))
        return np.atleast_1d(np.asarray(entry, dtype=float))


def constant_control(values: Sequence, start_index: int = 0) -> StepControl:
    """Control from a plain sequence of action values."""
    return StepControl(tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in values),
                       start_index)


def concat(u: StepControl, v: StepControl) -> StepControl:
    """u ⊗ v: follow u on its domain, then v on its domain."""
    if u.end_index != v.start_index:
        raise InvalidCompositionError(
            f"cannot concatenate: u ends at {u.end_index}, v starts at {v.start_index}")
    return StepControl(u.actions + v.actions, u.start_index)


def restrict(u: StepControl, p: int) -> StepControl:
    """Prefix of u up to step p (exclusive)."""
    if p > u.end_index:
        raise InvalidParameterError(
            f"cannot restrict to {p}: control ends at {u.end_index}")
    if p < u.start_index:
        raise InvalidParameterError(
            f"cannot restrict to {p}: control starts at {u.start_index}")
    return StepControl(u.actions[: p - u.start_index], u.start_index)


def tail(u: StepControl, p: int) -> StepControl:
    """Complementary suffix of u from step p on."""
    if not u.start_index <= p <= u.end_index:
        raise InvalidParameterError(f"split point {p} outside [{u.start_index}, {u.end_index}]")
    return StepControl(u.actions[p - u.start_index:], p)


def splice(u: StepControl, v: StepControl, event: Callable[[tuple], bool]) -> StepControl:
    """Finite composition u·1_K + v·1_{K^c} for an event K on the starting node.

    ``event`` sees the sign history of length start_index only, so the spliced
    control stays adapted: the branch choice is measurable at the start of the
    control's domain.
    """
    if (u.start_index, u.end_index) != (v.start_index, v.end_index):
        raise InvalidCompositionError("splice requires controls on the same step range")
    start = u.start_index

    def make_entry(i: int):
        def entry(history: tuple) -> np.ndarray:
            branch = u if event(tuple(history[:start])) else v
            return branch.action_at(start + i, history)
        return entry

    return StepControl(tuple(make_entry(i) for i in range(len(u))), start)


def check_adapted(control: StepControl, cube: ActionCube, histories, atol: float = 0.0) -> bool:
    """Verify adaptedness and cube membership on a collection of sign histories.

    For every step j, the action must agree on any two histories sharing the
    same length-j prefix, and must lie in the cube.  Raises on violation.
    """
    for j in range(control.start_index, control.end_index):
        seen: dict[tuple, np.ndarray] = {}
        for h in histories:
            h = tuple(h)
            if len(h) < j:
                continue
            a = control.action_at(j, h)
            if not cube.contains(a):
                raise InvalidParameterError(f"action {a} at step {j} outside the cube")
            key = h[:j]
            if key in seen:
                if not np.allclose(seen[key], a, atol=atol, rtol=0.0):
                    raise InvalidParameterError(
                        f"action at step {j} differs on histories sharing prefix {key}")
            else:
                seen[key] = a
    return True
