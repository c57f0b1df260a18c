"""Action cube, grids, and the step-control algebra."""
import numpy as np
import pytest

from skeleton_control.controls import (ActionCube, ActionGrid, StepControl,
                                       check_adapted, concat, constant_control,
                                       grid_points, restrict, splice, tail)
from skeleton_control.exceptions import (InvalidCompositionError,
                                         InvalidParameterError)


def test_grid_examples():
    cube = ActionCube(1, 1.0)
    assert grid_points(cube, 3).ravel().tolist() == [-1.0, 0.0, 1.0]
    assert grid_points(cube, 2).ravel().tolist() == [-1.0, 1.0]
    pts = grid_points(ActionCube(2, 1.0), 2)
    assert pts.shape == (4, 2)
    assert sorted(map(tuple, pts.tolist())) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_grid_membership_exact():
    for r, a, m in [(1, 1.0, 7), (2, 0.3, 4), (3, 2.5, 3)]:
        cube = ActionCube(r, a)
        for p in grid_points(cube, m):
            assert cube.contains(p)


def test_grid_rejects_small_m():
    with pytest.raises(InvalidParameterError):
        grid_points(ActionCube(1, 1.0), 1)


def test_action_grid_carries_points():
    g = ActionGrid(ActionCube(1, 1.0), 5)
    assert g.n_actions == 5
    assert g.points[0, 0] == -1.0 and g.points[-1, 0] == 1.0


def test_cube_validation():
    with pytest.raises(InvalidParameterError):
        ActionCube(0, 1.0)
    with pytest.raises(InvalidParameterError):
        ActionCube(1, 0.0)


# ---------------------------------------------------------------------------
# concat / restrict
# ---------------------------------------------------------------------------


def test_concat_example():
    u = constant_control([1.0])
    v = constant_control([2.0, 3.0], start_index=1)
    w = concat(u, v)
    assert [w.action_at(j)[0] for j in range(3)] == [1.0, 2.0, 3.0]


def test_concat_restrict_roundtrip():
    w = constant_control([0.1, -0.2, 0.3, 0.4])
    again = concat(restrict(w, 2), tail(w, 2))
    assert [again.action_at(j)[0] for j in range(4)] == \
        [w.action_at(j)[0] for j in range(4)]


def test_concat_empty_tail():
    u = constant_control([1.0, 2.0])
    v = StepControl((), start_index=2)
    assert concat(u, v).actions == u.actions


def test_concat_index_mismatch():
    u = constant_control([1.0])
    v = constant_control([2.0], start_index=5)
    with pytest.raises(InvalidCompositionError):
        concat(u, v)


def test_restrict_examples():
    u = constant_control([1.0, 2.0, 3.0])
    assert len(restrict(u, 2)) == 2
    assert len(restrict(u, 3)) == 3
    assert len(restrict(u, 0)) == 0
    with pytest.raises(InvalidParameterError):
        restrict(u, 4)


def test_algebra_randomized():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        ell = int(rng.integers(0, n + 1))
        vals = rng.uniform(-1, 1, size=n)
        u = constant_control(vals[:ell])
        v = constant_control(vals[ell:], start_index=ell)
        w = concat(u, v)
        assert len(w) == n
        r = restrict(w, ell)
        assert all(r.action_at(j)[0] == u.action_at(j)[0] for j in range(ell))
        # associativity where defined
        p = int(rng.integers(ell, n + 1))
        mid = StepControl(w.actions[ell:p], ell)
        end = StepControl(w.actions[p:], p)
        left = concat(concat(u, mid), end)
        right = concat(u, concat(mid, end))
        assert left.actions == right.actions and left.start_index == right.start_index


# ---------------------------------------------------------------------------
# adaptedness and splicing
# ---------------------------------------------------------------------------


def _random_histories(rng, n, count):
    return [tuple(rng.choice([-1, 1], size=n)) for _ in range(count)]


def test_splice_is_adapted():
    rng = np.random.default_rng(11)
    cube = ActionCube(1, 1.0)
    n = 4
    u = constant_control(rng.uniform(-1, 1, size=n))
    v = constant_control(rng.uniform(-1, 1, size=n))
    spliced = splice(u, v, lambda h: True)   # event on the (empty) start node
    hist = _random_histories(rng, n, 40)
    assert check_adapted(spliced, cube, hist)
    # event on a length-2 node: splice controls defined from step 2 on
    u2 = StepControl(u.actions[2:], 2)
    v2 = StepControl(v.actions[2:], 2)
    spliced2 = splice(u2, v2, lambda h: sum(h) > 0)
    assert check_adapted(spliced2, cube, hist)
    # the branch actually depends on the event
    up = spliced2.action_at(2, (1, 1, 1, 1))
    dn = spliced2.action_at(2, (-1, -1, 1, 1))
    assert up[0] == u2.action_at(2, (1, 1))[0]
    assert dn[0] == v2.action_at(2, (-1, -1))[0]


def test_check_adapted_flags_violation():
    cube = ActionCube(1, 1.0)
    seen = {"n": 0}

    def stateful(history):
        # returns different actions for identical prefixes: not a function
        # of the history node
        seen["n"] += 1
        return np.array([0.1 * seen["n"]])

    control = StepControl((np.zeros(1), stateful))
    with pytest.raises(InvalidParameterError):
        check_adapted(control, cube, [(1, 1), (1, -1)])


def test_cube_membership_enforced_by_checker():
    cube = ActionCube(1, 0.5)
    control = constant_control([0.9])
    with pytest.raises(InvalidParameterError):
        check_adapted(control, cube, [(1,), (-1,)])
