import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinoaura.core import (
    ControlSpace, CostFunction, StateSpace, Topology, Trajectory, state_distance, step_errors, tracking_error,
    trajectory_cost, validate_trajectory,
)
from kinoaura.dynamics import DoubleIntegrator6D

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
angle = st.floats(-20, 20, allow_nan=False, allow_infinity=False)


def car_space(hw=0.5):
    return StateSpace((-10, -10, -math.pi), (10, 10, math.pi),
                      (Topology.REAL, Topology.REAL, Topology.ANGULAR), (1, 1, hw))


def brute_distance(space, a, b):
    # independent oracle: brute-force search over 2*pi shifts of angular coordinates
    total = 0.0
    for i in range(space.dims):
        d = a[i] - b[i]
        if space.angular[i]:
            d = min(abs(d + 2 * math.pi * k) for k in range(-6, 7))
        total += (space.weights[i] * d) ** 2
    return math.sqrt(total)


class TestStateSpace:
    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            StateSpace((0, 0), (1,))
        with pytest.raises(ValueError):
            StateSpace((1,), (0,))
        with pytest.raises(ValueError):
            StateSpace((0,), (1,), weights=(0.0,))
        with pytest.raises(ValueError):
            StateSpace((0, 0), (1, 1), (Topology.REAL,))

    def test_angular_bounds_forced(self):
        s = StateSpace((0.0,), (1.0,), (Topology.ANGULAR,))
        assert s.lower[0] == -math.pi and s.upper[0] == math.pi

    def test_normalize_range(self):
        s = car_space()
        x = s.normalize([0.0, 0.0, math.pi])
        assert x[2] == -math.pi
        assert s.normalize([1.0, 2.0, 7.0])[2] == pytest.approx(7.0 - 2 * math.pi)

    def test_contains_and_clamp(self):
        s = car_space()
        assert s.contains([0, 0, 0])
        assert not s.contains([11, 0, 0])
        c = s.clamp([11, -12, 4.0])
        assert c[0] == 10 and c[1] == -10 and -math.pi <= c[2] < math.pi

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            state_distance(car_space(), [0, 0], [0, 0, 0])

    def test_equality(self):
        assert car_space() == car_space()
        assert car_space(0.5) != car_space(0.7)


class TestDistanceExamples:
    def test_identity(self):
        s = car_space()
        x = np.array([1.5, -2.0, 0.3])
        assert state_distance(s, x, x) == 0.0

    def test_wrap_symmetry(self):
        s = StateSpace((0.0,), (1.0,), (Topology.ANGULAR,))
        b = s.normalize([2 * math.pi - 0.1])
        assert state_distance(s, [0.1], b) == pytest.approx(0.2, abs=1e-12)

    def test_pythagorean(self):
        s = StateSpace((-10, -10), (10, 10))
        assert state_distance(s, [0, 0], [3, 4]) == 5.0


@given(st.tuples(finite, finite, angle), st.tuples(finite, finite, angle),
       st.floats(0.1, 3.0))
def test_distance_matches_brute_force(a, b, hw):
    s = car_space(hw)
    assert state_distance(s, a, b) == pytest.approx(brute_distance(s, np.array(a), np.array(b)), abs=1e-9)


@given(st.tuples(finite, finite, angle), st.tuples(finite, finite, angle), st.tuples(finite, finite, angle))
def test_metric_axioms(a, b, c):
    s = car_space()
    dab, dba = state_distance(s, a, b), state_distance(s, b, a)
    assert dab >= 0.0
    assert dab == pytest.approx(dba, abs=1e-9)
    assert state_distance(s, a, c) <= dab + state_distance(s, b, c) + 1e-9


def test_distances_vectorized(rng):
    s = car_space()
    P = rng.uniform(-5, 5, (50, 3))
    q = rng.uniform(-5, 5, 3)
    expect = [state_distance(s, p, q) for p in P]
    np.testing.assert_allclose(s.distances(P, q), expect, rtol=0, atol=1e-12)


class TestControlSpace:
    def test_clamp_contains(self, rng):
        c = ControlSpace((-1, -2), (1, 2))
        assert c.contains([0.5, -2])
        assert not c.contains([1.5, 0])
        np.testing.assert_array_equal(c.clamp([3, -3]), [1, -2])
        for _ in range(20):
            assert c.contains(c.sample(rng))

    def test_invalid(self):
        with pytest.raises(ValueError):
            ControlSpace((1,), (0,))


class TestTrajectory:
    def test_length_invariant(self):
        with pytest.raises(ValueError):
            Trajectory(np.zeros((3, 2)), np.zeros((1, 1)), np.ones(2))
        with pytest.raises(ValueError):
            Trajectory(np.zeros((2, 2)), np.zeros((1, 1)), np.zeros(1))

    def test_single_and_suffix(self):
        t = Trajectory.single([1.0, 2.0], 3)
        assert t.num_steps == 0 and len(t) == 1 and t.controls.shape == (0, 3)
        tr = Trajectory([[0, 0], [1, 0], [3, 0]], [[1], [2]], [1, 1])
        assert tr.suffix(1) == Trajectory([[1, 0], [3, 0]], [[2]], [1])
        assert tr.suffix(2).num_steps == 0

    def test_concat(self):
        a = Trajectory([[0.0], [1.0]], [[1.0]], [1.0])
        b = Trajectory([[1.0], [3.0]], [[2.0]], [1.0])
        c = a.concat(b)
        assert c.num_steps == 2 and np.array_equal(c.states[:, 0], [0, 1, 3])
        with pytest.raises(ValueError):
            b.concat(a)

    def test_immutable(self):
        t = Trajectory([[0.0], [1.0]], [[1.0]], [1.0])
        with pytest.raises(ValueError):
            t.states[0, 0] = 5.0

    def test_validate(self):
        m = DoubleIntegrator6D()
        x0 = np.zeros(6)
        u = np.array([1.0, 0.0, 0.0])
        x1 = m.propagate(x0, u, 1.0)
        assert validate_trajectory(Trajectory([x0, x1], [u], [1.0]), m)
        assert not validate_trajectory(Trajectory([x0, x1 + 0.1], [u], [1.0]), m)


class TestCost:
    def test_single_state_is_zero(self):
        s = StateSpace((-1,), (1,))
        t = Trajectory.single([0.0], 1)
        for c in CostFunction:
            assert trajectory_cost(t, c, s) == 0.0

    def test_duration(self):
        s = StateSpace((-10,), (10,))
        t = Trajectory(np.arange(6.0)[:, None], np.zeros((5, 1)), np.ones(5))
        assert trajectory_cost(t, CostFunction.DURATION, s) == 5.0

    def test_path_length(self):
        s = StateSpace((-10, -10), (10, 10))
        t = Trajectory([[0, 0], [1, 0], [3, 0]], np.zeros((2, 1)), [1, 1])
        assert trajectory_cost(t, CostFunction.PATH_LENGTH, s) == 3.0

    def test_control_effort(self):
        s = StateSpace((-10,), (10,))
        t = Trajectory([[0.0], [1.0], [2.0]], [[2.0], [1.0]], [0.5, 2.0])
        assert trajectory_cost(t, CostFunction.CONTROL_EFFORT, s) == pytest.approx(4 * 0.5 + 1 * 2.0)

    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=12))
    def test_path_length_oracle(self, pts):
        s = StateSpace((-100, -100), (100, 100))
        P = np.array(pts, dtype=float)
        n = len(P) - 1
        t = Trajectory(P, np.zeros((n, 1)), np.ones(n))
        oracle = sum(math.hypot(*(P[i + 1] - P[i])) for i in range(n))
        assert trajectory_cost(t, CostFunction.PATH_LENGTH, s) == pytest.approx(oracle, abs=1e-9)
        assert trajectory_cost(t, CostFunction.PATH_LENGTH, s) >= 0.0


class TestTrackingError:
    def test_identity(self, rng):
        s = car_space()
        X = rng.uniform(-3, 3, (8, 3))
        assert tracking_error(X, X, s) == 0.0

    def test_constant_offset(self, rng):
        s = StateSpace((-100, -100), (100, 100))
        X = rng.uniform(-3, 3, (11, 2))
        d = np.array([0.6, 0.8]) * 0.5
        assert tracking_error(X, X + d, s) == pytest.approx(11 * 0.5, rel=1e-12)

    def test_random_pair_oracle(self, rng):
        s = car_space()
        A = s.normalize(rng.uniform(-3, 3, (11, 3)))
        B = s.normalize(rng.uniform(-3, 3, (11, 3)))
        oracle = sum(brute_distance(s, a, b) for a, b in zip(A, B))
        assert tracking_error(A, B, s) == pytest.approx(oracle, abs=1e-9)
        np.testing.assert_allclose(step_errors(A, B, s), [brute_distance(s, a, b) for a, b in zip(A, B)],
                                   atol=1e-9)

    def test_length_mismatch(self):
        s = car_space()
        with pytest.raises(ValueError):
            tracking_error(np.zeros((3, 3)), np.zeros((4, 3)), s)
