import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import enumerate_min
from problems import scalar_lq
from treehjb import (ControlGrid, ControlProblem, LinearQuadraticProblem, PolynomialProblem, TimeGrid,
                     backward_sweep, build_tree, euler_step, evaluate_trajectory_cost, simulate, stage_cost)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def make(f=None, L=None, g=None, dim=1, box=((-1.0, 1.0),), lam=0.0):
    f = f or (lambda x, u, t: np.zeros_like(x))
    L = L or (lambda x, u, t: np.zeros(np.shape(x)[:-1]))
    g = g or (lambda x: np.zeros(np.shape(x)[:-1]))
    return ControlProblem(dim, f, L, g, box, lam=lam)


class TestEulerStep:
    def test_zero_field_is_identity(self):
        p = make(dim=3)
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(euler_step(p, x, np.array([0.3]), 0.0, 0.1), x)

    def test_linear_in_control(self):
        p = make(f=lambda x, u, t: u)
        assert euler_step(p, np.array([0.0]), np.array([1.0]), 0.0, 0.1)[0] == 0.1

    def test_nilpotent_matrix(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        p = make(f=lambda x, u, t: x @ A.T, dim=2)
        np.testing.assert_array_equal(euler_step(p, np.array([1.0, 0.0]), np.array([0.0]), 0.0, 0.5), [1.0, 0.0])

    @given(st.floats(0, 1), finite, finite, finite)
    def test_affine_in_control(self, s, x, u1, u2):
        p = scalar_lq(a=0.7, b=-1.3, box=(-10, 10))
        x = np.array([x])
        lhs = euler_step(p, x, np.array([(1 - s) * u1 + s * u2]), 0.0, 0.1)
        rhs = (1 - s) * euler_step(p, x, np.array([u1]), 0.0, 0.1) + s * euler_step(p, x, np.array([u2]), 0.0, 0.1)
        assert abs(lhs[0] - rhs[0]) <= 1e-14 * (1 + abs(x[0]) + abs(u1) + abs(u2))


class TestStageCost:
    def test_zero_cost(self):
        assert stage_cost(make(), np.array([3.0]), np.array([1.0]), 0.0, 0.1) == 0.0

    def test_value(self):
        p = make(L=lambda x, u, t: x[..., 0] ** 2 + u[..., 0] ** 2)
        assert stage_cost(p, np.array([1.0]), np.array([2.0]), 0.0, 0.1) == pytest.approx(0.5, abs=1e-15)

    def test_discount_without_rate(self):
        assert make().discount(0.1) == 1.0
        assert make(lam=0.5).discount(0.2) == pytest.approx(math.exp(-0.1))


class TestTrajectoryCost:
    def test_terminal_only(self):
        p = make(g=lambda x: np.full(np.shape(x)[:-1], 5.0))
        tg = TimeGrid.from_dt(0, 1, 0.25)
        states = np.zeros((5, 1))
        assert evaluate_trajectory_cost(states, np.zeros((4, 1)), tg, p) == 5.0

    def test_single_step(self):
        p = make(L=lambda x, u, t: np.ones(np.shape(x)[:-1]))
        tg = TimeGrid.from_dt(0, 0.25, 0.25)
        assert evaluate_trajectory_cost(np.zeros((2, 1)), np.zeros((1, 1)), tg, p) == 0.25

    def test_length_mismatch(self):
        tg = TimeGrid.from_dt(0, 1, 0.5)
        with pytest.raises(ValueError):
            evaluate_trajectory_cost(np.zeros((2, 1)), np.zeros((2, 1)), tg, make())

    def test_root_value_matches_enumeration(self):
        p = scalar_lq(a=0.5, b=1.0, q=1.0, r=0.5, qT=1.0)
        grid = ControlGrid.uniform(p.control_box, 3)
        tg = TimeGrid.from_dt(0, 1, 0.2)
        tree = build_tree(p, grid, tg, [0.8], 0.0)
        best = enumerate_min(p, grid.points, tg.dt, tg.n_steps, [0.8])
        assert abs(backward_sweep(tree, p).root_value - best) <= 1e-12

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=8), finite, st.floats(0, 2))
    def test_telescoping(self, us, x0, lam):
        p = scalar_lq(a=-0.4, b=1.0, q=1.0, r=0.3, qT=2.0, lam=lam, T=1.0)
        tg = TimeGrid(0.0, 1.0 / len(us), len(us))
        controls = np.array(us)[:, None]
        states = simulate(p, [x0], controls, tg)
        nested = float(p.terminal_cost(states[-1]))
        for k in range(len(us) - 1, -1, -1):
            nested = float(stage_cost(p, states[k], controls[k], tg.time(k), tg.dt)) + p.discount(tg.dt) * nested
        assert evaluate_trajectory_cost(states, controls, tg, p) == nested
        # explicit discount powers agree up to rounding
        explicit = sum(math.exp(-lam * k * tg.dt) * float(stage_cost(p, states[k], controls[k], 0, tg.dt))
                       for k in range(len(us)))
        explicit += math.exp(-lam * len(us) * tg.dt) * float(p.terminal_cost(states[-1]))
        assert nested == pytest.approx(explicit, rel=1e-12, abs=1e-12)


class TestGrids:
    def test_uniform_and_tensor_order(self):
        g = ControlGrid.uniform([[-1, 1], [0, 1]], [3, 2])
        assert g.size == 6
        np.testing.assert_array_equal(g.points[:3], [[-1, 0], [-1, 1], [0, 0]])

    def test_single_point(self):
        np.testing.assert_array_equal(ControlGrid.uniform([[-1, 0]], 1).points, [[-1.0]])

    def test_rejects_unsorted_and_duplicates(self):
        with pytest.raises(ValueError):
            ControlGrid(([0.0, 0.0],))
        with pytest.raises(ValueError):
            ControlGrid(([1.0, 0.0],))

    def test_inside_box(self):
        with pytest.raises(ValueError):
            ControlGrid(([-2.0, 0.0],)).check_inside([[-1, 0]])
        ControlGrid(([-1.0, 0.0],)).check_inside([[-1, 0]])

    def test_union(self):
        u = ControlGrid(([0.0, 1.0],)).union(ControlGrid(([0.5, 1.0],)))
        np.testing.assert_array_equal(u.axes[0], [0, 0.5, 1])

    def test_time_grid(self):
        tg = TimeGrid.from_dt(0, 1, 0.1)
        assert tg.n_steps == 10 and tg.T == pytest.approx(1.0)
        np.testing.assert_allclose(tg.times, np.linspace(0, 1, 11), atol=1e-15)
        with pytest.raises(ValueError):
            TimeGrid.from_dt(0, 1, 0.3)
        with pytest.raises(ValueError):
            TimeGrid(0, -0.1, 3)


class TestProblems:
    def test_invalid(self):
        with pytest.raises(ValueError):
            make(box=((1.0, 0.0),))
        with pytest.raises(ValueError):
            make(lam=-1)
        with pytest.raises(ValueError):
            ControlProblem(1, None, None, None, [[0, 1]], t0=1.0, T=1.0)

    def test_linear_quadratic_costs(self):
        p = LinearQuadraticProblem([[1.0, 0], [0, 2]], [[1.0], [0]], np.eye(2), [[3.0]], 2 * np.eye(2),
                                   [[-1, 1]], delta=[0.5])
        x, u = np.array([1.0, 2.0]), np.array([2.0])
        np.testing.assert_allclose(p.f(x, u, 0), [3.0, 4.0])
        assert p.running_cost(x, u, 0) == pytest.approx(5 + 12 + 1)
        assert p.terminal_cost(x) == pytest.approx(10)
        assert p.control_cost == (3.0, 0.5)

    def test_polynomial_drift(self):
        p = PolynomialProblem([[1.0, 0.0, -1.0], [0.0, 2.0]], [[1.0], [1.0]], np.eye(2), [[1.0]],
                              np.eye(2), [[-1, 1]])
        x, u = np.array([2.0, 3.0]), np.array([0.5])
        np.testing.assert_allclose(p.f(x, u, 0), [1 - 4 + 0.5, 6 + 0.5])

    def test_substepped_map_equals_repeated_euler(self):
        rng = np.random.default_rng(3)
        S = rng.standard_normal((4, 4))
        A = -(S @ S.T) * 50
        p = LinearQuadraticProblem(A, rng.standard_normal((4, 1)), np.eye(4), [[1.0]], np.eye(4),
                                   [[-1, 1]], stiff=True)
        dt = 0.1
        s = p.substeps(dt)
        assert s > 1
        x, u = rng.standard_normal(4), np.array([0.3])
        y = x.copy()
        for _ in range(s):
            y = y + (dt / s) * (A @ y + p.B @ u)
        np.testing.assert_allclose(p.step(x, u, 0, dt), y, rtol=1e-10, atol=1e-12)
        eig = np.linalg.eigvalsh(A)
        assert np.all(np.abs(1 + dt / s * eig) < 1)

    def test_nonstiff_step_is_euler(self):
        p = scalar_lq(a=-2.0)
        assert p.substeps(0.1) == 1
        np.testing.assert_array_equal(p.step(np.array([1.0]), np.array([0.5]), 0, 0.1),
                                      euler_step(p, np.array([1.0]), np.array([0.5]), 0, 0.1))
