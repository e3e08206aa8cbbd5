"""Closed-loop feedback reconstruction from tree values.

Two synthesis rules are provided: minimization by comparison over a (finer)
control set, and a quadratic fit through the three children of a control
affine system.  Both read the value function off the tree through scattered
interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlGrid, ControlProblem, TimeGrid, evaluate_trajectory_cost, stage_cost
from .interp import ScatteredInterpolant, fit_quadratic, minimize_quadratic_stage
from .tree import Tree
from .value import ValueTable


@dataclass
class SynthesisResult:
    states: np.ndarray  # (N+1, d)
    controls: np.ndarray  # (N, m)
    cost: float
    values: np.ndarray  # interpolated V(states[n], t_n)

    @property
    def running_cost(self) -> float:
        return self.cost


class TreeValueField:
    """Interpolants of ``V^n`` built lazily, one per level.

    With ``use_subtree`` the dataset for level ``n`` is the union of levels
    ``0..n``; a point present on several levels keeps its value from the
    highest one.
    """

    def __init__(self, tree: Tree, table: ValueTable, use_subtree: bool = False):
        self.tree = tree
        self.table = table
        self.use_subtree = use_subtree
        self._cache: dict[int, ScatteredInterpolant] = {}

    def level(self, n: int) -> ScatteredInterpolant:
        if n not in self._cache:
            if self.use_subtree:
                pts = np.concatenate(self.tree.levels[n::-1])
                vals = np.concatenate(self.table.values[n::-1])
                self._cache[n] = ScatteredInterpolant(pts, vals, on_duplicate="first")
            else:
                self._cache[n] = ScatteredInterpolant(self.tree.levels[n], self.table.values[n])
        return self._cache[n]

    def __call__(self, n: int, x):
        return self.level(n)(x)

    def at(self, n: int, state) -> float:
        """Interpolated ``V^n`` at one state."""
        return float(self.level(n)(np.reshape(state, (1, -1)))[0])


def refine_grid(coarse: ControlGrid, count: int) -> ControlGrid:
    """Uniform grid with ``count`` points per axis over the coarse range, merged
    with the coarse points so that the fine set contains the coarse one."""
    axes = []
    for a in coarse.axes:
        fine = np.linspace(a[0], a[-1], count) if count > 1 else a[:1]
        axes.append(np.union1d(fine, a))
    return ControlGrid(tuple(axes))


def _check_subtree(problem: ControlProblem, use_subtree: bool) -> None:
    if use_subtree and not problem.autonomous:
        raise ValueError("sub-tree interpolation requires autonomous dynamics")


def synthesize_comparison(tree: Tree, table: ValueTable, problem: ControlProblem,
                          fine_grid: ControlGrid, x=None, use_subtree: bool = False) -> SynthesisResult:
    """Closed loop choosing, at each step, the best control of ``fine_grid``
    against the interpolated continuation value."""
    _check_subtree(problem, use_subtree)
    field = TreeValueField(tree, table, use_subtree)
    tg = tree.tgrid
    U = fine_grid.points
    disc = problem.discount(tg.dt)
    state = tree.levels[0][0].copy() if x is None else np.asarray(x, dtype=float).reshape(-1)
    states, controls, values = [state], [], [field.at(0, state)]
    for n in range(tg.n_steps):
        t = tg.time(n)
        X = np.broadcast_to(state, (len(U), state.size))
        cand = problem.step(X, U, t, tg.dt)
        q = stage_cost(problem, X, U, t, tg.dt) + disc * field(n + 1, cand)
        u = U[int(np.argmin(q))]
        state = problem.step(state, u, t, tg.dt)
        states.append(state)
        controls.append(u)
        values.append(field.at(n + 1, state))
    states, controls = np.array(states), np.array(controls)
    cost = evaluate_trajectory_cost(states, controls, tg, problem)
    return SynthesisResult(states, controls, cost, np.array(values, dtype=float))


def synthesize_quadratic(tree: Tree, table: ValueTable, problem: ControlProblem,
                         x=None, use_subtree: bool = False) -> SynthesisResult:
    """Closed loop from a parabola fitted through the values of the three
    children; requires ``f`` affine in a scalar control and
    ``L = l(x, t) + gamma u^2 + delta u``."""
    U = tree.grid.points
    if U.shape != (3, 1):
        raise ValueError(f"quadratic reconstruction needs exactly 3 scalar controls, got {U.shape}")
    if problem.control_cost is None:
        raise ValueError("problem does not declare a (gamma, delta) control cost")
    _check_subtree(problem, use_subtree)
    gamma, delta = problem.control_cost
    field = TreeValueField(tree, table, use_subtree)
    tg = tree.tgrid
    disc = problem.discount(tg.dt)
    u_nodes = U[:, 0]
    state = tree.levels[0][0].copy() if x is None else np.asarray(x, dtype=float).reshape(-1)
    states, controls, values = [state], [], [field.at(0, state)]
    for n in range(tg.n_steps):
        t = tg.time(n)
        X = np.broadcast_to(state, (3, state.size))
        v = field(n + 1, problem.step(X, U, t, tg.dt))
        fit = fit_quadratic(u_nodes, v)
        ends = disc * v[[0, 2]] + stage_cost(problem, X[[0, 2]], U[[0, 2]], t, tg.dt)
        u = np.array([minimize_quadratic_stage(fit, gamma, delta, tg.dt,
                                               (u_nodes[0], u_nodes[2]), ends, disc)])
        state = problem.step(state, u, t, tg.dt)
        states.append(state)
        controls.append(u)
        values.append(field.at(n + 1, state))
    states, controls = np.array(states), np.array(controls)
    cost = evaluate_trajectory_cost(states, controls, tg, problem)
    return SynthesisResult(states, controls, cost, np.array(values, dtype=float))


def closed_loop_cost(result: SynthesisResult, problem: ControlProblem, tgrid: TimeGrid) -> float:
    return evaluate_trajectory_cost(result.states, result.controls, tgrid, problem)


def write_trajectory(path, times, states, controls, values=None) -> None:
    """One row per time step: ``t x_1 .. x_d u_1 .. u_m value``; the final row
    carries ``nan`` controls."""
    states = np.atleast_2d(states)
    controls = np.asarray(controls, dtype=float).reshape(len(states) - 1, -1)
    m = controls.shape[1]
    u = np.vstack([controls, np.full((1, m), np.nan)])
    v = np.full(len(states), np.nan) if values is None else np.asarray(values, dtype=float)
    data = np.column_stack([np.asarray(times, dtype=float), states, u, v])
    d = states.shape[1]
    header = " ".join(["t"] + [f"x{i}" for i in range(d)] + [f"u{i}" for i in range(m)] + ["value"])
    np.savetxt(path, data, fmt="%.17g", header=header)
