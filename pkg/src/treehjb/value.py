"""Backward dynamic-programming sweep on a tree and the tree-greedy trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlProblem, evaluate_trajectory_cost, stage_cost
from .tree import Tree


@dataclass
class ValueTable:
    """``values[n][i]`` is the discrete value at node ``i`` of level ``n``;
    ``policy[n][i]`` the index of the minimizing control (levels ``0..N-1``)."""

    values: list[np.ndarray]
    policy: list[np.ndarray]

    @property
    def root_value(self) -> float:
        return float(self.values[0][0])


def level_q_values(tree: Tree, values_next: np.ndarray, problem: ControlProblem, n: int) -> np.ndarray:
    """``dt L(x_i, u_j, t_n) + exp(-lam dt) V^{n+1}(child_ij)`` for every node/control pair."""
    X = tree.levels[n]
    U = tree.grid.points
    K, M = len(X), len(U)
    ch = tree.children[n]
    if ch.shape != (K, M):
        raise ValueError(f"level {n} does not carry {M} outgoing edges per node")
    stage = stage_cost(problem, np.repeat(X, M, axis=0), np.tile(U, (K, 1)),
                       tree.tgrid.time(n), tree.tgrid.dt).reshape(K, M)
    return stage + problem.discount(tree.tgrid.dt) * values_next[ch]


def backward_sweep(tree: Tree, problem: ControlProblem) -> ValueTable:
    N = tree.tgrid.n_steps
    if len(tree.children) != N:
        raise ValueError("tree is not fully built")
    values = [None] * (N + 1)
    policy = [None] * N
    values[N] = np.asarray(problem.terminal_cost(tree.levels[N]), dtype=float).reshape(-1)
    for n in range(N - 1, -1, -1):
        q = level_q_values(tree, values[n + 1], problem, n)
        # argmin returns the first minimum: ties go to the smallest control index
        j = np.argmin(q, axis=1)
        policy[n] = j
        values[n] = q[np.arange(len(j)), j]
    return ValueTable(values, policy)


@dataclass
class TreeTrajectory:
    states: np.ndarray
    controls: np.ndarray
    cost: float
    node_ids: np.ndarray
    values: np.ndarray  # table value at each followed node


def extract_tree_trajectory(tree: Tree, table: ValueTable, problem: ControlProblem) -> TreeTrajectory:
    """Follow argmin edges from the root.

    States are replayed through the discrete dynamics from the current state,
    so on pruned trees they may drift from the merged node coordinates by the
    pruning tolerance.
    """
    N = tree.tgrid.n_steps
    U = tree.grid.points
    node = 0
    states = [tree.levels[0][0].copy()]
    controls = []
    ids = [0]
    vals = [table.values[0][0]]
    for n in range(N):
        j = table.policy[n][node]
        u = U[j]
        controls.append(u)
        states.append(problem.step(states[-1], u, tree.tgrid.time(n), tree.tgrid.dt))
        node = tree.children[n][node, j]
        ids.append(node)
        vals.append(table.values[n + 1][node])
    states = np.array(states)
    controls = np.array(controls)
    cost = evaluate_trajectory_cost(states, controls, tree.tgrid, problem)
    return TreeTrajectory(states, controls, cost, np.array(ids), np.array(vals))
