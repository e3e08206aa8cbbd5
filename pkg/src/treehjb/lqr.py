"""Finite-horizon LQR reference via the differential Riccati equation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid
from .errors import DivergenceError

BLOWUP_NORM = 1e12


@dataclass
class LqrProblem:
    """Minimize ``int x'Qx + u'Ru e^{-lam s} ds + x(T)'QT x(T)`` subject to ``x' = Ax + Bu``."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    QT: np.ndarray
    t0: float = 0.0
    T: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(d, -1)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.QT = np.atleast_2d(np.asarray(self.QT, dtype=float))
        for name in ("Q", "QT", "R"):
            M = getattr(self, name)
            if not np.allclose(M, M.T, atol=1e-12, rtol=0):
                raise ValueError(f"{name} must be symmetric")
        self.R_inv = np.linalg.inv(self.R)

    @classmethod
    def from_problem(cls, problem) -> "LqrProblem":
        """Riccati data of a :class:`~treehjb.dynamics.LinearQuadraticProblem`."""
        if np.any(problem.delta != 0):
            raise ValueError("linear control cost has no pure Riccati representation")
        return cls(problem.A, problem.B, problem.Q, problem.R, problem.QT,
                   problem.t0, problem.T, problem.lam)

    def gain(self, P):
        return self.R_inv @ self.B.T @ P

    def riccati_rhs(self, P):
        """``-dP/dt``."""
        PB = P @ self.B
        return self.A.T @ P + P @ self.A - PB @ self.R_inv @ PB.T + self.Q - self.lam * P


@dataclass
class RiccatiSolution:
    times: np.ndarray
    P: np.ndarray  # shape (N+1, d, d)

    def at(self, n: int) -> np.ndarray:
        return self.P[n]


def solve_riccati(problem: LqrProblem, tgrid: TimeGrid, substeps: int = 10) -> RiccatiSolution:
    """Integrate the Riccati equation backward from ``P(T) = QT`` with RK4,
    ``substeps`` sub-intervals per grid step."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    N = tgrid.n_steps
    h = tgrid.dt / substeps
    P = problem.QT.copy()
    out = np.empty((N + 1,) + P.shape)
    out[N] = P
    G = problem.riccati_rhs
    for n in range(N - 1, -1, -1):
        for _ in range(substeps):
            k1 = G(P)
            k2 = G(P + 0.5 * h * k1)
            k3 = G(P + 0.5 * h * k2)
            k4 = G(P + h * k3)
            P = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            P = 0.5 * (P + P.T)
            if not np.all(np.isfinite(P)) or np.linalg.norm(P) > BLOWUP_NORM:
                raise DivergenceError(f"Riccati solution diverged near t={tgrid.time(n):.4g}")
        out[n] = P
    return RiccatiSolution(tgrid.times, out)


def lqr_value(P, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ P @ x)


def lqr_closed_loop(problem: LqrProblem, solution: RiccatiSolution, x0, tgrid: TimeGrid, control_box,
                    step=None):
    """Euler closed loop under the clamped Riccati feedback ``u = -R^{-1}B'P x``.

    ``step(y, u, t, dt)`` replaces the plain Euler update when given (e.g. the
    sub-stepped map of a stiff model).  Returns ``(states, controls)`` with
    shapes ``(N+1, d)`` and ``(N, m)``.
    """
    box = np.atleast_2d(np.asarray(control_box, dtype=float))
    if len(solution.P) != tgrid.n_steps + 1:
        raise ValueError("Riccati solution does not cover the time grid")
    y = np.asarray(x0, dtype=float).reshape(-1)
    states = [y]
    controls = []
    for n in range(tgrid.n_steps):
        u = np.clip(-problem.gain(solution.P[n]) @ y, box[:, 0], box[:, 1])
        if step is None:
            y = y + tgrid.dt * (problem.A @ y + problem.B @ u)
        else:
            y = np.asarray(step(y, u, tgrid.time(n), tgrid.dt), dtype=float)
        states.append(y)
        controls.append(u)
    return np.array(states), np.array(controls)


def values_along(solution: RiccatiSolution, states) -> np.ndarray:
    """``x_n' P(t_n) x_n`` along a trajectory."""
    states = np.asarray(states, dtype=float)
    return np.einsum("ni,nij,nj->n", states, solution.P, states)
