"""Control problems, their discretization by explicit Euler, and discrete costs.

All callables work on batched arrays: states have shape ``(..., d)``, controls
``(..., m)``; dynamics return ``(..., d)`` and costs return ``(...)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ControlProblem:
    """Finite-horizon problem ``min int_t0^T L e^{-lam(s-t0)} ds + g(y(T)) e^{-lam(T-t0)}``.

    Parameters
    ----------
    dim : int
        State dimension ``d``.
    f : callable
        Vector field ``f(x, u, t)``.
    running_cost : callable
        ``L(x, u, t)``.
    terminal_cost : callable
        ``g(x)``.
    control_box : array_like, shape (m, 2)
        Lower/upper bound per control component.
    t0, T : float
        Horizon, ``T > t0``.
    lam : float
        Discount rate, ``lam >= 0``.
    control_cost : (gamma, delta), optional
        Set when ``L(x, u, t) = l(x, t) + gamma |u|^2 + delta u`` with scalar ``u``.
    autonomous : bool
        Whether ``f`` ignores ``t``.
    """

    def __init__(
        self,
        dim: int,
        f: Callable,
        running_cost: Callable,
        terminal_cost: Callable,
        control_box,
        *,
        t0: float = 0.0,
        T: float = 1.0,
        lam: float = 0.0,
        control_cost: tuple[float, float] | None = None,
        autonomous: bool = False,
    ):
        box = np.atleast_2d(np.asarray(control_box, dtype=float))
        if box.shape[1] != 2:
            raise ValueError("control_box must have shape (m, 2)")
        if np.any(box[:, 0] > box[:, 1]):
            raise ValueError("control_box has lower > upper")
        if not T > t0:
            raise ValueError("need T > t0")
        if lam < 0:
            raise ValueError("discount rate must be >= 0")
        if dim < 1:
            raise ValueError("state dimension must be positive")
        self.dim = int(dim)
        self.f = f
        self.running_cost = running_cost
        self.terminal_cost = terminal_cost
        self.control_box = box
        self.t0 = float(t0)
        self.T = float(T)
        self.lam = float(lam)
        self.control_cost = control_cost
        self.autonomous = autonomous

    @property
    def control_dim(self) -> int:
        return self.control_box.shape[0]

    def discount(self, dt: float) -> float:
        """Per-step discount multiplier ``exp(-lam dt)``."""
        return math.exp(-self.lam * dt)

    def step(self, x, u, t, dt):
        """Discrete one-step map used by trees and trajectories."""
        return euler_step(self, x, u, t, dt)

    def clip(self, u):
        return np.clip(u, self.control_box[:, 0], self.control_box[:, 1])


def _quadratic_form(x, M):
    return np.einsum("...i,ij,...j->...", x, M, x)


class LinearQuadraticProblem(ControlProblem):
    """``f = A x + B u``, ``L = x'Qx + u'Ru + delta.u``, ``g = x'QT x``.

    With ``stiff=True`` every step of size ``dt`` is taken as several explicit
    Euler sub-steps, enough to keep ``|1 + (dt/s) eig(A)| < 1``; the composed
    map is precomputed as ``x -> Phi x + Gamma u`` so the cost per step does
    not depend on the number of sub-steps.
    """

    def __init__(self, A, B, Q, R, QT, control_box, *, t0=0.0, T=1.0, lam=0.0,
                 delta=None, stiff=False):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        d = self.A.shape[0]
        self.B = np.asarray(B, dtype=float).reshape(d, -1)
        m = self.B.shape[1]
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.QT = np.atleast_2d(np.asarray(QT, dtype=float))
        self.delta = np.zeros(m) if delta is None else np.asarray(delta, dtype=float).reshape(m)
        if self.A.shape != (d, d) or self.Q.shape != (d, d) or self.QT.shape != (d, d):
            raise ValueError("A, Q, QT must be d x d")
        if self.R.shape != (m, m):
            raise ValueError("R must be m x m")
        self.stiff = stiff
        self._maps: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._max_substep: float | None = None
        control_cost = (float(self.R[0, 0]), float(self.delta[0])) if m == 1 else None
        super().__init__(
            d, self._f, self._running_cost, self._terminal_cost, control_box,
            t0=t0, T=T, lam=lam, control_cost=control_cost, autonomous=True,
        )

    def _f(self, x, u, t):
        return x @ self.A.T + u @ self.B.T

    def _running_cost(self, x, u, t):
        return _quadratic_form(x, self.Q) + _quadratic_form(u, self.R) + u @ self.delta

    def _terminal_cost(self, x):
        return _quadratic_form(x, self.QT)

    def substeps(self, dt: float) -> int:
        if not self.stiff:
            return 1
        if self._max_substep is None:
            if np.allclose(self.A, self.A.T):
                eig = np.linalg.eigvalsh(self.A).astype(complex)
            else:
                eig = np.linalg.eigvals(self.A)
            decaying = eig[eig.real < 0]
            if decaying.size == 0:
                self._max_substep = math.inf
            else:
                self._max_substep = 0.95 * float(np.min(-2 * decaying.real / np.abs(decaying) ** 2))
        return max(1, math.ceil(dt / self._max_substep))

    def discrete_map(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """``(Phi, Gamma)`` of the sub-stepped Euler map for step ``dt``."""
        if dt not in self._maps:
            s = self.substeps(dt)
            h = dt / s
            E = np.eye(self.dim) + h * self.A
            c = h * self.B
            # binary powering of (E, sum_{k<s} E^k c)
            P_acc, S_acc = np.eye(self.dim), np.zeros_like(c)
            P_pow, S_pow = E, c
            while s:
                if s & 1:
                    S_acc = S_acc + P_acc @ S_pow
                    P_acc = P_acc @ P_pow
                s >>= 1
                if s:
                    S_pow = S_pow + P_pow @ S_pow
                    P_pow = P_pow @ P_pow
            self._maps[dt] = (P_acc, S_acc)
        return self._maps[dt]

    def step(self, x, u, t, dt):
        if self.substeps(dt) == 1:
            return euler_step(self, x, u, t, dt)
        Phi, Gamma = self.discrete_map(dt)
        return np.asarray(x) @ Phi.T + np.asarray(u) @ Gamma.T


class PolynomialProblem(ControlProblem):
    """Componentwise polynomial drift with linear control input and quadratic costs.

    ``f_i(x, u) = sum_k coeffs[i][k] x_i^k + (B u)_i``.
    """

    def __init__(self, coeffs, B, Q, R, QT, control_box, *, t0=0.0, T=1.0, lam=0.0, delta=None):
        rows = [list(map(float, c)) for c in coeffs]
        d = len(rows)
        width = max(len(r) for r in rows)
        self.coeffs = np.array([r + [0.0] * (width - len(r)) for r in rows])
        self.B = np.asarray(B, dtype=float).reshape(d, -1)
        m = self.B.shape[1]
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.QT = np.atleast_2d(np.asarray(QT, dtype=float))
        self.delta = np.zeros(m) if delta is None else np.asarray(delta, dtype=float).reshape(m)
        control_cost = (float(self.R[0, 0]), float(self.delta[0])) if m == 1 else None
        super().__init__(
            d, self._f, self._running_cost, self._terminal_cost, control_box,
            t0=t0, T=T, lam=lam, control_cost=control_cost, autonomous=True,
        )

    def _f(self, x, u, t):
        x = np.asarray(x)
        out = np.zeros(x.shape)
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * x + self.coeffs[:, k]
        return out + u @ self.B.T

    def _running_cost(self, x, u, t):
        return _quadratic_form(x, self.Q) + _quadratic_form(u, self.R) + u @ self.delta

    def _terminal_cost(self, x):
        return _quadratic_form(x, self.QT)


@dataclass(frozen=True)
class ControlGrid:
    """Tensor-product grid of discrete controls.

    ``axes[k]`` holds the strictly increasing values of control component ``k``;
    ``points`` enumerates the product with the last component varying fastest.
    """

    axes: tuple[np.ndarray, ...]
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        axes = tuple(np.atleast_1d(np.asarray(a, dtype=float)) for a in self.axes)
        for a in axes:
            if a.ndim != 1 or a.size == 0:
                raise ValueError("each control axis needs at least one value")
            if np.any(np.diff(a) <= 0):
                raise ValueError("control values must be strictly increasing")
        object.__setattr__(self, "axes", axes)
        pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, box, counts: int | Sequence[int]) -> "ControlGrid":
        box = np.atleast_2d(np.asarray(box, dtype=float))
        if np.isscalar(counts):
            counts = [int(counts)] * box.shape[0]
        axes = []
        for (lo, hi), M in zip(box, counts):
            axes.append(np.array([lo]) if M == 1 else np.linspace(lo, hi, M))
        return cls(tuple(axes))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def check_inside(self, box) -> None:
        box = np.atleast_2d(np.asarray(box, dtype=float))
        if len(self.axes) != box.shape[0]:
            raise ValueError("control grid dimension does not match control box")
        for a, (lo, hi) in zip(self.axes, box):
            if a[0] < lo or a[-1] > hi:
                raise ValueError("control grid leaves the admissible box")

    def union(self, other: "ControlGrid") -> "ControlGrid":
        return ControlGrid(tuple(np.union1d(a, b) for a, b in zip(self.axes, other.axes)))


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("need at least one time step")

    @classmethod
    def from_dt(cls, t0: float, T: float, dt: float) -> "TimeGrid":
        n = round((T - t0) / dt)
        if n < 1 or abs(n * dt - (T - t0)) > 1e-12 * max(1.0, abs(T - t0)):
            raise ValueError(f"dt={dt} does not divide the horizon [{t0}, {T}]")
        return cls(float(t0), float(dt), int(n))

    @property
    def T(self) -> float:
        return self.t0 + self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def time(self, n: int) -> float:
        return self.t0 + n * self.dt


def euler_step(problem: ControlProblem, x, u, t, dt):
    """One explicit Euler step ``x + dt f(x, u, t)``."""
    return x + dt * problem.f(x, u, t)


def stage_cost(problem: ControlProblem, x, u, t, dt):
    """Undiscounted stage contribution ``dt L(x, u, t)``."""
    return dt * problem.running_cost(x, u, t)


def evaluate_trajectory_cost(states, controls, tgrid: TimeGrid, problem: ControlProblem) -> float:
    """Discrete cost of a state/control sequence.

    Accumulated backward as ``J <- dt L_k + exp(-lam dt) J`` starting from
    ``g(y_n)``, the same arithmetic as the tree sweep.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls.reshape(len(controls), -1) if len(controls) else controls.reshape(0, 1)
    if len(states) != len(controls) + 1:
        raise ValueError("states must have exactly one more entry than controls")
    disc = problem.discount(tgrid.dt)
    J = float(problem.terminal_cost(states[-1]))
    for k in range(len(controls) - 1, -1, -1):
        J = float(stage_cost(problem, states[k], controls[k], tgrid.time(k), tgrid.dt)) + disc * J
    return J


def simulate(problem: ControlProblem, x0, controls, tgrid: TimeGrid) -> np.ndarray:
    """States reached from ``x0`` under a control sequence."""
    controls = np.asarray(controls, dtype=float).reshape(len(controls), -1)
    states = [np.asarray(x0, dtype=float)]
    for k, u in enumerate(controls):
        states.append(problem.step(states[-1], u, tgrid.time(k), tgrid.dt))
    return np.array(states)
