"""Finite-difference semi-discretization of the controlled 1-D heat equation
``y_t = sigma y_xx + y0(x) u(t)`` on ``[0, 1]`` with homogeneous Dirichlet data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import LinearQuadraticProblem

PROFILES = {
    "parabola": lambda x: x * (1.0 - x),
    "sin": lambda x: np.sin(np.pi * x),
    "indicator": lambda x: ((x >= 0.25) & (x <= 0.75)).astype(float),
}


@dataclass
class HeatModel:
    grid_points: int
    sigma: float
    profile: str
    x: np.ndarray
    A: np.ndarray
    B: np.ndarray  # (d, 1), equals y0

    @property
    def h(self) -> float:
        return 1.0 / (self.grid_points + 1)

    @property
    def y0(self) -> np.ndarray:
        return self.B[:, 0].copy()

    def l2_weight(self) -> np.ndarray:
        """Matrix of the discrete ``L^2(0, 1)`` inner product."""
        return self.h * np.eye(self.grid_points)

    def problem(self, control_box=((-1.0, 0.0),), *, state_weight=1.0, control_weight=0.5,
                terminal_weight=0.5, t0=0.0, T=1.0, lam=0.0) -> LinearQuadraticProblem:
        """``L = state_weight ||y||^2 + control_weight u^2``, ``g = terminal_weight ||y||^2``."""
        W = self.l2_weight()
        return LinearQuadraticProblem(
            self.A, self.B, state_weight * W, [[control_weight]], terminal_weight * W,
            control_box, t0=t0, T=T, lam=lam, stiff=True,
        )


def laplacian_1d(n: int, sigma: float) -> np.ndarray:
    h = 1.0 / (n + 1)
    c = sigma / h**2
    return c * (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))


def assemble_heat(grid_points: int = 1000, sigma: float = 0.15, y0_spec: str = "parabola") -> HeatModel:
    if grid_points < 2:
        raise ValueError("need at least 2 interior grid points")
    if y0_spec not in PROFILES:
        raise ValueError(f"unknown profile {y0_spec!r}; choose from {sorted(PROFILES)}")
    x = np.arange(1, grid_points + 1) / (grid_points + 1)
    y0 = PROFILES[y0_spec](x)
    return HeatModel(grid_points, sigma, y0_spec, x, laplacian_1d(grid_points, sigma), y0[:, None])
