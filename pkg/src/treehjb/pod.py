"""Proper orthogonal decomposition of tree snapshots and reduced problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlProblem, LinearQuadraticProblem
from .errors import DegenerateInputError
from .tree import Tree


def snapshot_matrix(tree: Tree) -> np.ndarray:
    """All tree nodes as columns of a ``d x N`` matrix."""
    return np.concatenate(tree.levels).T


def compute_svd(Y) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and left singular vectors of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.size == 0:
        raise DegenerateInputError("snapshot matrix is empty")
    if not np.any(Y):
        raise DegenerateInputError("snapshot matrix is identically zero")
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    residual = np.linalg.norm(Y - (U * s) @ Vt)
    if residual > 1e-8 * np.linalg.norm(Y):
        raise ArithmeticError(f"SVD reconstruction residual {residual:.3e} too large")
    return s, U


def energy_ratio(singular_values, rank: int) -> float:
    """Fraction of squared singular values discarded when keeping ``rank`` modes."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    return float(s2[rank:].sum() / s2.sum())


def select_rank(singular_values, tau: float) -> int:
    """Smallest ``rank >= 1`` whose discarded energy ratio is ``<= tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    s2 = np.asarray(singular_values, dtype=float) ** 2
    total = s2.sum()
    if not total > 0:
        raise DegenerateInputError("all singular values vanish")
    # tail[k] = sum_{i >= k} s2[i]; accumulated from the small end so zeros stay exact
    tail = np.append(np.cumsum(s2[::-1])[::-1], 0.0)
    for rank in range(1, len(s2) + 1):
        if tail[rank] / total <= tau:
            return rank
    return len(s2)


@dataclass
class PodBasis:
    Psi: np.ndarray  # d x rank, orthonormal columns
    singular_values: np.ndarray
    tau: float

    @property
    def rank(self) -> int:
        return self.Psi.shape[1]

    @property
    def dim(self) -> int:
        return self.Psi.shape[0]

    def project(self, x):
        """Reduced coordinates ``Psi' x`` (rows are states)."""
        return np.asarray(x) @ self.Psi

    def lift(self, z):
        return np.asarray(z) @ self.Psi.T

    def energy(self, rank: int | None = None) -> float:
        return energy_ratio(self.singular_values, self.rank if rank is None else rank)

    def save(self, path) -> None:
        """Text file: header, a line of singular values, then one row of ``Psi`` per state component."""
        with open(path, "w") as fh:
            fh.write(f"# pod-basis dim={self.dim} rank={self.rank} tau={self.tau!r}\n")
            fh.write(" ".join(repr(float(s)) for s in self.singular_values) + "\n")
            np.savetxt(fh, self.Psi, fmt="%.17g")

    @classmethod
    def load(cls, path) -> "PodBasis":
        with open(path) as fh:
            header = fh.readline().split()
            meta = dict(tok.split("=", 1) for tok in header[2:])
            sv = np.array([float(t) for t in fh.readline().split()])
            Psi = np.loadtxt(fh, ndmin=2)
        if Psi.shape != (int(meta["dim"]), int(meta["rank"])):
            raise ValueError(f"basis file {path} has inconsistent shape {Psi.shape}")
        return cls(Psi, sv, float(meta["tau"]))


def pod_basis(Y, tau: float) -> PodBasis:
    s, U = compute_svd(Y)
    rank = select_rank(s, tau)
    return PodBasis(U[:, :rank].copy(), s, tau)


def reduce_problem(problem: ControlProblem, basis: PodBasis, x0):
    """Galerkin projection onto ``span(Psi)``.

    Returns the reduced problem and the reduced initial state ``Psi' x0``.
    """
    if basis.dim != problem.dim:
        raise ValueError(f"basis dimension {basis.dim} != problem dimension {problem.dim}")
    Psi = basis.Psi
    z0 = basis.project(np.asarray(x0, dtype=float).reshape(-1))
    kw = dict(t0=problem.t0, T=problem.T, lam=problem.lam)
    if isinstance(problem, LinearQuadraticProblem):
        reduced = LinearQuadraticProblem(
            Psi.T @ problem.A @ Psi, Psi.T @ problem.B, Psi.T @ problem.Q @ Psi,
            problem.R, Psi.T @ problem.QT @ Psi, problem.control_box,
            delta=problem.delta, stiff=problem.stiff, **kw,
        )
        return reduced, z0

    def f(z, u, t):
        return problem.f(basis.lift(z), u, t) @ Psi

    def L(z, u, t):
        return problem.running_cost(basis.lift(z), u, t)

    def g(z):
        return problem.terminal_cost(basis.lift(z))

    reduced = ControlProblem(basis.rank, f, L, g, problem.control_box,
                             control_cost=problem.control_cost,
                             autonomous=problem.autonomous, **kw)
    return reduced, z0
