"""Scattered-data interpolation of tree values and the 1-D quadratic fit of
the quadratic feedback reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

COINCIDENT = 1e-14


def shepard(points, values, queries, power: int = 2) -> np.ndarray:
    """Inverse-distance weighting over all data points."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.empty(len(queries))
    chunk = max(1, 2_000_000 // max(1, len(points)))
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        hit = d2 < COINCIDENT ** 2
        with np.errstate(divide="ignore"):
            w = d2 ** (-power / 2)
        w[hit.any(axis=1)] = 0.0
        w[hit] = 1.0
        out[s:s + chunk] = (w @ values) / w.sum(axis=1)
    return out


class ScatteredInterpolant:
    """Piecewise-linear interpolation on a Delaunay triangulation with
    Shepard weighting outside the hull.

    Dimension 1 uses sorted breakpoints, dimensions 2 and 3 a Qhull
    triangulation; higher dimensions and degenerate point sets (collinear,
    too few points) use Shepard weighting everywhere.  Queries within
    ``1e-14`` of a data point return that point's value.

    ``on_duplicate`` controls coincident data points: ``"error"`` requires
    equal values, ``"first"`` keeps the first occurrence.
    """

    def __init__(self, points, values, on_duplicate: str = "error"):
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float).reshape(-1)
        if points.ndim == 1:
            points = points[:, None]
        if len(points) == 0:
            raise ValueError("empty interpolation dataset")
        if len(points) != len(values):
            raise ValueError("points and values differ in length")
        points, values = self._drop_duplicates(points, values, on_duplicate)
        self.points = points
        self.values = values
        self.dim = points.shape[1]
        self._kd = cKDTree(points)
        self._tri = None
        self._line = None
        K = len(points)
        if self.dim == 1 and K >= 2:
            order = np.argsort(points[:, 0], kind="stable")
            self._line = (points[order, 0], values[order])
        elif 2 <= self.dim <= 3 and K >= self.dim + 1:
            try:
                self._tri = Delaunay(points)
            except QhullError:
                self._tri = None

    @staticmethod
    def _drop_duplicates(points, values, on_duplicate):
        if len(points) < 2:
            return points, values
        pairs = cKDTree(points).query_pairs(COINCIDENT, output_type="ndarray")
        if len(pairs) == 0:
            return points, values
        if on_duplicate == "error":
            bad = ~np.isclose(values[pairs[:, 0]], values[pairs[:, 1]], rtol=1e-12, atol=1e-14)
            if bad.any():
                raise ValueError("coincident data points carry different values")
        elif on_duplicate != "first":
            raise ValueError(f"unknown duplicate policy {on_duplicate!r}")
        keep = np.ones(len(points), dtype=bool)
        keep[pairs.max(axis=1)] = False
        return points[keep], values[keep]

    @property
    def uses_triangulation(self) -> bool:
        return self._tri is not None or self._line is not None

    def __call__(self, queries) -> np.ndarray:
        queries = np.asarray(queries, dtype=float)
        single = queries.ndim == 0 or (self.dim > 1 and queries.ndim == 1)
        q = queries.reshape(-1, self.dim)
        out = np.full(len(q), np.nan)
        if self._line is not None:
            xs, vs = self._line
            inside = (q[:, 0] >= xs[0]) & (q[:, 0] <= xs[-1])
            out[inside] = np.interp(q[inside, 0], xs, vs)
        elif self._tri is not None:
            s = self._tri.find_simplex(q)
            inside = s >= 0
            if inside.any():
                T = self._tri.transform[s[inside]]
                b = np.einsum("kij,kj->ki", T[:, :self.dim], q[inside] - T[:, self.dim])
                bary = np.column_stack([b, 1.0 - b.sum(axis=1)])
                out[inside] = (bary * self.values[self._tri.simplices[s[inside]]]).sum(axis=1)
        missing = np.isnan(out)
        if missing.any():
            out[missing] = shepard(self.points, self.values, q[missing])
        dist, idx = self._kd.query(q)
        hit = dist < COINCIDENT
        out[hit] = self.values[idx[hit]]
        return out[0] if single else out


def interpolate(points, values, query):
    return ScatteredInterpolant(points, values)(query)


@dataclass(frozen=True)
class QuadraticFit:
    a: float
    b: float
    c: float

    def __call__(self, u):
        return (self.a * u + self.b) * u + self.c


def fit_quadratic(u, v) -> QuadraticFit:
    """Parabola through three samples (Newton divided differences)."""
    u1, u2, u3 = map(float, u)
    v1, v2, v3 = map(float, v)
    if not (u1 < u2 < u3):
        raise ValueError("abscissae must be strictly increasing")
    d12 = (v2 - v1) / (u2 - u1)
    d23 = (v3 - v2) / (u3 - u2)
    a = (d23 - d12) / (u3 - u1)
    b = d12 - a * (u1 + u2)
    c = v1 - (a * u1 + b) * u1
    return QuadraticFit(a, b, c)


def project_interval(u, lo, hi):
    return min(max(u, lo), hi)


def minimize_quadratic_stage(fit: QuadraticFit, gamma: float, delta: float, dt: float,
                             u_bounds, endpoint_values, discount: float = 1.0) -> float:
    """Minimize ``discount (a u^2 + b u + c) + dt (gamma u^2 + delta u)`` over ``[u1, u3]``.

    Strictly convex case: the clamped vertex.  Otherwise the endpoint with the
    smaller supplied total cost (ties go to ``u1``).
    """
    lo, hi = map(float, u_bounds)
    curv = discount * fit.a + dt * gamma
    slope = discount * fit.b + dt * delta
    if curv > 0:
        return project_interval(-slope / (2 * curv), lo, hi)
    return lo if endpoint_values[0] <= endpoint_values[1] else hi
