"""Leveled trajectory tree with distance-based node merging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .dynamics import ControlGrid, ControlProblem, TimeGrid
from .errors import TreeSizeError

DEFAULT_NODE_CAP = 50_000_000

# number of coordinates hashed; higher dimensions are hashed through a fixed projection
_HASH_DIM = 3


@numba.njit(cache=True)
def _cell_key(cell):
    key = np.int64(1469598103934665603)
    for c in cell:
        key = (key ^ c) * np.int64(1099511628211)
    return key


@numba.njit(cache=True)
def _merge_level(cand, proj, h, eps):
    """Greedy single-pass merge of candidate states.

    Candidate ``p`` joins the lowest-numbered existing node within ``eps``
    (Euclidean), otherwise it becomes a new node.  Nodes are bucketed in a
    hash of cells of width ``h >= eps`` over the projected coordinates
    ``proj``; projection is 1-Lipschitz, so scanning the 3^k neighbouring
    cells cannot miss a match.
    """
    P, d = cand.shape
    k = proj.shape[1]
    eps2 = eps * eps
    heads = numba.typed.Dict.empty(numba.types.int64, numba.types.int64)
    nxt = np.full(P, -1, dtype=np.int64)
    src = np.empty(P, dtype=np.int64)
    child = np.empty(P, dtype=np.int64)
    n_off = 3 ** k
    cell = np.empty(k, dtype=np.int64)
    probe = np.empty(k, dtype=np.int64)
    n_nodes = 0
    for p in range(P):
        for i in range(k):
            cell[i] = np.int64(math.floor(proj[p, i] / h))
        best = -1
        for o in range(n_off):
            r = o
            for i in range(k):
                probe[i] = cell[i] + (r % 3) - 1
                r //= 3
            key = _cell_key(probe)
            q = heads[key] if key in heads else -1
            while q != -1:
                if best == -1 or q < best:
                    s = src[q]
                    dist2 = 0.0
                    for j in range(d):
                        diff = cand[p, j] - cand[s, j]
                        dist2 += diff * diff
                    if dist2 <= eps2:
                        best = q
                q = nxt[q]
        if best == -1:
            key = _cell_key(cell)
            nxt[n_nodes] = heads[key] if key in heads else -1
            heads[key] = n_nodes
            src[n_nodes] = p
            child[p] = n_nodes
            n_nodes += 1
        else:
            child[p] = best
    return child, src[:n_nodes]


def _hash_directions(d):
    if d <= _HASH_DIM:
        return None
    rng = np.random.default_rng(20240101)
    q, _ = np.linalg.qr(rng.standard_normal((d, _HASH_DIM)))
    return q


def merge_candidates(cand: np.ndarray, eps: float, directions=None):
    """Return ``(child_index, node_source)`` for a block of candidate states."""
    cand = np.ascontiguousarray(cand, dtype=float)
    proj = cand if directions is None else cand @ directions
    proj = np.ascontiguousarray(proj)
    if eps > 0:
        h = eps
    else:
        h = 1e-9 * (1.0 + float(np.max(np.abs(proj)))) if proj.size else 1.0
    return _merge_level(cand, proj, float(h), float(eps))


@dataclass
class Tree:
    """Nodes per time level and the control-labelled edges between them.

    ``children[n][i, j]`` is the level ``n+1`` node reached from node ``i`` of
    level ``n`` with control ``grid.points[j]``.
    """

    levels: list[np.ndarray]
    children: list[np.ndarray]
    eps: float
    grid: ControlGrid
    tgrid: TimeGrid

    @property
    def n_nodes(self) -> int:
        return sum(len(lv) for lv in self.levels)

    @property
    def level_sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    @property
    def dim(self) -> int:
        return self.levels[0].shape[1]

    def edges(self, n: int) -> np.ndarray:
        """``(parent, control_index, child)`` rows for level ``n``."""
        ch = self.children[n]
        K, M = ch.shape
        parent = np.repeat(np.arange(K), M)
        ctrl = np.tile(np.arange(M), K)
        return np.column_stack([parent, ctrl, ch.ravel()])


def build_tree(problem: ControlProblem, grid: ControlGrid, tgrid: TimeGrid, x0,
               eps_tree: float = 0.0, *, node_cap: int = DEFAULT_NODE_CAP) -> Tree:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != problem.dim:
        raise ValueError(f"x0 has dimension {x0.size}, problem has {problem.dim}")
    if eps_tree < 0:
        raise ValueError("eps_tree must be >= 0")
    grid.check_inside(problem.control_box)
    U = grid.points
    M = len(U)
    directions = _hash_directions(problem.dim)
    levels = [x0[None, :].copy()]
    children = []
    for n in range(tgrid.n_steps):
        X = levels[-1]
        K = len(X)
        cand = problem.step(np.repeat(X, M, axis=0), np.tile(U, (K, 1)), tgrid.time(n), tgrid.dt)
        child, src = merge_candidates(cand, eps_tree, directions)
        if len(src) > node_cap:
            raise TreeSizeError(f"level {n + 1} has {len(src)} nodes, cap is {node_cap}")
        levels.append(cand[src])
        children.append(child.reshape(K, M))
    return Tree(levels, children, float(eps_tree), grid, tgrid)


def full_cardinality(M: int, n_steps: int) -> int:
    """Node count ``sum_{n=0}^{N} M^n`` of the unpruned tree, exactly."""
    if M < 1:
        raise ValueError("need M >= 1")
    if M == 1:
        return n_steps + 1
    return (M ** (n_steps + 1) - 1) // (M - 1)


def full_cardinality_log10(M: int, n_steps: int) -> float:
    return math.log10(full_cardinality(M, n_steps))


@dataclass(frozen=True)
class CardinalityRatio:
    exact: Fraction
    log10: float

    @property
    def value(self) -> float:
        return float(self.exact)

    @property
    def mantissa_exponent(self) -> tuple[float, int]:
        e = math.floor(self.log10)
        m = 10 ** (self.log10 - e)
        if m >= 9.995:  # keep "1.0e-k" instead of "10.0e-(k+1)" after rounding
            m, e = m / 10, e + 1
        return m, e

    def __str__(self):
        m, e = self.mantissa_exponent
        return f"{m:.1f}e{e:+03d}"


def cardinality_ratio(n_nodes: int, M: int, n_steps: int) -> CardinalityRatio:
    full = full_cardinality(M, n_steps)
    return CardinalityRatio(Fraction(n_nodes, full), math.log10(n_nodes) - math.log10(full))


def pruned_full_ratio(tree: Tree) -> CardinalityRatio:
    return cardinality_ratio(tree.n_nodes, tree.grid.size, tree.tgrid.n_steps)


def sub_tree_nodes(tree: Tree, up_to_level: int) -> tuple[np.ndarray, np.ndarray]:
    """States of levels ``0..up_to_level`` in level order, with their levels."""
    if not 0 <= up_to_level < len(tree.levels):
        raise ValueError("level out of range")
    lv = tree.levels[: up_to_level + 1]
    states = np.concatenate(lv)
    levels = np.concatenate([np.full(len(x), n) for n, x in enumerate(lv)])
    return states, levels


def write_tree_dump(path, tree: Tree, table=None) -> None:
    """Line-oriented dump: ``level id x...`` nodes, ``E level parent j child``
    edges and, with a value table, ``V level id value`` lines."""
    with open(path, "w") as fh:
        for n, X in enumerate(tree.levels):
            for i, x in enumerate(X):
                fh.write(f"{n} {i} " + " ".join(repr(float(v)) for v in x) + "\n")
        for n in range(len(tree.children)):
            for p, j, c in tree.edges(n):
                fh.write(f"E {n} {p} {j} {c}\n")
        if table is not None:
            for n, vals in enumerate(table.values):
                for i, v in enumerate(vals):
                    fh.write(f"V {n} {i} {float(v)!r}\n")


def read_tree_dump(path) -> dict:
    """Parse a dump back into ``{"levels", "edges", "values"}`` lists per level."""
    nodes: dict[int, list] = {}
    edges: dict[int, list] = {}
    values: dict[int, list] = {}
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "E":
                edges.setdefault(int(tok[1]), []).append(tuple(int(t) for t in tok[2:5]))
            elif tok[0] == "V":
                values.setdefault(int(tok[1]), []).append((int(tok[2]), float(tok[3])))
            else:
                nodes.setdefault(int(tok[0]), []).append((int(tok[1]), [float(t) for t in tok[2:]]))
    levels = [np.array([x for _, x in sorted(nodes[n])]) for n in sorted(nodes)]
    return {
        "levels": levels,
        "edges": [np.array(edges[n], dtype=np.int64) for n in sorted(edges)],
        "values": [np.array([v for _, v in sorted(values[n])]) for n in sorted(values)],
    }
