"""Experiment driver: snapshot tree, POD, reduced tree, sweep, feedback
synthesis, Riccati reference, errors and orders, and report files."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dynamics import ControlGrid, ControlProblem, LinearQuadraticProblem, TimeGrid, stage_cost
from ..errors import ConfigError
from ..feedback import refine_grid, synthesize_comparison, synthesize_quadratic, write_trajectory
from ..lqr import LqrProblem, lqr_closed_loop, solve_riccati, values_along
from ..pod import PodBasis, pod_basis, reduce_problem, snapshot_matrix
from ..tree import build_tree, pruned_full_ratio
from ..value import backward_sweep, extract_tree_trajectory
from .config import ExperimentConfig
from .metrics import compute_errors, convergence_order

CSV_COLUMNS = ("dt", "nodes", "pruned_full", "cpu_seconds", "err2", "err_inf", "order2", "order_inf", "method")
THREADS_ENV = "TREEHJB_THREADS"


@dataclass
class RunReport:
    """One row of the report table."""

    dt: float
    nodes: int
    pruned_full: str
    cpu_seconds: float
    err2: float | None
    err_inf: float | None
    method: str
    order2: float | None = None
    order_inf: float | None = None
    cost: float = math.nan
    root_value: float = math.nan


@dataclass
class ExperimentResult:
    rows: list[RunReport]
    basis: PodBasis | None = None
    artifacts: list[Path] = field(default_factory=list)


@dataclass
class Reference:
    """Reference trajectory and the reference values ``v(y_R^n, t_n)`` along it."""

    states: np.ndarray
    controls: np.ndarray
    values: np.ndarray


def _tail_costs(problem: ControlProblem, states, controls, tgrid: TimeGrid) -> np.ndarray:
    """Discrete cost-to-go from every step of a trajectory (same recursion as the sweep)."""
    disc = problem.discount(tgrid.dt)
    out = np.empty(len(states))
    out[-1] = float(problem.terminal_cost(states[-1]))
    for k in range(len(controls) - 1, -1, -1):
        out[k] = float(stage_cost(problem, states[k], controls[k], tgrid.time(k), tgrid.dt)) + disc * out[k + 1]
    return out


def reference_solution(problem: ControlProblem, x0, tgrid: TimeGrid, kind: str, substeps: int = 10):
    """Reference for the error metrics, or ``None`` when ``kind == "none"``.

    ``"riccati"`` evaluates ``x'P(t_n)x`` along the clamped Riccati closed loop;
    ``"realized"`` evaluates the discrete cost-to-go along that same loop.  For
    a model without Riccati data, ``"realized"`` requires a single admissible
    control, which is then applied at every step.
    """
    if kind == "none":
        return None
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    box = problem.control_box
    if isinstance(problem, LinearQuadraticProblem) and not np.any(problem.delta):
        lq = LqrProblem.from_problem(problem)
        sol = solve_riccati(lq, tgrid, substeps)
        states, controls = lqr_closed_loop(lq, sol, x0, tgrid, box, step=problem.step)
        if kind == "riccati":
            return Reference(states, controls, values_along(sol, states))
    elif kind == "realized" and np.all(box[:, 0] == box[:, 1]):
        u = box[:, 0]
        states, controls = [x0], []
        for n in range(tgrid.n_steps):
            states.append(problem.step(states[-1], u, tgrid.time(n), tgrid.dt))
            controls.append(u)
        states, controls = np.array(states), np.array(controls)
    else:
        raise ConfigError("synthesis.reference",
                          f"{kind!r} reference needs a linear-quadratic model without linear control cost")
    return Reference(states, controls, _tail_costs(problem, states, controls, tgrid))


def _reference_kind(config: ExperimentConfig, problem: ControlProblem) -> str:
    kind = config.synthesis["reference"]
    if kind != "auto":
        return kind
    lq = isinstance(problem, LinearQuadraticProblem) and not np.any(problem.delta)
    return "riccati" if lq else "none"


def build_basis(config: ExperimentConfig, problem: ControlProblem, x0) -> PodBasis:
    """Load the configured basis file, or compute the basis from a snapshot tree."""
    pod = config.pod
    path = pod["basis_file"]
    if path and os.path.exists(path):
        basis = PodBasis.load(path)
        if basis.dim != problem.dim:
            raise ConfigError("pod.basis_file", f"basis dimension {basis.dim} != model dimension {problem.dim}")
        return basis
    m = config.model
    sdt = pod["snapshot_dt"]
    tgrid = TimeGrid.from_dt(m["t0"], m["T"], sdt)
    grid = ControlGrid.uniform(problem.control_box, pod["snapshot_controls"])
    snap = build_tree(problem, grid, tgrid, x0, config.prune_eps(sdt),
                      node_cap=config.discretization["node_cap"])
    return pod_basis(snapshot_matrix(snap), pod["tau"])


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def _run_dt(config, problem, x0, dt, reference_kind, out: Path | None):
    """All requested methods for one time step; returns rows and written paths."""
    m, disc, syn = config.model, config.discretization, config.synthesis
    tgrid = TimeGrid.from_dt(m["t0"], m["T"], dt)
    grid = ControlGrid.uniform(problem.control_box, disc["controls"])
    ref = reference_solution(problem, x0, tgrid, reference_kind, config.report["riccati_substeps"])

    start = time.perf_counter()
    tree = build_tree(problem, grid, tgrid, x0, config.prune_eps(dt), node_cap=disc["node_cap"])
    table = backward_sweep(tree, problem)
    solve_time = time.perf_counter() - start
    ratio = str(pruned_full_ratio(tree))
    tsa_tag = "tsa-pod" if config.pod["enabled"] else "tsa-full"

    runs = []
    if "tsa" in syn["methods"]:
        traj = extract_tree_trajectory(tree, table, problem)
        runs.append((tsa_tag, solve_time, traj.states, traj.controls, traj.values, traj.cost))
    if "alg1" in syn["methods"]:
        start = time.perf_counter()
        res = synthesize_comparison(tree, table, problem, refine_grid(grid, syn["fine_controls"]),
                                    use_subtree=syn["use_subtree"])
        runs.append(("alg1", solve_time + time.perf_counter() - start, res.states, res.controls,
                     res.values, res.cost))
    if "alg2" in syn["methods"]:
        start = time.perf_counter()
        res = synthesize_quadratic(tree, table, problem, use_subtree=syn["use_subtree"])
        runs.append(("alg2", solve_time + time.perf_counter() - start, res.states, res.controls,
                     res.values, res.cost))

    rows, paths = [], []
    for tag, cpu, states, controls, values, cost in runs:
        err2 = err_inf = None
        if ref is not None:
            err2, err_inf = compute_errors(values, ref.values)
        rows.append(RunReport(dt, tree.n_nodes, ratio, cpu, err2, err_inf, tag,
                              cost=float(cost), root_value=table.root_value))
        if out is not None and config.report["trajectories"]:
            path = out / f"trajectory_{tag}_dt{dt:g}.txt"
            write_trajectory(path, tgrid.times, states, controls, values)
            paths.append(path)
    if out is not None and ref is not None and config.report["trajectories"]:
        path = out / f"trajectory_reference_dt{dt:g}.txt"
        write_trajectory(path, tgrid.times, ref.states, ref.controls, ref.values)
        paths.append(path)
    return rows, paths


def attach_orders(rows: list[RunReport]) -> None:
    """Fill orders on rows whose predecessor (same method) has twice the time step."""
    last: dict[str, RunReport] = {}
    for row in rows:
        prev = last.get(row.method)
        if prev is not None and math.isclose(prev.dt, 2 * row.dt, rel_tol=1e-9):
            if prev.err2 is not None and row.err2 is not None:
                row.order2 = convergence_order(prev.err2, row.err2)
                row.order_inf = convergence_order(prev.err_inf, row.err_inf)
        last[row.method] = row


def resolve_threads(config: ExperimentConfig, threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
    return config.report["threads"]


def run_experiment(config: ExperimentConfig, out=None, threads: int | None = None) -> ExperimentResult:
    """Run the configured pipeline over all time steps.

    With ``out`` set, writes ``report.csv``, ``report.json``, trajectory files
    and, when POD is enabled, ``pod_basis.txt`` into that directory.
    """
    problem, x0 = config.build_model()
    out = None if out is None else Path(out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    artifacts: list[Path] = []

    basis = None
    if config.pod["enabled"]:
        basis = build_basis(config, problem, x0)
        problem, x0 = reduce_problem(problem, basis, x0)
        if out is not None:
            path = Path(config.pod["basis_file"] or out / "pod_basis.txt")
            if not path.exists():
                basis.save(path)
            artifacts.append(path)

    kind = _reference_kind(config, problem)
    dts = config.discretization["dt"]
    n_threads = resolve_threads(config, threads)
    if n_threads > 1 and len(dts) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda dt: _run_dt(config, problem, x0, dt, kind, out), dts))
    else:
        results = [_run_dt(config, problem, x0, dt, kind, out) for dt in dts]

    rows = []
    for r, paths in results:
        rows.extend(r)
        artifacts.extend(paths)
    rows.sort(key=lambda r: (config.synthesis["methods"].index(_method_key(r.method)), -r.dt))
    attach_orders(rows)

    if out is not None:
        artifacts.extend(write_report(rows, out, config, basis))
    return ExperimentResult(rows, basis, artifacts)


def _method_key(tag: str) -> str:
    return "tsa" if tag.startswith("tsa") else tag


def write_report(rows: list[RunReport], out: Path, config: ExperimentConfig | None = None,
                 basis: PodBasis | None = None) -> list[Path]:
    """CSV in table column order plus a JSON file echoing the config."""
    out = Path(out)
    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    json_path = out / "report.json"
    payload = {"rows": [asdict(r) for r in rows]}
    if config is not None:
        payload["config"] = config.to_json()
    if basis is not None:
        payload["pod"] = {"rank": basis.rank, "energy": basis.energy(),
                          "singular_values": basis.singular_values[:10].tolist()}
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
    return [csv_path, json_path]


def _json_default(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v)}")


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_table(rows) -> str:
    """Plain-text table of report rows (``RunReport`` objects or CSV dicts)."""
    def get(r, c):
        v = getattr(r, c) if isinstance(r, RunReport) else (r.get(c) or None)
        if v is None or v == "":
            return "-"
        if c in ("dt",):
            return f"{float(v):g}"
        if c in ("err2", "err_inf"):
            return f"{float(v):.2e}"
        if c in ("order2", "order_inf"):
            return f"{float(v):.2f}"
        if c == "cpu_seconds":
            return f"{float(v):.3f}"
        return str(v)

    cells = [list(CSV_COLUMNS)] + [[get(r, c) for c in CSV_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(CSV_COLUMNS))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells)
