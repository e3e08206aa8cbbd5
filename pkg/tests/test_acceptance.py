"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(collected again in the terminal summary) and checking its runtime budget."""

import math
import time
from fractions import Fraction

import numpy as np

from oracles import enumerate_min, riccati_scalar_closed_form_inverse
from problems import random_nonlinear, scalar_lq
from treehjb import (ControlGrid, LinearQuadraticProblem, LqrProblem, ScatteredInterpolant, TimeGrid,
                     backward_sweep, build_tree, extract_tree_trajectory, lqr_closed_loop, pod_basis,
                     reduce_problem, refine_grid, snapshot_matrix, solve_riccati, synthesize_comparison,
                     synthesize_quadratic)
from treehjb.bench import assemble_heat
from treehjb.bench.config import loads_config
from treehjb.bench.experiment import run_experiment
from treehjb.tree import cardinality_ratio, full_cardinality_log10, pruned_full_ratio


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_1_brute_force(record):
    rng = np.random.default_rng(1)
    worst, count = 0.0, 0
    with Clock() as clock:
        for i in range(24):
            dim, M, N = 1 + i % 2, (2, 3)[i % 3 % 2], (3, 4, 5)[i % 3]
            p = random_nonlinear(rng, dim)
            grid = ControlGrid.uniform(p.control_box, M)
            tg = TimeGrid.from_dt(0.0, 1.0, 1.0 / N)
            x0 = rng.uniform(-1, 1, dim)
            root = backward_sweep(build_tree(p, grid, tg, x0, 0.0), p).root_value
            worst = max(worst, abs(root - enumerate_min(p, grid.points, tg.dt, N, x0)))
            count += 1
    ok = worst <= 1e-12 and clock.seconds < 5
    record(1, ok, f"{count} problems, max |diff| {worst:.1e}, {clock.seconds:.2f}s")
    assert ok


def test_criterion_2_pruning_first_order(record):
    # C fitted at the coarsest tolerance; the bound must hold with factor-2 slack at the finer ones
    p = scalar_lq(-1.0, 1.0, 1.0, 1.0, 0.5)
    grid = ControlGrid.uniform(p.control_box, 3)
    tg = TimeGrid.from_dt(0.0, 1.0, 0.1)
    with Clock() as clock:
        exact = backward_sweep(build_tree(p, grid, tg, [1.0], 0.0), p).root_value
        diffs = {eps: abs(backward_sweep(build_tree(p, grid, tg, [1.0], eps), p).root_value - exact)
                 for eps in (1e-2, 1e-3, 1e-4)}
    C = diffs[1e-2] / 1e-2
    ok = all(d <= 2 * C * eps for eps, d in diffs.items()) and clock.seconds < 30
    ratios = ", ".join(f"{d / eps:.3f}" for eps, d in diffs.items())
    record(2, ok, f"C={C:.3f}, diff/eps = [{ratios}], {clock.seconds:.2f}s")
    assert ok


def test_criterion_3_riccati(record):
    tg = TimeGrid.from_dt(0.0, 1.0, 0.1)
    with Clock() as clock:
        inv = solve_riccati(LqrProblem([[0.0]], [[1.0]], [[0.0]], [[1.0]], [[2.0]]), tg, 100).P[:, 0, 0]
        tanh = solve_riccati(LqrProblem([[0.0]], [[1.0]], [[1.0]], [[1.0]], [[0.0]]), tg, 100).P[:, 0, 0]
    err = max(np.abs(inv - riccati_scalar_closed_form_inverse(2.0, 1.0, tg.times)).max(),
              np.abs(tanh - np.tanh(1.0 - tg.times)).max())
    ok = err <= 1e-8 and clock.seconds < 1
    record(3, ok, f"max error {err:.1e}, {clock.seconds:.3f}s")
    assert ok


LQR_DESK = """
[model]
kind = "linear"
A = [[-1.0]]
B = [[1.0]]
Q = [[1.0]]
R = [[1.0]]
QT = [[0.0]]
x0 = [1.0]
control_box = [[-1.0, 1.0]]

[discretization]
dt = [0.1, 0.05, 0.025, 0.0125]
controls = 11
prune_eps = "dt2"

[pod]
enabled = false

[report]
riccati_substeps = 100
trajectories = false
"""


def test_criterion_4_tsa_order(record):
    with Clock() as clock:
        rows = run_experiment(loads_config(LQR_DESK)).rows
    errs = [r.err2 for r in rows]
    orders = [r.order2 for r in rows[1:]]
    ok = (all(b < a for a, b in zip(errs, errs[1:])) and all(o is not None and 0.7 <= o <= 2.4 for o in orders)
          and clock.seconds < 120)
    record(4, ok, f"err2 {['%.2e' % e for e in errs]}, orders {['%.2f' % o for o in orders]}, "
                  f"{clock.seconds:.1f}s")
    assert ok


def test_criterion_5_pod_full_rank(record):
    with Clock() as clock:
        heat = assemble_heat(50, 0.15)
        p = heat.problem()
        snap = build_tree(p, ControlGrid.uniform(p.control_box, 2), TimeGrid.from_dt(0, 1, 0.1), heat.y0, 0.01)
        basis = pod_basis(snapshot_matrix(snap), 0.0)
        rp, z0 = reduce_problem(p, basis, heat.y0)
        tg = TimeGrid.from_dt(0, 1, 0.1)
        full_lq, red_lq = LqrProblem.from_problem(p), LqrProblem.from_problem(rp)
        y, _ = lqr_closed_loop(full_lq, solve_riccati(full_lq, tg, 200), heat.y0, tg, p.control_box, step=p.step)
        z, _ = lqr_closed_loop(red_lq, solve_riccati(red_lq, tg, 200), z0, tg, rp.control_box, step=rp.step)
        riccati_gap = np.abs(basis.lift(z) - y).max()
        # tree greedy closed loop in both coordinates
        tg = TimeGrid.from_dt(0, 1, 0.25)
        grid = ControlGrid.uniform(p.control_box, 3)
        full = build_tree(p, grid, tg, heat.y0, 0.0)
        red = build_tree(rp, grid, tg, z0, 0.0)
        tf = extract_tree_trajectory(full, backward_sweep(full, p), p)
        tr = extract_tree_trajectory(red, backward_sweep(red, rp), rp)
        tree_gap = np.abs(basis.lift(tr.states) - tf.states).max()
    ok = basis.rank == 50 and max(riccati_gap, tree_gap) <= 1e-8 and clock.seconds < 30
    record(5, ok, f"rank {basis.rank}, Riccati loop gap {riccati_gap:.1e}, tree loop gap {tree_gap:.1e}, "
                  f"{clock.seconds:.1f}s")
    assert ok


def test_criterion_6_pod_rank(record):
    with Clock() as clock:
        heat = assemble_heat(1000, 0.15)
        p = heat.problem()
        snap = build_tree(p, ControlGrid.uniform(p.control_box, 2), TimeGrid.from_dt(0, 1, 0.1), heat.y0, 0.01)
        basis = pod_basis(snapshot_matrix(snap), 1e-4)
    ok = 1 <= basis.rank <= 4 and clock.seconds < 60
    record(6, ok, f"rank {basis.rank} (expected 2), discarded energy {basis.energy():.1e}, {clock.seconds:.1f}s")
    assert ok


def test_criterion_7_quadratic_exactness(record):
    # one step: the continuation value qT (x + dt(a x + b u))^2 is exactly quadratic in u
    rng = np.random.default_rng(7)
    worst = 0.0
    with Clock() as clock:
        for _ in range(20):
            a, b, x0 = rng.uniform(-1, 1, 3)
            r, qT, dt = rng.uniform(0.1, 2), rng.uniform(0.1, 3), rng.uniform(0.05, 0.5)
            delta, lam = rng.uniform(-1, 1), rng.uniform(0, 1)
            p = scalar_lq(a, b, 1.0, r, qT, box=(-0.5, 1.0), lam=lam, delta=delta, T=dt)
            tree = build_tree(p, ControlGrid.uniform(p.control_box, 3), TimeGrid.from_dt(0, dt, dt), [x0], 0.0)
            u = synthesize_quadratic(tree, backward_sweep(tree, p), p).controls[0, 0]
            disc = math.exp(-lam * dt)
            y = x0 + dt * a * x0
            vertex = -(delta + 2 * disc * qT * b * y) / (2 * (r + disc * qT * b * b * dt))
            worst = max(worst, abs(u - min(max(vertex, -0.5), 1.0)))
    ok = worst <= 1e-8 and clock.seconds < 10
    record(7, ok, f"20 instances, max |u - u*| {worst:.1e}, {clock.seconds:.2f}s")
    assert ok


def random_lqr(rng):
    d = int(rng.integers(1, 3))
    A = rng.uniform(-1, 1, (d, d))
    B = rng.uniform(-1, 1, (d, 1))
    Q = rng.uniform(0.5, 2) * np.eye(d)
    R = [[rng.uniform(0.2, 1)]]
    QT = rng.uniform(0, 1) * np.eye(d)
    x0 = rng.uniform(-1, 1, d)
    lq = LqrProblem(A, B, Q, R, QT)
    tg = TimeGrid.from_dt(0, 1, 0.1)
    _, u = lqr_closed_loop(lq, solve_riccati(lq, tg), x0, tg, [[-1e6, 1e6]])
    umax = 1.5 * max(np.abs(u).max(), 1e-3)
    return LinearQuadraticProblem(A, B, Q, R, QT, [[-umax, umax]]), x0


def test_criterion_8_feedback_improves(record):
    rng = np.random.default_rng(0)
    results = []
    with Clock() as clock:
        for _ in range(10):
            p, x0 = random_lqr(rng)
            tg = TimeGrid.from_dt(0, 1, 0.1)
            grid = ControlGrid.uniform(p.control_box, 3)
            tree = build_tree(p, grid, tg, x0, 0.01)
            table = backward_sweep(tree, p)
            greedy = extract_tree_trajectory(tree, table, p).cost
            cost = synthesize_comparison(tree, table, p, refine_grid(grid, 100)).cost
            results.append(cost <= greedy + 1e-8)
    ok = len(results) >= 10 and all(results) and clock.seconds < 60
    record(8, ok, f"{sum(results)}/{len(results)} instances improved, {clock.seconds:.1f}s")
    assert ok


def test_criterion_9_cardinality(record):
    with Clock() as clock:
        p = scalar_lq(a=0.0, b=0.0)
        tree = build_tree(p, ControlGrid.uniform(p.control_box, 3), TimeGrid.from_dt(0, 1, 0.25), [1.0], 0.1)
        frozen = pruned_full_ratio(tree).exact == Fraction(5, 121)
        unpruned = build_tree(scalar_lq(), ControlGrid.uniform((-1, 1), 2), TimeGrid.from_dt(0, 1, 0.25), [1.0])
        distinct = pruned_full_ratio(unpruned).exact == 1
        table = cardinality_ratio(3141, 11, 10).exact == Fraction(3141, (11**11 - 1) // 10)
        log_full = full_cardinality_log10(11, 80)
    exact_ok = frozen and distinct and table
    ok = exact_ok and abs(log_full - 83.2) <= 0.1 and clock.seconds < 1
    record(9, ok, f"exact ratios {'ok' if exact_ok else 'WRONG'}, log10 full(M=11, N=80) = {log_full:.3f} "
                  f"(required 83.2 +- 0.1), {clock.seconds:.3f}s")
    assert ok


def test_criterion_10_interpolation(record):
    rng = np.random.default_rng(10)
    with Clock() as clock:
        pts = rng.uniform(0, 1, (60, 2))
        w, c = rng.standard_normal(2), rng.standard_normal()
        f = ScatteredInterpolant(pts, pts @ w + c)
        q = np.empty((0, 2))
        while len(q) < 100:
            cand = rng.uniform(0.2, 0.8, (100, 2))
            q = np.vstack([q, cand[f._tri.find_simplex(cand) >= 0]])
        q = q[:100]
        affine_err = np.abs(f(q) - (q @ w + c)).max()
        vals = rng.standard_normal(60)
        g = ScatteredInterpolant(pts, vals)
        out = rng.uniform(1.5, 5, (100, 2)) * rng.choice([-1, 1], (100, 2))
        assert np.all(g._tri.find_simplex(out) < 0)
        shep = g(out)
        bounded = bool(np.all((shep >= vals.min()) & (shep <= vals.max())))
    ok = affine_err <= 1e-10 and bounded and clock.seconds < 5
    record(10, ok, f"affine error {affine_err:.1e} on 100 queries, Shepard bounded {bounded}, "
                   f"{clock.seconds:.2f}s")
    assert ok
