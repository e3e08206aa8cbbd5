"""Command-line interface.

Subcommands
-----------
build-tree   build the (reduced) tree and write a text dump
solve        build the tree, run the backward sweep, write dump and trajectory
synthesize   closed-loop feedback reconstruction from the tree values
bench-heat   heat-equation benchmark table (reduced by default)
report       run the experiment described by ``--config`` and write the report
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..dynamics import ControlGrid, TimeGrid
from ..errors import ConfigError, DegenerateInputError, DivergenceError, TreeSizeError
from ..feedback import refine_grid, synthesize_comparison, synthesize_quadratic, write_trajectory
from ..pod import reduce_problem
from ..tree import build_tree, pruned_full_ratio, write_tree_dump
from ..value import backward_sweep, extract_tree_trajectory
from .config import ExperimentConfig, load_config
from .experiment import build_basis, format_table, run_experiment


def _prune_eps(text: str):
    if text == "dt2":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'dt2'") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--dt", type=float, nargs="+", help="time step(s)")
    p.add_argument("--controls", type=int, metavar="M", help="number of discrete controls")
    p.add_argument("--prune-eps", type=_prune_eps, metavar="{value|dt2}", help="pruning tolerance")
    p.add_argument("--pod-tau", type=float, help="POD energy tolerance")
    p.add_argument("--no-pod", action="store_true", help="solve in full dimension")
    p.add_argument("--pod-basis-file", help="load (or save) the POD basis here")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--threads", type=int, help="parallel time-step rows (env TREEHJB_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treehjb", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("build-tree", "build the tree and write a dump"),
                           ("solve", "tree + backward sweep"),
                           ("bench-heat", "heat-equation benchmark table"),
                           ("report", "run the configured experiment")):
        _common(sub.add_parser(name, help=helptext))
    syn = sub.add_parser("synthesize", help="feedback reconstruction")
    _common(syn)
    syn.add_argument("--method", choices=("comparison", "quadratic"), default="comparison")
    syn.add_argument("--fine-controls", type=int, metavar="K", help="size of the finer control set")
    syn.add_argument("--subtree", action="store_true", help="interpolate on the accumulated sub-tree")
    return parser


def config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config)
    ov = {}
    if args.command == "bench-heat":
        if config.model["kind"] != "heat":
            raise ConfigError("model.kind", "bench-heat needs the heat model")
        if args.config is None:
            ov["synthesis.methods"] = ["tsa"]
    if args.dt:
        ov["discretization.dt"] = list(args.dt)
    if args.controls is not None:
        ov["discretization.controls"] = args.controls
    if args.prune_eps is not None:
        ov["discretization.prune_eps"] = args.prune_eps
    if args.pod_tau is not None:
        ov["pod.tau"] = args.pod_tau
    if args.no_pod:
        ov["pod.enabled"] = False
    if args.pod_basis_file is not None:
        ov["pod.basis_file"] = args.pod_basis_file
    if args.out is not None:
        ov["report.out"] = str(args.out)
    if args.threads is not None:
        ov["report.threads"] = args.threads
    if getattr(args, "fine_controls", None) is not None:
        ov["synthesis.fine_controls"] = args.fine_controls
    if getattr(args, "subtree", False):
        ov["synthesis.use_subtree"] = True
    return config.with_overrides(ov) if ov else config


def _working_problem(config: ExperimentConfig, out: Path):
    problem, x0 = config.build_model()
    if config.pod["enabled"]:
        basis = build_basis(config, problem, x0)
        path = Path(config.pod["basis_file"] or out / "pod_basis.txt")
        if not path.exists():
            basis.save(path)
        print(f"POD rank {basis.rank} (discarded energy {basis.energy():.3e}), basis in {path}")
        problem, x0 = reduce_problem(problem, basis, x0)
    return problem, x0


def _single_tree(config: ExperimentConfig, out: Path):
    problem, x0 = _working_problem(config, out)
    m, disc = config.model, config.discretization
    dt = disc["dt"][0]
    tgrid = TimeGrid.from_dt(m["t0"], m["T"], dt)
    grid = ControlGrid.uniform(problem.control_box, disc["controls"])
    tree = build_tree(problem, grid, tgrid, x0, config.prune_eps(dt), node_cap=disc["node_cap"])
    print(f"dt={dt:g} M={grid.size} nodes={tree.n_nodes} pruned/full={pruned_full_ratio(tree)}")
    return problem, tree


def _cmd_tree(config, out, *, solve):
    problem, tree = _single_tree(config, out)
    dt = tree.tgrid.dt
    table = backward_sweep(tree, problem) if solve else None
    dump = out / f"tree_dt{dt:g}.txt"
    write_tree_dump(dump, tree, table)
    print(f"tree dump: {dump}")
    if solve:
        traj = extract_tree_trajectory(tree, table, problem)
        path = out / f"trajectory_tsa_dt{dt:g}.txt"
        write_trajectory(path, tree.tgrid.times, traj.states, traj.controls, traj.values)
        print(f"root value {table.root_value!r}, trajectory cost {traj.cost!r}")
        print(f"trajectory: {path}")


def _cmd_synthesize(config, out, method):
    problem, tree = _single_tree(config, out)
    table = backward_sweep(tree, problem)
    syn = config.synthesis
    if method == "quadratic":
        res = synthesize_quadratic(tree, table, problem, use_subtree=syn["use_subtree"])
        tag = "alg2"
    else:
        res = synthesize_comparison(tree, table, problem, refine_grid(tree.grid, syn["fine_controls"]),
                                    use_subtree=syn["use_subtree"])
        tag = "alg1"
    path = out / f"trajectory_{tag}_dt{tree.tgrid.dt:g}.txt"
    write_trajectory(path, tree.tgrid.times, res.states, res.controls, res.values)
    print(f"root value {table.root_value!r}, closed-loop cost {res.cost!r}")
    print(f"trajectory: {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        out = Path(config.report["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command in ("build-tree", "solve"):
            _cmd_tree(config, out, solve=args.command == "solve")
        elif args.command == "synthesize":
            _cmd_synthesize(config, out, args.method)
        else:
            result = run_experiment(config, out, threads=args.threads)
            print(format_table(result.rows))
            print(f"report: {out / 'report.csv'}")
    except (ConfigError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TreeSizeError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
