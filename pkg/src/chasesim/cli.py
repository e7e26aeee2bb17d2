"""Command-line interface: one binary, seven subcommands.

Exit codes: 0 success, 1 usage error, 2 input or parse error,
3 verification failure (a failed chi-squared or dominance audit).
Results go to stdout or --out; log lines go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from functools import partial

import numpy as np

from . import bounds as bounds_mod
from . import couplings, reductions
from .graphs import (Graph, GraphFormatError, build_complete, build_path,
                     build_regular_tree, build_star, build_torus, parse_graph,
                     serialize_graph)
from .harness import (SweepSpec, distribution_compare, estimate_crossing,
                      parse_sweep_csv, replica_rng, run_replicas, sweep,
                      sweep_csv)
from .process import (RunLimits, ProcessParams, STANDARD_ROOT, per_clock_run,
                      run_to_fixation, run_with_states, snapshot_csv)

log = logging.getLogger("chasesim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_VERIFY = 3

_FAMILIES = ("path", "star", "complete", "tree", "torus")


class _UsageError(Exception):
    pass


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage problems; the contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _add_graph_flags(p: argparse.ArgumentParser):
    p.add_argument("--graph", required=True,
                   help=f"graph family ({', '.join(_FAMILIES)}) or a graph file path")
    p.add_argument("--n", type=int, help="size for path/star/complete (star: leaf count)")
    p.add_argument("--offspring", type=int, help="tree offspring count")
    p.add_argument("--depth", type=int, help="tree depth")
    p.add_argument("--regular", action="store_true",
                   help="make the tree root degree offspring+1")
    p.add_argument("--L", type=int, help="torus side length")
    p.add_argument("--mode", choices=("cylinder", "torus"), default="cylinder",
                   help="torus boundary mode")


def _resolve_graph(args) -> Graph:
    name = args.graph
    if name not in _FAMILIES:
        try:
            with open(name, "r", encoding="utf-8") as fh:
                return parse_graph(fh.read())
        except FileNotFoundError:
            raise _InputError(
                f"--graph {name!r} is neither a family name nor a readable file")
        except GraphFormatError as exc:
            raise _InputError(f"--graph file {name}: {exc}")
    try:
        if name in ("path", "star", "complete"):
            if args.n is None:
                raise _InputError(f"--graph {name} requires --n")
            builder = {"path": build_path, "star": build_star,
                       "complete": build_complete}[name]
            return builder(args.n)
        if name == "tree":
            if args.offspring is None or args.depth is None:
                raise _InputError("--graph tree requires --offspring and --depth")
            return build_regular_tree(args.offspring, args.depth,
                                      regular=args.regular)
        if args.L is None:
            raise _InputError("--graph torus requires --L")
        return build_torus(args.L, args.mode)
    except ValueError as exc:
        raise _InputError(f"--graph {name}: {exc}")


def _params(args) -> ProcessParams:
    try:
        return ProcessParams(args.lam, args.alpha)
    except ValueError as exc:
        raise _InputError(f"--lambda/--alpha: {exc}")


def _emit(text: str, args):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ------------------------------------------------------------ subcommands

def _cmd_graph(args) -> int:
    _emit(serialize_graph(_resolve_graph(args)), args)
    return EXIT_OK


def _outcome_dict(outcome) -> dict:
    d = dataclasses.asdict(outcome)
    if d["seed"] is not None:
        d["seed"] = repr(d["seed"]) if not isinstance(d["seed"], int) else d["seed"]
    return d


def _run_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="red spread rate")
    p.add_argument("--alpha", type=float, required=True,
                   help="red-to-blue conversion rate")
    p.add_argument("--seed", type=int, default=0, help="replica stream seed")
    p.add_argument("--spec", default=STANDARD_ROOT,
                   choices=("standard-root", "band", "classical-blue-neighbor"),
                   help="initial coloring")
    p.add_argument("--max-events", type=int, default=None,
                   help="stop after this many events")
    p.add_argument("--engine", choices=("aggregate", "per-clock"),
                   default="aggregate",
                   help="aggregate-rate kernel or the per-clock reference")


def _cmd_simulate(args) -> int:
    g = _resolve_graph(args)
    p = _params(args)
    limits = RunLimits(max_events=args.max_events)
    runner = run_to_fixation if args.engine == "aggregate" else per_clock_run
    try:
        outcome = runner(g, p, args.spec, limits, rng=args.seed)
    except ValueError as exc:
        raise _InputError(f"--spec {args.spec}: {exc}")
    _emit(_json(_outcome_dict(outcome)), args)
    return EXIT_OK


def _cmd_snapshot(args) -> int:
    g = _resolve_graph(args)
    p = _params(args)
    limits = RunLimits(max_events=args.max_events)
    try:
        outcome, cfg = run_with_states(g, p, args.spec, limits, rng=args.seed)
    except ValueError as exc:
        raise _InputError(f"--spec {args.spec}: {exc}")
    log.info("run status %s, damage %d", outcome.status, outcome.damage)
    _emit(snapshot_csv(cfg), args)
    return EXIT_OK


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise _InputError(f"--config {path}: file not found")
    except json.JSONDecodeError as exc:
        raise _InputError(f"--config {path}: line {exc.lineno}: {exc.msg}")
    if not isinstance(cfg, dict):
        raise _InputError(f"--config {path}: expected a JSON object")
    return cfg


def _sweep_spec(args) -> SweepSpec:
    fields = {f.name for f in dataclasses.fields(SweepSpec)}
    merged: dict = {}
    if args.config:
        cfg = _load_config(args.config)
        unknown = set(cfg) - fields
        if unknown:
            raise _InputError(f"--config {args.config}: unknown keys {sorted(unknown)}")
        merged.update(cfg)
    for name in fields:
        flag = getattr(args, name, None)
        if flag is not None:
            merged[name] = flag
    missing = [k for k in ("vary", "fixed_value", "grid", "sizes",
                           "samples_per_point", "base_seed") if k not in merged]
    if missing:
        raise _InputError(f"sweep spec incomplete: missing {missing} "
                          "(set flags or --config keys)")
    try:
        return SweepSpec(**merged)
    except ValueError as exc:
        raise _InputError(f"sweep spec: {exc}")


def _csv_floats(text: str, flag: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{flag}: expected comma-separated numbers, got {text!r}")


def _cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    log.info("sweep %s over %d grid points x sizes %s, %d samples/point",
             spec.vary, len(spec.grid), spec.sizes, spec.samples_per_point)
    rows = sweep(spec, workers=args.workers)
    if args.csv:
        _emit(sweep_csv(spec, rows), args)
    else:
        _emit(_json([dataclasses.asdict(r) for r in rows]), args)
    return EXIT_OK


def _cmd_crossing(args) -> int:
    try:
        with open(args.infile, "r", encoding="utf-8") as fh:
            rows = parse_sweep_csv(fh.read())
    except FileNotFoundError:
        raise _InputError(f"crossing input {args.infile}: file not found")
    except ValueError as exc:
        raise _InputError(f"crossing input {args.infile}: {exc}")
    try:
        est = estimate_crossing(rows)
    except ValueError as exc:
        raise _InputError(f"crossing: {exc}")
    payload = {
        "pairs": [{"L1": l1, "L2": l2, "crossing": c}
                  for (l1, l2, c) in est.pairwise_crossings],
        "estimate": est.point_estimate,
        "spread": est.spread,
    }
    _emit(_json(payload), args)
    return EXIT_OK


def _graph_label(args) -> str:
    if args.graph in ("path", "star", "complete"):
        return f"{args.graph}-{args.n}"
    if args.graph == "tree":
        return f"tree-{args.offspring}-{args.depth}"
    return args.graph


def _clipped_jump_sample(p, cap, rng):
    return min(reductions.sample_X_via_jump_chain(p, rng), cap)


def _tree_sample(g, p, rng):
    return couplings.tree_passage_sample(g, p, rng).X


def _engine_sample(g, p, rng):
    return run_to_fixation(g, p, rng=rng).damage


def _oracle_samplers(args, g: Graph, p: ProcessParams):
    """(reduction sampler, engine sampler) pair for the graph family;
    both picklable so they can cross process boundaries."""
    if args.graph == "path":
        reduction = partial(_clipped_jump_sample, p, g.n)
    elif args.graph == "star":
        reduction = partial(reductions.star_sample_X, args.n, p)
    elif args.graph == "complete":
        reduction = partial(reductions.complete_sample_X, args.n, p)
    elif args.graph == "tree":
        reduction = partial(_tree_sample, g, p)
    else:
        raise _InputError(f"--graph {args.graph}: oracle verification needs "
                          "path, star, complete, or tree")
    return reduction, partial(_engine_sample, g, p)


def _cmd_verify_oracle(args) -> int:
    g = _resolve_graph(args)
    p = _params(args)
    reduction, engine = _oracle_samplers(args, g, p)
    log.info("sampling %d draws from the reduction and the engine", args.samples)
    xs_red = run_replicas(reduction, args.samples, args.seed,
                          context=("oracle-reduction",), workers=args.workers)
    xs_eng = run_replicas(engine, args.samples, args.seed,
                          context=("oracle-engine",), workers=args.workers)
    report = distribution_compare(xs_red, xs_eng, min_bin=args.min_bin)
    payload = {"graph": _graph_label(args), "samples": args.samples,
               "chi2": report.chi2, "dof": report.dof,
               "p_value": report.p_value, "pass": report.passed}
    _emit(_json(payload), args)
    if not report.passed:
        log.error("oracle equivalence FAILED: p=%.2e < 0.01", report.p_value)
        return EXIT_VERIFY
    return EXIT_OK


_COUPLINGS = ("tree-alpha", "jumpchain", "star", "complete")


def _coupling_task(args, rng):
    if args.coupling == "tree-alpha":
        tree = build_regular_tree(args.offspring or 2, args.depth or 4)
        return couplings.tree_alpha_coupling(tree, args.lam, args.alpha,
                                             args.alpha_prime, rng)
    if args.coupling == "jumpchain":
        return couplings.jumpchain_coupling(args.lam, args.lam_prime,
                                            args.alpha, args.alpha_prime, rng)
    if args.coupling == "star":
        return couplings.star_coupling(args.n or 10, args.n_prime or args.n or 10,
                                       args.lam, args.lam_prime,
                                       args.alpha, args.alpha_prime, rng)
    return couplings.complete_coupling(args.n or 8, args.n_prime or args.n or 8,
                                       args.lam, args.lam_prime,
                                       args.alpha, args.alpha_prime, rng)


def _cmd_verify_dominance(args) -> int:
    if args.pairs_file:
        try:
            with open(args.pairs_file, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            pairs = [couplings.CoupledPair(x_large=int(r["x_large"]),
                                           x_small=int(r["x_small"]))
                     for r in raw]
        except FileNotFoundError:
            raise _InputError(f"--pairs-file {args.pairs_file}: file not found")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise _InputError(f"--pairs-file {args.pairs_file}: {exc}")
        label = f"file:{args.pairs_file}"
    else:
        try:
            task = partial(_coupling_task, args)
            pairs = run_replicas(task, args.pairs, args.seed,
                                 context=("dominance", args.coupling),
                                 workers=args.workers)
        except ValueError as exc:
            raise _InputError(f"coupling parameters: {exc}")
        label = args.coupling
    try:
        report = couplings.verify_dominance(pairs)
    except couplings.EmptyInput as exc:
        raise _InputError(str(exc))
    payload = {"coupling": label, "n_pairs": report.n_pairs,
               "n_violations": report.n_violations, "pass": report.passed}
    _emit(_json(payload), args)
    if not report.passed:
        log.error("dominance FAILED: %d violations", report.n_violations)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_bounds(args) -> int:
    if args.bounds_cmd == "percolate":
        g = _resolve_graph(args)
        p = _params(args)
        sample = bounds_mod.good_site_percolation_sim(g, p, replica_rng(args.seed, 0))
        payload = {"n": g.n, "n_good": int(sample.good_mask.sum()),
                   "good_fraction": float(sample.good_mask.mean()),
                   "root_cluster_size": sample.root_cluster_size}
        _emit(_json(payload), args)
        return EXIT_OK
    try:
        payload = {"lambda_lower": bounds_mod.lambda_lower(args.d, args.alpha),
                   "lambda_upper": bounds_mod.lambda_upper(args.d, args.alpha,
                                                           args.pc)}
    except ValueError as exc:
        raise _InputError(f"--d/--alpha/--pc: {exc}")
    _emit(_json(payload), args)
    return EXIT_OK


# ------------------------------------------------------------ wiring

def build_parser() -> _Parser:
    root = _Parser(prog="chasesim",
                   description="Simulation and Monte Carlo toolkit for "
                               "chase-escape with conversion.")
    sub = root.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write results to this file instead of stdout")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: CHASESIM_WORKERS or 1)")

    p_graph = sub.add_parser("graph", help="build a graph and print its text form")
    _add_graph_flags(p_graph)
    common(p_graph)
    p_graph.set_defaults(fn=_cmd_graph)

    p_sim = sub.add_parser("simulate", help="run one realization, print the outcome")
    _add_graph_flags(p_sim)
    _run_flags(p_sim)
    common(p_sim)
    p_sim.set_defaults(fn=_cmd_simulate)

    p_snap = sub.add_parser("snapshot", help="run once and print final site colors")
    _add_graph_flags(p_snap)
    _run_flags(p_snap)
    common(p_snap)
    p_snap.set_defaults(fn=_cmd_snapshot)

    p_sweep = sub.add_parser("sweep", help="escape-probability sweep over a grid")
    p_sweep.add_argument("--config", help="JSON file mirroring the sweep spec")
    p_sweep.add_argument("--vary", choices=("lambda", "alpha"),
                         help="which rate the grid varies")
    p_sweep.add_argument("--fixed-value", dest="fixed_value", type=float,
                         help="value of the rate that stays fixed")
    p_sweep.add_argument("--grid", type=partial(_csv_floats, flag="--grid"),
                         help="comma-separated grid of rate values")
    p_sweep.add_argument("--sizes", type=partial(_csv_floats, flag="--sizes"),
                         help="comma-separated torus side lengths")
    p_sweep.add_argument("--samples", dest="samples_per_point", type=int,
                         help="replicas per (size, grid value)")
    p_sweep.add_argument("--base-seed", dest="base_seed", type=int,
                         help="seed that determines every replica stream")
    p_sweep.add_argument("--geometry", choices=("cylinder", "torus"),
                         help="lattice boundary geometry (default cylinder)")
    p_sweep.add_argument("--csv", action="store_true", help="emit CSV instead of JSON")
    common(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_cross = sub.add_parser("crossing", help="estimate curve crossings from a sweep CSV")
    p_cross.add_argument("infile", help="sweep CSV file")
    common(p_cross)
    p_cross.set_defaults(fn=_cmd_crossing)

    p_verify = sub.add_parser("verify", help="oracle-equivalence and dominance audits")
    vsub = p_verify.add_subparsers(dest="verify_cmd", required=True)

    p_oracle = vsub.add_parser("oracle", help="reduction vs engine chi-squared")
    _add_graph_flags(p_oracle)
    p_oracle.add_argument("--lambda", dest="lam", type=float, required=True,
                          help="red spread rate")
    p_oracle.add_argument("--alpha", type=float, required=True,
                          help="red-to-blue conversion rate")
    p_oracle.add_argument("--samples", type=int, default=100_000,
                          help="sample count per side")
    p_oracle.add_argument("--seed", type=int, default=0, help="base seed")
    p_oracle.add_argument("--min-bin", type=int, default=8,
                          help="minimum pooled count per chi-squared bin")
    common(p_oracle)
    p_oracle.set_defaults(fn=_cmd_verify_oracle)

    p_dom = vsub.add_parser("dominance", help="X' <= X audit for a coupling")
    p_dom.add_argument("--coupling", choices=_COUPLINGS, required=True,
                       help="which coupling to audit")
    p_dom.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="unprimed red rate")
    p_dom.add_argument("--lambda-prime", dest="lam_prime", type=float, default=1.0,
                       help="primed red rate (<= --lambda)")
    p_dom.add_argument("--alpha", type=float, default=1.0,
                       help="unprimed conversion rate")
    p_dom.add_argument("--alpha-prime", dest="alpha_prime", type=float, default=1.0,
                       help="primed conversion rate (>= --alpha)")
    p_dom.add_argument("--n", type=int, help="unprimed star/complete size")
    p_dom.add_argument("--n-prime", dest="n_prime", type=int,
                       help="primed star/complete size (<= --n)")
    p_dom.add_argument("--offspring", type=int, help="tree offspring count")
    p_dom.add_argument("--depth", type=int, help="tree depth")
    p_dom.add_argument("--pairs", type=int, default=10_000,
                       help="coupled pairs to draw")
    p_dom.add_argument("--pairs-file", help="audit externally supplied pairs (JSON)")
    p_dom.add_argument("--seed", type=int, default=0, help="base seed")
    common(p_dom)
    p_dom.set_defaults(fn=_cmd_verify_dominance)

    p_bounds = sub.add_parser("bounds", help="critical-rate bounds, percolation sim")
    bsub = p_bounds.add_subparsers(dest="bounds_cmd", required=False)
    p_bounds.add_argument("--d", type=int, help="regular-tree degree (>= 3)")
    p_bounds.add_argument("--alpha", type=float, help="conversion rate")
    p_bounds.add_argument("--pc", type=float,
                          help="site-percolation threshold in (0, 1)")
    common(p_bounds)
    p_bounds.set_defaults(fn=_cmd_bounds, bounds_cmd=None)

    p_perc = bsub.add_parser("percolate", help="one good-site percolation draw")
    _add_graph_flags(p_perc)
    p_perc.add_argument("--lambda", dest="lam", type=float, required=True,
                        help="red spread rate")
    p_perc.add_argument("--alpha", type=float, required=True,
                        help="red-to-blue conversion rate")
    p_perc.add_argument("--seed", type=int, default=0, help="draw seed")
    common(p_perc)
    p_perc.set_defaults(fn=_cmd_bounds, bounds_cmd="percolate")

    return root


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if getattr(args, "command", None) == "bounds" and args.bounds_cmd is None:
        if args.d is None or args.alpha is None or args.pc is None:
            print("usage error: bounds requires --d, --alpha and --pc",
                  file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.fn(args)
    except _InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
