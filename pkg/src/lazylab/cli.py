"""Command-line entry point: ``lazylab <subcommand> ...``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path as FsPath

from . import harness
from .constructions import (
    GadgetParams,
    example_graph,
    lower_bound_chain,
    random_multigraph,
    structure_a,
    structure_b,
    theorem2_gadget,
)
from .multigraph import Path, graph_to_json, load_graph, load_graph_annotated, save_graph
from .optimal import mdp_optimal, save_policy
from .oracle import BernoulliOracle, Subgraph, read_trace_csv
from .search import RunResult, _shortest_within, verify_termination

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SELECTORS = ("forward", "backward", "bisection")


class UsageError(Exception):
    pass


def _load_config(path: str) -> dict:
    p = FsPath(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        if p.suffix == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc


def _write(obj, args, default_fmt="json") -> None:
    fmt = args.format or default_fmt
    if args.out:
        harness.emit_report(obj, fmt, args.out)
    else:
        sys.stdout.write(harness.report_bytes(obj, fmt).decode())


def _graph_spec(args) -> dict:
    if getattr(args, "graph", None):
        return {"generator": "file", "path": args.graph}
    spec = {"generator": args.generator}
    if args.generator in ("chain", "random"):
        spec["n"] = args.n
    if args.generator == "chain":
        spec["p"] = 0.5 if args.p is None else args.p
    if args.generator == "random":
        spec["edge_factor"] = args.edge_factor
        if args.graph_seed is not None:
            spec["seed"] = args.graph_seed
    if args.generator == "series":
        spec["length"] = args.n
    if args.generator == "parallel":
        spec["copies"] = args.n
    return spec


def cmd_run(args) -> int:
    if args.config:
        d = _load_config(args.config)
        for key, val in (("base_seed", args.seed), ("trials", args.trials), ("p", args.p),
                         ("output", args.out), ("selector", args.selector)):
            if val is not None:
                d[key] = val
    else:
        d = {
            "name": args.name,
            "graph": _graph_spec(args),
            "algorithm": args.algorithm,
            "selector": args.selector or "forward",
            "p": 0.5 if args.p is None else args.p,
            "trials": 1000 if args.trials is None else args.trials,
            "base_seed": args.seed or 0,
            "output": args.out,
            "thresholds": args.threshold or [],
            "verify_fraction": args.verify_fraction,
            "workers": args.workers,
        }
    try:
        cfg = harness.ExperimentConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    summary = harness.run_experiment(cfg)
    args.out = args.out or cfg.output
    _write(summary, args, "csv")
    print(f"{cfg.name}: trials={summary.trials} mean={summary.mean:.4f} std={summary.std:.4f} "
          f"failures={summary.failures} verification_failures={summary.verification_failures}",
          file=sys.stderr)
    return 1 if summary.failures or summary.verification_failures else 0


def cmd_sweep(args) -> int:
    rows = harness.theorem3_sweep(args.n, args.p, args.delta, args.trials, args.seed or 0,
                                  families=args.families, selector=args.selector or "forward",
                                  workers=args.workers)
    _write(rows, args, "csv")
    bad = [r for r in rows if r["flagged"] or r["yes_bound_violations"] or r["connective_violations"]
           or r["verification_failures"] or r["failures"]]
    for r in rows:
        print(f"{r['family']:>6} n={r['n']:<4} p={r['p']:<5} threshold={r['threshold']:.1f} "
              f"exceed={r['exceed_rate']:.4f} flagged={r['flagged']}", file=sys.stderr)
    return 1 if bad else 0


def _params(args) -> GadgetParams:
    return GadgetParams(kappa=args.kappa, kappa_prime=args.kappa_prime, epsilon=args.epsilon,
                        delta=args.delta, ell=args.ell, ell_prime=args.ell_prime)


def cmd_gadget(args) -> int:
    try:
        params = _params(args)
        report = harness.gadget_comparison(params, trials=args.trials or 1000, base_seed=args.seed or 0,
                                           mode=args.mode, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(report, args, "json")
    if args.mode == "accounting":
        return 0 if report["ledger"]["net_rounded"] < 0 else 1
    if args.mode == "montecarlo":
        fails = sum(a["failures"] + a["verification_failures"] for a in report["algorithms"].values())
        return 1 if fails else 0
    return 0 if report["gap_best_lazysp_minus_optimal"] >= -1e-9 else 1


def cmd_chain(args) -> int:
    n, p = args.n, args.p if args.p is not None else 0.5
    trials = args.trials or 10_000
    bound = harness.chain_tail_bound(n, p)
    sigma = math.sqrt(bound * (1 - bound) / trials)
    rows, ok = [], True
    algos = [("lazysp", s) for s in (args.selector and [args.selector] or SELECTORS)]
    for algo, sel in algos:
        cfg = harness.ExperimentConfig(name=f"{algo}-{sel}", graph={"generator": "chain", "n": n, "p": p},
                                       algorithm=algo, selector=sel, p=p, trials=trials,
                                       base_seed=args.seed or 0, thresholds=(n - 1,), workers=args.workers)
        s = harness.run_experiment(cfg)
        rate = s.threshold_probs[repr(float(n - 1))]
        passed = rate <= bound + 3 * sigma and not s.failures and not s.verification_failures
        ok &= passed
        rows.append({"algorithm": cfg.name, "n": n, "p": p, "trials": trials, "mean_cost": s.mean,
                     "rate_cost_le_n_minus_1": rate, "bound": bound, "sigma": sigma, "pass": passed})
    _write(rows, args, "csv")
    return 0 if ok else 1


def cmd_certify(args) -> int:
    try:
        g = load_graph(args.graph)
        sub = Subgraph.from_json(g, FsPath(args.subgraph).read_text())
        trace = read_trace_csv(args.trace)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    if args.path is not None:
        edges = [int(x) for x in args.path.split(",") if x.strip() and x.strip() != "none"]
        path = Path.from_edges(g, edges) if edges else None
    else:
        path = _shortest_within(g, [e for e, a in trace.queried if a])
    ok = verify_termination(g, RunResult(g, path, trace), sub)
    shown = "none" if path is None else ",".join(map(str, path.edges))
    print(f"{'CERTIFIED' if ok else 'NOT CERTIFIED'} queries={len(trace.queried)} path={shown}")
    return 0 if ok else 1


def cmd_generate(args) -> int:
    kind = args.kind
    annotations = None
    if kind == "example":
        g, sub = example_graph()
    elif kind == "chain":
        g = lower_bound_chain(args.n, args.p if args.p is not None else 0.5)
    elif kind == "random":
        g = random_multigraph(args.n, args.edge_factor, args.seed or 0)
    elif kind in ("gadget", "structure-a", "structure-b"):
        params = _params(args)
        if kind == "gadget":
            gad = theorem2_gadget(params)
            g, annotations = gad.graph, gad.annotations()
        elif kind == "structure-a":
            g = structure_a(params.kappa, params.ell).as_graph()
        else:
            g = structure_b(params.kappa_prime, params.ell_prime).as_graph()
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown kind {kind}")
    if args.out:
        save_graph(g, args.out, annotations)
    else:
        sys.stdout.write(graph_to_json(g, annotations))
    if args.subgraph_out:
        if kind == "example" and args.p is None:
            real = sub
        else:
            real = BernoulliOracle(g, args.p if args.p is not None else 0.5, args.seed or 0).realize()
        FsPath(args.subgraph_out).write_text(real.to_json())
    return 0


def cmd_mdp(args) -> int:
    if args.graph:
        g, _ = load_graph_annotated(args.graph)
    else:
        g = harness.build_experiment_graph(_graph_spec(args))[0]
    try:
        sol = mdp_optimal(g, args.p if args.p is not None else 0.5, prune=not args.no_prune, cap=args.cap)
    except Exception as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        save_policy(sol, args.out)
    else:
        sys.stdout.write(sol.to_json())
    print(f"optimal expected cost {sol.expected_cost:.12g} ({sol.states_evaluated} states)", file=sys.stderr)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--selector", choices=SELECTORS, default=None)
    p.add_argument("--workers", type=int, default=1)


def _add_graph(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", default=None, help="graph JSON file")
    p.add_argument("--generator", default="example",
                   choices=("example", "chain", "random", "series", "parallel"))
    p.add_argument("--n", type=int, default=16, help="vertices (chain/random) or edge count (series/parallel)")
    p.add_argument("--edge-factor", type=float, default=3.0)
    p.add_argument("--graph-seed", type=int, default=None)


def _add_gadget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=int, default=2)
    p.add_argument("--kappa-prime", type=int, default=2)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--ell-prime", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lazylab", description="Edge-query experiments for lazy shortest path search.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a config file or flags")
    _add_common(p)
    _add_graph(p)
    p.add_argument("--config", default=None, help="JSON or TOML experiment config")
    p.add_argument("--name", default="experiment")
    p.add_argument("--algorithm", choices=harness.ALGORITHMS, default="lazysp")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--threshold", type=float, action="append")
    p.add_argument("--verify-fraction", type=float, default=1.0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="high-probability query budget grid for connective selectors")
    _add_common(p)
    p.add_argument("--n", type=int, nargs="+", default=[16, 64, 256])
    p.add_argument("--p", type=float, nargs="+", default=[0.25, 0.5, 0.9])
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--families", nargs="+", choices=("random", "chain"), default=["random", "chain"])
    p.set_defaults(func=cmd_sweep, trials=1000)

    p = sub.add_parser("gadget", help="two-phase algorithm against LazySP on the gadget")
    _add_common(p)
    _add_gadget(p)
    p.add_argument("--mode", choices=("montecarlo", "accounting", "exact"), default="montecarlo")
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("chain", help="lower-bound chain tail check")
    _add_common(p)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--p", type=float, default=None)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("certify", help="check a query trace against a graph and its realization")
    p.add_argument("--graph", required=True)
    p.add_argument("--subgraph", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--path", default=None, help="claimed path as comma-separated edge ids, or 'none'")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("generate", help="write a construction graph as JSON")
    p.add_argument("kind", choices=("example", "chain", "random", "gadget", "structure-a", "structure-b"))
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--edge-factor", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--subgraph-out", default=None, help="also write a realization")
    _add_gadget(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("mdp", help="solve for the optimal query policy and export it")
    _add_graph(p)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--cap", type=int, default=18)
    p.set_defaults(func=cmd_mdp)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lazylab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
