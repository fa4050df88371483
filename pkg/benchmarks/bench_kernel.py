#!/usr/bin/env python3
"""Compiled vs pure-Python LazySP kernel.

Runs the same seeded trials through both kernels, checks that every trial
returns the identical path and query trace, and reports per-trial time.

    python3 benchmarks/bench_kernel.py --trials 50 --out bench.csv
"""

import argparse
import csv
import sys
import time

from lazylab import BACKEND
from lazylab.constructions import lower_bound_chain, random_multigraph
from lazylab.oracle import BernoulliOracle, prf
from lazylab.search import lazysp

CASES = [
    ("chain n=64 p=0.5", lambda: lower_bound_chain(64, 0.5), 0.5),
    ("chain n=256 p=0.25", lambda: lower_bound_chain(256, 0.25), 0.25),
    ("random n=256 ef=3", lambda: random_multigraph(256, 3, 7), 0.5),
    ("random n=1024 ef=3", lambda: random_multigraph(1024, 3, 7), 0.5),
]


def time_kernel(g, p, trials, seed, selector, pure):
    traces = []
    lazysp(g, BernoulliOracle(g, p, 0), selector, pure=pure)  # build and warm the kernel
    start = time.perf_counter()
    for i in range(trials):
        r = lazysp(g, BernoulliOracle(g, p, prf(seed, i)), selector, pure=pure)
        traces.append((r.path.edges if r.path else None, tuple(r.trace.queried)))
    return (time.perf_counter() - start) / trials, traces


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--selector", default="forward", choices=("forward", "backward", "bisection"))
    ap.add_argument("--out", default=None, help="optional CSV output")
    args = ap.parse_args(argv)

    if BACKEND != "cython":
        print("compiled kernel not available; only the pure-Python kernel would run", file=sys.stderr)
        return 1
    rows = []
    for name, make, p in CASES:
        g = make()
        fast, t_fast = time_kernel(g, p, args.trials, args.seed, args.selector, pure=False)
        slow, t_slow = time_kernel(g, p, args.trials, args.seed, args.selector, pure=True)
        same = t_fast == t_slow
        mean_cost = sum(len(q) for _, q in t_fast) / len(t_fast)
        rows.append({"case": name, "edges": g.m, "mean_cost": round(mean_cost, 2),
                     "compiled_ms": round(fast * 1e3, 3), "python_ms": round(slow * 1e3, 3),
                     "speedup": round(slow / fast, 1), "identical": same})
        print(f"{name:<20} |E|={g.m:<7} cost={mean_cost:8.1f} compiled={fast*1e3:8.2f} ms "
              f"python={slow*1e3:9.2f} ms  x{slow/fast:5.1f}  identical={same}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
