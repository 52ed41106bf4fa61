#!/usr/bin/env python3
"""Generate a directory of synthetic convex QPs in QPS format for `bench`.

Each instance plants the unconstrained minimizer of a random PSD quadratic
strictly inside a random polytope (plus a box), so the optimal value is known
in closed form and is written to the fstar.json sidecar alongside the .qps
files.

Usage:
    python benchmarks/make_problems.py --out /tmp/qps --count 20 --n 30 --m 40
    cfpopt bench --problems /tmp/qps --fstar-file /tmp/qps/fstar.json --out /tmp/rep
"""

import argparse
import json
from pathlib import Path

import numpy as np

from cfpopt.model import AffineConstraint, Bounds, Problem, QuadraticFunction
from cfpopt.qps import write_qps


def planted_instance(seed, n, m):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    Q = M @ M.T + 0.1 * np.eye(n)
    xstar = rng.standard_normal(n)
    c = -Q @ xstar
    fstar = float(0.5 * xstar @ (Q @ xstar) + c @ xstar)
    rows = []
    for _ in range(m):
        a = rng.standard_normal(n)
        slack = 0.2 + abs(rng.standard_normal())
        if rng.random() < 0.3:
            lo = float(a @ xstar) - slack
            rows.append(AffineConstraint.interval(a, lo, lo + 2 * slack))
        else:
            rows.append(AffineConstraint.leq(a, float(a @ xstar) + slack))
    margin = 2.0 + np.abs(rng.standard_normal(n))
    bounds = Bounds(xstar - margin, xstar + margin)
    name = f"PLANT{seed:03d}"
    problem = Problem(QuadraticFunction(Q, c), rows, bounds=bounds, n=n, name=name)
    return problem, fstar


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--n", type=int, default=20, help="variables per instance")
    ap.add_argument("--m", type=int, default=30, help="rows per instance")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fstars = {}
    for i in range(args.count):
        problem, fstar = planted_instance(args.seed + i, args.n, args.m)
        (out / f"{problem.name.lower()}.qps").write_text(write_qps(problem))
        fstars[problem.name] = fstar
    (out / "fstar.json").write_text(json.dumps(fstars, indent=2) + "\n")
    print(f"wrote {args.count} instances and fstar.json under {out}")


if __name__ == "__main__":
    main()
