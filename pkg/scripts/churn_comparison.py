#!/usr/bin/env python3
"""Cumulative qubit consumption under Poisson churn, per backend.

Runs one seeded membership-event sequence against the live tree and prices
it under every requested backend: the tree protocol with each session family
and the whole-group star protocols.  Writes one CSV per backend.

    python scripts/churn_comparison.py --initial 1024 --steps 500 --out series/
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from qgka.workload import (
    ALL_BACKENDS,
    WorkloadConfig,
    compare_backends,
    series_csv,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--initial", type=int, default=1024)
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--xi", type=float, default=0.25)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--backends", default=",".join(ALL_BACKENDS))
    ap.add_argument("--out", default="churn_series")
    args = ap.parse_args()

    config = WorkloadConfig(
        initial_group_size=args.initial,
        degree=args.degree,
        key_len=args.n,
        xi=args.xi,
        lam=args.lam,
        steps=args.steps,
        seed=args.seed,
    )
    backends = [b for b in args.backends.split(",") if b]
    series = compare_backends(config, backends)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    header = config.as_header_items()
    for backend in backends:
        path = outdir / f"{backend}.csv"
        path.write_text(series_csv(series[backend], header + [("backend", backend)]))
        final = series[backend][-1].qubits_prepared
        print(f"{backend:14s} cumulative qubits {final:,.1f} -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
