#!/usr/bin/env python3
"""Tabulate the average per-event qubit cost against the tree degree.

Reproduces the degree-optimum curves: for each decoy proportion, the mean
join/leave cost over a degree grid at a fixed group size, with the
cost-minimizing degree flagged per proportion.

    python scripts/degree_sweep.py --N 1024 --out sweep.csv
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from qgka.cost import sweep_degree


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--xi-list", default="0.25,0.5,0.75,1.0")
    ap.add_argument("--d-min", type=int, default=2)
    ap.add_argument("--d-max", type=int, default=16)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    xi_values = [float(x) for x in args.xi_list.split(",")]
    result = sweep_degree(args.N, args.n, xi_values, range(args.d_min, args.d_max + 1))
    lines = ["xi,d,avg_cost"]
    lines += [f"{xi!r},{d},{cost!r}" for xi, d, cost in result.rows()]
    for xi in xi_values:
        lines.append(f"# argmin xi={xi!r}: d={result.argmin[xi]}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
