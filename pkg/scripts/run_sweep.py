"""Run a lambda sweep and print the existence table.

    python scripts/run_sweep.py [--config configs/sweep.json] [--out runs/sweep] [--threads 4]
"""

import argparse
import csv
from pathlib import Path

from pqvar.experiment import run_sweep

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "sweep.json"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "sweep"))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    res = run_sweep(args.config, args.out, seed=args.seed, threads=args.threads)
    with open(Path(args.out) / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    cols = [c for c in ("lambda", "pos_found", "neg_found", "nodal_found", "pos_energy") if c in rows[0]]
    print("  ".join(f"{c:>12s}" for c in cols))
    def cell(v):
        try:
            return f"{float(v):12.5g}"
        except ValueError:
            return f"{v:>12s}"

    for r in rows:
        print("  ".join(cell(r[c]) for c in cols))
    th = res["thresholds"]
    print(f"lam1_q = {th['lam1_q']:.6f}   lambda_c = {res['lambda_c']}   grid step = {res['grid_step']}")
