"""Solve the reference problem and print a short report.

    python scripts/run_reference.py [--config configs/reference.json] [--out runs/reference]
"""

import argparse
import json
from pathlib import Path

from pqvar.experiment import _clean, run_problem

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "reference.json"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "reference"))
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    res = run_problem(args.config, args.out, seed=args.seed)
    print(f"lambda = {res['lambda']:.6f}")
    for k, v in res["thresholds"].items():
        print(f"  {k:8s} {v}")
    for name, task in res["tasks"].items():
        brief = {k: task[k] for k in ("status", "classification", "energy", "converged", "verdict") if k in task}
        print(f"{name:12s} {json.dumps(_clean(brief))}")
    print("nontrivial:", ", ".join(res["nontrivial_solutions"]) or "none")
    print("outputs in", args.out)
