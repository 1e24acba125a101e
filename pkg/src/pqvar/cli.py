"""``pqvar solve|sweep|eigen`` command line."""

from __future__ import annotations

import argparse
import json
import sys

from .experiment import ConfigError, _clean, run_eigen, run_problem, run_sweep


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqvar", description="Weighted (p,q)-Laplacian laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads")

    p = sub.add_parser("solve", help="solve one configured problem")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("sweep", help="run a lambda sweep")
    p.add_argument("config")
    common(p)
    p = sub.add_parser("eigen", help="principal and second eigenvalue of the r-Laplacian")
    p.add_argument("config")
    p.add_argument("--r", type=float, required=True, help="exponent r > 1")
    p.add_argument("--weight", choices=("a1", "a2"), default=None)
    common(p)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be a nonnegative integer", file=sys.stderr)
        return 2
    try:
        if args.command == "solve":
            res = run_problem(args.config, args.out, seed=args.seed, threads=args.threads)
            brief = {"lambda": res["lambda"], "thresholds": res["thresholds"],
                     "nontrivial_solutions": res["nontrivial_solutions"], "ordering_ok": res["ordering_ok"]}
        elif args.command == "sweep":
            res = run_sweep(args.config, args.out, seed=args.seed, threads=args.threads)
            brief = {k: res[k] for k in ("thresholds", "lambda_c", "lambda_c_error", "grid_step", "rows")}
        else:
            brief = run_eigen(args.config, args.r, args.out, args.weight)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_clean(brief), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
