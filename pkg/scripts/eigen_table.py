"""Discrete principal eigenvalue of the 1D r-Laplacian against the closed form, under refinement.

    python scripts/eigen_table.py [--r 2 3 1.5] [--length 1.0]
"""

import argparse

import numpy as np

from pqvar.domain import build_mesh
from pqvar.spectrum import principal_eigenpair


def exact(r, k, length):
    pi_r = 2.0 * np.pi / (r * np.sin(np.pi / r))
    return (r - 1.0) * (k * pi_r / length) ** r


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--r", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    ap.add_argument("--length", type=float, default=1.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    args = ap.parse_args()

    print(f"{'r':>5s} {'n':>5s} {'lambda_hat':>14s} {'exact':>14s} {'rel err':>10s}")
    for r in args.r:
        ref = exact(r, 1, args.length)
        for n in args.sizes:
            lam = principal_eigenpair(build_mesh(1, [0.0, args.length], n), r).lambda_hat
            print(f"{r:5.2f} {n:5d} {lam:14.8f} {ref:14.8f} {abs(lam - ref) / ref:10.2e}")
