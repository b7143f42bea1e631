"""Minimum convexity gap as the curvature of M is raised above the reference.

M has radial curvature K + s for the von Mangoldt K = 1/(1+r^2)^2 and each
s in the sweep; the batch is small so the sweep finishes in a few minutes.

    python3 scripts/curvature_shift_sweep.py [--n 20] [--shifts 0 0.05 0.1 0.2]
"""
import argparse
import warnings

import numpy as np

from radcomp.comparison import BatchConfig, verify_batch
from radcomp.manifolds import TestManifold
from radcomp.profile import solve_profile, von_mangoldt


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--shifts", type=float, nargs="*", default=[0.0, 0.05, 0.1, 0.2])
    args = ap.parse_args()
    ref = von_mangoldt()
    print(f"{'shift':>6} {'min gap':>11} {'median gap':>11}  counts")
    for s in args.shifts:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prof = solve_profile(lambda r, s=s: np.asarray(ref.K(r), float) + s, r_stop=16.0)
        m = TestManifold("revolution", profile=prof)
        cfg = BatchConfig(m, ref, (0.0, 0.0), (1.0, 0.0), n_triangles=args.n, seed=0, n_samples=33,
                          r_range=(0.0, 4.0), angle_monotone_nodes=0)
        rep = verify_batch(cfg)
        gaps = np.concatenate([t.convexity_gaps for t in rep.triangles])
        print(f"{s:6.3f} {rep.min_gap:11.3e} {np.median(gaps):11.3e}  {rep.counts}")


if __name__ == "__main__":
    run()
