"""Shooting distance against the spherical law of cosines.

Pairs are weighted towards the hard cases: nearly meridional pairs, pairs
near the antipode and points close to either vertex.

    python3 scripts/stress_distance.py [--n 3000] [--seed 0]
"""
import argparse
import math
import time

import numpy as np

from radcomp.profile import sphere
from radcomp.surface import Surface, SurfacePoint


def law_of_cosines(r1, t1, r2, t2):
    c = math.cos(r1) * math.cos(r2) + math.sin(r1) * math.sin(r2) * math.cos(t1 - t2)
    return math.acos(max(-1.0, min(1.0, c)))


def sample(rng):
    kind = rng.integers(4)
    r1, r2 = rng.uniform(0.0, math.pi, 2)
    t1 = rng.uniform(-math.pi, math.pi)
    if kind == 0:
        t2 = t1 + rng.choice([-1, 1]) * 10 ** rng.uniform(-9, -2)
    elif kind == 1:
        t2 = t1 + math.pi + rng.choice([-1, 1]) * 10 ** rng.uniform(-9, -2)
    elif kind == 2:
        r1 = 10 ** rng.uniform(-7, -1)
        t2 = rng.uniform(-math.pi, math.pi)
    else:
        t2 = rng.uniform(-math.pi, math.pi)
    return r1, t1, r2, t2


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    s = Surface(sphere())
    errs = []
    t0 = time.perf_counter()
    for _ in range(args.n):
        r1, t1, r2, t2 = sample(rng)
        errs.append(abs(s.dist(SurfacePoint(r1, t1), SurfacePoint(r2, t2)) - law_of_cosines(r1, t1, r2, t2)))
    errs = np.array(errs)
    print(f"{args.n} pairs in {time.perf_counter() - t0:.1f}s")
    print(f"max error {errs.max():.2e}, 99th percentile {np.quantile(errs, 0.99):.2e}")
    print(f"pairs above 1e-8: {int(np.sum(errs > 1e-8))}")
    return 0 if errs.max() <= 1e-7 else 1


if __name__ == "__main__":
    raise SystemExit(run())
