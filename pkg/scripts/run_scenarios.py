"""Run every scenario under scenarios/ and print status and wall time.

    python3 scripts/run_scenarios.py [--out out] [--only NAME ...] [--svg]
"""
import argparse
import glob
import os
import time

from radcomp.cli import main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(ROOT, "out"))
    ap.add_argument("--only", nargs="*", default=None, help="scenario names without .yaml")
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    paths = sorted(glob.glob(os.path.join(ROOT, "scenarios", "*.yaml")))
    if args.only:
        paths = [p for p in paths if os.path.splitext(os.path.basename(p))[0] in args.only]
    worst = 0
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        t0 = time.perf_counter()
        argv = [path, "--out", os.path.join(args.out, name), "--workers", "1"] + (["--svg"] if args.svg else [])
        code = main(argv)
        print(f"{name:24s} exit {code}  {time.perf_counter() - t0:7.1f}s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    raise SystemExit(run())
