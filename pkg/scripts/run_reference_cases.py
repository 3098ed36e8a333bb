#!/usr/bin/env python3
"""Reproduce the reference experiments: plain baseline plus case A (max-min
power) and case B (min-max delay spread) at 60 GHz and 2.4 GHz.

Writes one artifact directory per run under --out. Full scale takes tens of
minutes; use --quick for a fast smoke pass.
"""

import argparse
import time

from tilewave.cli import Scenario, run

CASES = [
    ("plain-60ghz", dict(case="plain", frequency_hz=60e9)),
    ("plain-2.4ghz", dict(case="plain", frequency_hz=2.4e9)),
    ("case-a-60ghz", dict(case="case_a", frequency_hz=60e9)),
    ("case-b-60ghz", dict(case="case_b", frequency_hz=60e9, threshold_dbm=1.0)),
    ("case-a-2.4ghz", dict(case="case_a", frequency_hz=2.4e9)),
    ("case-b-2.4ghz", dict(case="case_b", frequency_hz=2.4e9, threshold_dbm=30.0)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/reference")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="20k rays, population 8, 5 generations")
    args = ap.parse_args()

    overrides = dict(seed=args.seed, jobs=args.jobs)
    if args.quick:
        overrides.update(rays=20_000, population=8, generations=5)

    for name, fields in CASES:
        scenario = Scenario(out_dir=f"{args.out}/{name}", **fields, **overrides)
        t0 = time.time()
        code = run(scenario)
        print(f"{name}: exit {code} in {time.time() - t0:.0f}s "
              f"-> {scenario.out_dir}/summary.txt")


if __name__ == "__main__":
    main()
