"""Seed-ensemble calibration of the population-79 scenario.

For each candidate setting the scenario is run over a block of seeds and the
number of dips passing the module-default gates is summarised. The frozen
scenario keeps the setting whose ensemble mean sits closest to 51 with the
largest share of seeds inside 51 +- 5.

Example::

    python scripts/calibrate_gates.py --seeds 32
    python scripts/calibrate_gates.py --diffusion 0.35 0.45 0.55 --prominence 0.03
"""

import argparse
from collections import Counter

import numpy as np

from pcwqd.pipeline import SCENARIO_SEED, run_experiment, scenario_experiment

TARGET, TOL = 51, 5


def ensemble(seeds, diffusion, prominence):
    counts, reasons = [], Counter()
    for s in seeds:
        exp = scenario_experiment(seed=s, population={"diffusion_fraction": diffusion},
                                  detect={"min_prominence": prominence})
        st = run_experiment(exp).results["statistics"]
        counts.append(st["fitted"])
        reasons.update(st["rejected"])
    return np.array(counts), reasons


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=32, help="ensemble size")
    ap.add_argument("--first-seed", type=int, default=SCENARIO_SEED)
    ap.add_argument("--diffusion", type=float, nargs="+", default=[0.45])
    ap.add_argument("--prominence", type=float, nargs="+", default=[0.03])
    args = ap.parse_args(argv)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    for diff in args.diffusion:
        for prom in args.prominence:
            c, reasons = ensemble(seeds, diff, prom)
            inside = np.mean(np.abs(c - TARGET) <= TOL)
            mean_rej = {k: round(v / len(c), 1) for k, v in sorted(reasons.items())}
            print(f"diffusion={diff:.2f} prominence={prom:.3f}  pass = {c.mean():.1f} +- {c.std(ddof=1):.1f}"
                  f"  within {TARGET}+-{TOL}: {inside:.0%}  mean rejections {mean_rej}")


if __name__ == "__main__":
    main()
