"""Run the reglab experiment suites and write one CSV per experiment.

    python3 scripts/run_experiments.py all --grid 32 --seed 0 --out results/

Each suite runs at the requested grid and at twice that resolution; the
verdict line printed at the end compares the two.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from reglab import experiments as ex

RUNNERS = {
    "goodlambda": lambda a: ex.good_lambda_experiment(a.grid, a.seed, jobs=a.jobs),
    "normratio": lambda a: ex.norm_ratio_experiment(a.grid, a.seed, jobs=a.jobs),
    "pointwise": lambda a: ex.pointwise_experiment(a.grid, a.seed, jobs=a.jobs),
    "chain": lambda a: ex.chain_experiment(a.grid, a.seed, jobs=a.jobs),
    "weaktype": lambda a: ex.run_weak_type(a.grid, a.seed),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=[*RUNNERS, "all"])
    ap.add_argument("--grid", type=int, default=32, help="coarse cells per side")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(RUNNERS) if args.experiment == "all" else [args.experiment]
    failed = False
    for name in names:
        rep = RUNNERS[name](args)
        (out / f"{name}.csv").write_text(rep.csv())
        for key, plot in sorted(rep.plots.items()):
            (out / f"{key}.svg").write_text(plot)
        for note in rep.notes:
            print(f"  {name}: {note}", file=sys.stderr)
        print(f"{rep.verdict}  {name} ({rep.runtime:.1f} s) -> {out / f'{name}.csv'}")
        failed |= not rep.passed
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
