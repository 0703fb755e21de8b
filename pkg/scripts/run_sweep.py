#!/usr/bin/env python3
"""Regenerate the counterfeit double-acceptance curves.

Writes one CSV per cloning strategy with exact and Monte-Carlo acceptance
probabilities over a threshold grid, the data behind the step-at-5/6 figure.
"""
import argparse
from fractions import Fraction
from pathlib import Path

from qtokens.attacks import PAIR_STRATEGIES
from qtokens.cli import ExperimentConfig, cmd_sweep_double_accept


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 1000])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="out")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = tuple(Fraction(k, 100) for k in range(70, 96))
    for strategy in sorted(PAIR_STRATEGIES):
        path = outdir / f"double_accept_{strategy}.csv"
        cmd_sweep_double_accept(ExperimentConfig(
            seed=args.seed, trials=args.trials, sizes=tuple(args.sizes),
            ftol_grid=grid, strategy=strategy, out=str(path)))
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
