"""Ensemble against sc/map/mapw single trees over repeated train/test halves.

    python scripts/crossval_study.py --folds 5 --out cv.csv
"""

import argparse

from bdt.core import Hyperparameters
from bdt.crossval import cross_validate, summarize, write_results
from bdt.data import SynthConfig, generate_synthetic_stca, make_folds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--burnin", type=int, default=100_000)
    ap.add_argument("--postburnin", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    data = generate_synthetic_stca(SynthConfig(seed=args.data_seed))
    h = Hyperparameters(burn_in=args.burnin, post_burn_in=args.postburnin, seed=args.seed)
    results = cross_validate(data, make_folds(data, args.folds, seed=args.seed), h)
    for r in results:
        print(f"fold {r.fold}: ensemble {r.ensemble_error:.3f}  "
              + "  ".join(f"{m} {r.errors[m]:.3f} ({r.sizes[m]} nodes)" for m in ("sc", "map", "mapw")))
    print(" ".join(f"{k}={v:.4f}" for k, v in summarize(results).items()))
    if args.out:
        write_results(results, args.out)


if __name__ == "__main__":
    main()
