"""Per-move acceptance rates on default synthetic data across proposal widths.

    python scripts/acceptance_study.py --burnin 20000 --stds 0.05 0.1 0.3
"""

import argparse
import time

from bdt.core import Hyperparameters
from bdt.data import SynthConfig, generate_synthetic_stca
from bdt.sampler import MoveKind, run_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--burnin", type=int, default=20_000)
    ap.add_argument("--postburnin", type=int, default=10_000)
    ap.add_argument("--stds", type=float, nargs="+", default=[0.3])
    ap.add_argument("--pmin", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = generate_synthetic_stca(SynthConfig(seed=args.seed))
    print("std     all     birth   death   split   rule    leaves  secs")
    for std in args.stds:
        h = Hyperparameters(p_min=args.pmin, proposal_std=std, burn_in=args.burnin,
                            post_burn_in=args.postburnin, seed=args.seed)
        t = time.perf_counter()
        ens, diag = run_chain(data, h)
        rates = [diag.acceptance_rate("post-burn-in", m) for m in MoveKind]
        leaves = sum(t.leaf_count for t in ens.trees) / len(ens)
        print(f"{std:<7.3f} {diag.acceptance_rate('post-burn-in'):.4f}  "
              + "  ".join(f"{r:.4f}" for r in rates)
              + f"  {leaves:6.1f}  {time.perf_counter() - t:5.1f}")


if __name__ == "__main__":
    main()
