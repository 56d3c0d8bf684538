"""Sampler structure frequencies against the enumerated posterior on a tiny dataset.

Uses midpoint thresholds, one point per leaf and at most three leaves.

    python scripts/exact_posterior_check.py --steps 1000000
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from bdt.core import Dataset, Hyperparameters  # noqa: E402
from bdt.sampler import TreeSampler  # noqa: E402
from oracles import enumerate_posterior, marginal, shape_features, total_variation, tree_key  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=10)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    X = np.round(rng.uniform(0, 10, (args.rows, 2)), 1)
    y = (X[:, 0] + rng.normal(0, 2.5, args.rows) > 5).astype(int)
    exact = enumerate_posterior(X, y)
    h = Hyperparameters(p_min=1, thresholds="midpoints", sweep=False, max_leaves=3,
                        burn_in=0, post_burn_in=args.steps, thin=1)
    s = TreeSampler(Dataset(X, y, ("a", "b")), h)
    state, r = s.initial_state(), np.random.default_rng(1)
    tally = {}
    t = time.perf_counter()
    for _ in range(args.steps):
        state, *_ = s.step(state, r)
        k = tree_key(state.tree.root)
        tally[k] = tally.get(k, 0) + 1
    emp = {k: v / args.steps for k, v in tally.items()}
    ex_s, em_s = marginal(exact, shape_features), marginal(emp, shape_features)
    print(f"{len(exact)} trees, {time.perf_counter() - t:.0f}s")
    print(f"TV structure {total_variation(ex_s, em_s):.4f}  TV full {total_variation(exact, emp):.4f}")
    for key in sorted(ex_s, key=lambda k: -ex_s[k]):
        print(f"  {str(key):<28} exact {ex_s[key]:.4f}  sampled {em_s.get(key, 0.0):.4f}")


if __name__ == "__main__":
    main()
