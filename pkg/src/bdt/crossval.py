"""Train/test comparison of the ensemble against the three single-tree picks."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import BDTError, Dataset, Hyperparameters
from .data import FoldPlan
from .ensemble import Ensemble
from .likelihood import PriorConfig
from .sampler import TreeSampler
from .selection import select_map, select_mapw, select_sc

METHODS = ("sc", "map", "mapw")


class FoldError(BDTError):
    pass


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    ensemble_error: float
    errors: dict[str, float]
    sizes: dict[str, int]
    acceptance: float | None
    converged: bool | None

    def row(self) -> list:
        out = [self.fold, self.n_train, self.n_test, self.ensemble_error]
        out += [self.errors[m] for m in METHODS] + [self.sizes[m] for m in METHODS]
        return out + [self.acceptance, self.converged]


HEADER = (
    ["fold", "n_train", "n_test", "ensemble_error"]
    + [f"{m}_error" for m in METHODS]
    + [f"{m}_size" for m in METHODS]
    + ["acceptance", "converged"]
)


def ensemble_error(ens: Ensemble, test: Dataset) -> float:
    """Misclassification rate of the averaged class probabilities."""
    pred = np.argmax(ens.predict_proba(test.features), axis=1)
    return float(np.mean(pred != test.labels))


def fold_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent per-fold seed sequences spawned from one root seed."""
    return np.random.SeedSequence(seed).spawn(count)


def run_fold(data: Dataset, train_idx, test_idx, hyper: Hyperparameters, seed_seq,
             fold: int = 0, gamma0: float = 0.99, tol: float = 0.01) -> FoldResult:
    train, test = data.subset(train_idx), data.subset(test_idx)
    ens, diag = TreeSampler(train, hyper).run(np.random.default_rng(seed_seq))
    picks = {
        "sc": select_sc(ens, train, gamma0),
        "map": select_map(ens, train, PriorConfig.from_hyper(hyper)),
        "mapw": select_mapw(ens, tol),
    }
    errors = {m: float(np.mean(r.tree.predict(test.features) != test.labels)) for m, r in picks.items()}
    rate = diag.acceptance_rate("post-burn-in")
    return FoldResult(
        fold,
        train.n,
        test.n,
        ensemble_error(ens, test),
        errors,
        {m: r.size for m, r in picks.items()},
        None if np.isnan(rate) else rate,
        diag.converged,
    )


def _job(args):
    data, tr, te, hyper, ss, i, gamma0, tol = args
    try:
        return run_fold(data, tr, te, hyper, ss, i, gamma0, tol)
    except Exception as exc:  # noqa: BLE001 - reraised with the fold named
        raise FoldError(f"fold {i} failed: {exc}") from exc


def cross_validate(data: Dataset, plan: FoldPlan, hyper: Hyperparameters, gamma0: float = 0.99,
                   tol: float = 0.01, jobs: int = 1) -> list[FoldResult]:
    """Run every fold of ``plan``; results come back in fold order.

    Fold ``i`` seeds its chain from the ``i``-th child of ``hyper.seed``, so
    results do not depend on ``jobs``.
    """
    seeds = fold_seeds(hyper.seed, len(plan))
    args = [(data, tr, te, hyper, seeds[i], i, gamma0, tol) for i, (tr, te) in enumerate(plan)]
    if jobs <= 1:
        return [_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, args))


def summarize(results: list[FoldResult]) -> dict[str, float]:
    out = {"ensemble_error": float(np.mean([r.ensemble_error for r in results]))}
    for m in METHODS:
        out[f"{m}_error"] = float(np.mean([r.errors[m] for r in results]))
        out[f"{m}_size"] = float(np.mean([r.sizes[m] for r in results]))
    return out


def write_results(results: list[FoldResult], path) -> None:
    """One row per fold plus a ``mean`` row."""
    s = summarize(results)
    acc = [r.acceptance for r in results if r.acceptance is not None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in results:
            w.writerow(["" if v is None else v for v in r.row()])
        w.writerow(
            ["mean", np.mean([r.n_train for r in results]), np.mean([r.n_test for r in results]), s["ensemble_error"]]
            + [s[f"{m}_error"] for m in METHODS]
            + [s[f"{m}_size"] for m in METHODS]
            + [np.mean(acc) if acc else "", ""]
        )

