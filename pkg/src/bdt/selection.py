"""Picking one interpretable tree out of a sampled ensemble.

Three rules are offered: ``sc`` filters the ensemble down to the smallest
tree that agrees with the ensemble's confident and correct decisions, ``map``
takes the highest posterior score and ``mapw`` takes the most frequently
visited tree, where trees of the same shape and split features count as the
same tree when their thresholds are close.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DecisionTree, StateError, ThresholdSpace, check_gamma0, refit
from .ensemble import CONFIDENT_CORRECT, Ensemble, classify_with_envelope
from .likelihood import PriorConfig, log_marginal_likelihood, log_tree_prior

METHODS = ("sc", "map", "mapw")


@dataclass
class SelectionReport:
    """The chosen tree and how it was found.

    ``index`` points into the ensemble's chain order.  ``set_sizes`` holds
    the sizes of the three nested candidate sets of ``sc``; ``scores`` the
    per-tree log posterior scores of ``map``; ``group_weights`` the visit
    share of every ``mapw`` group, largest first.
    """

    tree: DecisionTree
    method: str
    index: int
    size: int
    set_sizes: tuple[int, int, int] | None = None
    coverage: int | None = None
    confident_correct: int | None = None
    scores: np.ndarray | None = None
    group_weights: np.ndarray | None = None
    groups: list[list[int]] | None = field(default=None, repr=False)

    def summary(self) -> dict:
        out = {"method": self.method, "index": self.index, "size": self.size, "leaves": self.tree.leaf_count}
        if self.set_sizes is not None:
            out["set_sizes"] = list(self.set_sizes)
            out["coverage"] = self.coverage
            out["confident_correct"] = self.confident_correct
        if self.scores is not None:
            out["score"] = float(self.scores[self.index])
        if self.group_weights is not None:
            out["group_count"] = len(self.group_weights)
            out["group_weight"] = float(self.group_weights[0])
        return out


def _nonempty(ens: Ensemble) -> None:
    if not ens.trees:
        raise StateError("ensemble is empty")


def _argbest(candidates, key) -> int:
    """First candidate (chain order) minimising ``key``."""
    return min(candidates, key=lambda i: (key(i), i))


def select_sc(ens: Ensemble, train: Dataset, gamma0: float) -> SelectionReport:
    """Smallest tree covering the ensemble's confident and correct decisions.

    1. S1: trees correct on the largest number of rows the ensemble
       classifies confidently and correctly.
    2. D1: the training rows without those the ensemble misclassifies.
    3. S2: trees of S1 with the fewest errors on D1.
    4. S3: trees of S2 with the fewest nodes; the first in chain order wins.

    Without any confident and correct rows step 1 keeps every tree.
    """
    _nonempty(ens)
    check_gamma0(gamma0, ens.class_count)
    env = classify_with_envelope(ens, train, gamma0)
    cc = np.array([o.status == CONFIDENT_CORRECT for o in env.outcomes])
    preds = ens.tree_predictions(train.features)
    correct = preds == train.labels[None, :]

    cover = correct[:, cc].sum(axis=1)
    s1 = np.flatnonzero(cover == cover.max())

    d1 = env.predicted == train.labels
    errors = (~correct[s1][:, d1]).sum(axis=1)
    s2 = s1[errors == errors.min()]

    sizes = np.array([ens.trees[i].node_count for i in s2])
    s3 = s2[sizes == sizes.min()]
    best = int(s3[0])
    return SelectionReport(
        ens.trees[best],
        "sc",
        best,
        ens.trees[best].node_count,
        set_sizes=(len(s1), len(s2), len(s3)),
        coverage=int(cover[best]),
        confident_correct=int(cc.sum()),
    )


def map_scores(ens: Ensemble, train: Dataset, prior: PriorConfig, space: ThresholdSpace | None = None) -> np.ndarray:
    """Log marginal likelihood plus log prior of every tree, refitted to ``train``."""
    _nonempty(ens)
    if space is None:
        h = ens.hyper
        space = ThresholdSpace.from_data(
            train,
            getattr(h, "thresholds", "continuous"),
            getattr(h, "p_min", 1),
        )
    cache: dict = {}
    out = np.empty(len(ens))
    for i, t in enumerate(ens.trees):
        key = (t.structure_key(), tuple(t.thresholds()))
        if key not in cache:
            fitted, _ = refit(t, train)
            cache[key] = log_marginal_likelihood(fitted, alpha=ens.alpha) + log_tree_prior(fitted, prior, train, space)
        out[i] = cache[key]
    return out


def select_map(ens: Ensemble, train: Dataset, prior: PriorConfig | None = None) -> SelectionReport:
    """Highest posterior score; ties go to the smaller tree, then chain order."""
    _nonempty(ens)
    if prior is None:
        prior = PriorConfig.from_hyper(ens.hyper) if ens.hyper is not None else PriorConfig()
    scores = map_scores(ens, train, prior)
    best = _argbest(range(len(ens)), lambda i: (-scores[i], ens.trees[i].node_count))
    return SelectionReport(ens.trees[best], "map", best, ens.trees[best].node_count, scores=scores)


def normalized_thresholds(tree: DecisionTree, ranges: np.ndarray) -> np.ndarray:
    """Split thresholds in preorder, min-max scaled per feature."""
    width = ranges[:, 1] - ranges[:, 0]
    width = np.where(width > 0, width, 1.0)
    return np.array([(s.rule.threshold - ranges[s.rule.feature, 0]) / width[s.rule.feature] for _, s in tree.splits()])


def group_trees(ens: Ensemble, tol: float) -> list[list[int]]:
    """Connected groups of equivalent trees, each listed in chain order.

    Two trees are linked when they share shape and split features and all
    their normalised thresholds differ by at most ``tol``.  Groups are
    ordered by their first member.
    """
    buckets: dict = {}
    for i, t in enumerate(ens.trees):
        buckets.setdefault(t.structure_key(), []).append(i)
    groups = []
    for members in buckets.values():
        if len(members) == 1:
            groups.append(members)
            continue
        Z = np.stack([normalized_thresholds(ens.trees[i], ens.feature_ranges) for i in members])
        parent = list(range(len(members)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a in range(len(members)):
            if Z.shape[1] == 0:
                close = np.arange(a + 1, len(members))
            else:
                close = a + 1 + np.flatnonzero(np.abs(Z[a + 1:] - Z[a]).max(axis=1) <= tol)
            for b in close:
                ra, rb = find(a), find(int(b))
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        comp: dict = {}
        for a in range(len(members)):
            comp.setdefault(find(a), []).append(members[a])
        groups.extend(comp.values())
    return sorted(groups, key=lambda g: g[0])


def select_mapw(ens: Ensemble, tol: float = 0.01) -> SelectionReport:
    """Representative of the most visited group of equivalent trees.

    The representative is the group's first tree in chain order.  Equal
    weights go to the group with the smaller representative, then to the
    earlier one.
    """
    _nonempty(ens)
    if tol < 0 or not math.isfinite(tol):
        raise ValueError("threshold tolerance must be a finite non-negative number")
    groups = group_trees(ens, tol)
    groups.sort(key=lambda g: (-len(g), ens.trees[g[0]].node_count, g[0]))
    weights = np.array([len(g) for g in groups], dtype=float) / len(ens)
    best = groups[0][0]
    return SelectionReport(
        ens.trees[best], "mapw", best, ens.trees[best].node_count, group_weights=weights, groups=groups
    )


def select(method: str, ens: Ensemble, train: Dataset | None = None, gamma0: float = 0.99,
           tol: float = 0.01, prior: PriorConfig | None = None) -> SelectionReport:
    if method == "sc":
        return select_sc(ens, train, gamma0)
    if method == "map":
        return select_map(ens, train, prior)
    if method == "mapw":
        return select_mapw(ens, tol)
    raise ValueError(f"method must be one of {METHODS}")


def write_scores(report: SelectionReport, ens: Ensemble, path) -> None:
    """Per-tree audit table of a ``map`` selection."""
    if report.scores is None:
        raise StateError("only map selections carry scores")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "score", "nodes", "chosen"])
        for i, s in enumerate(report.scores):
            w.writerow([i, repr(float(s)), ens.trees[i].node_count, int(i == report.index)])
