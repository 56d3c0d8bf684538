"""Integrated leaf likelihood and tree priors, all in log space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .core import (
    ConfigError,
    Dataset,
    DecisionTree,
    InputError,
    Leaf,
    StateError,
    ThresholdSpace,
    refit,
)


@dataclass(frozen=True)
class PriorConfig:
    """Tree prior.

    ``uniform-leaves`` spreads mass evenly over leaf counts up to
    ``max_leaves`` and over tree shapes for a given leaf count.  ``chipman``
    splits a node at depth ``d`` with probability
    ``gamma_split * (1 + d) ** -delta_split``.  Both include the uniform
    prior over split features and thresholds.
    """

    kind: str = "uniform-leaves"
    gamma_split: float = 0.95
    delta_split: float = 1.0
    max_leaves: int | None = None

    def __post_init__(self):
        if self.kind not in ("uniform-leaves", "chipman"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if not self.gamma_split > 0:
            raise ConfigError("gamma_split must be positive")
        if self.delta_split < 0:
            raise ConfigError("delta_split must be non-negative")

    @classmethod
    def from_hyper(cls, hyper) -> "PriorConfig":
        return cls(hyper.prior, hyper.gamma_split, hyper.delta_split, hyper.max_leaves)

    def leaf_cap(self, n: int) -> int:
        """Maximal leaf count ``K``; ``n - 1`` unless capped lower."""
        K = max(n - 1, 1)
        return K if self.max_leaves is None else min(K, self.max_leaves)

    def split_probability(self, depth: int) -> float:
        p = self.gamma_split * (1.0 + depth) ** -self.delta_split
        if p > 1.0:
            raise ConfigError(
                f"split probability {p:.4g} > 1 at depth {depth}; lower gamma_split or raise delta_split"
            )
        return p


@lru_cache(maxsize=1 << 16)
def leaf_log_ml(counts: tuple[int, ...], alpha: float = 1.0) -> float:
    """Dirichlet-multinomial log evidence of one leaf's class counts."""
    C = len(counts)
    n = sum(counts)
    out = math.lgamma(C * alpha) - math.lgamma(n + C * alpha)
    la = math.lgamma(alpha)
    for c in counts:
        out += math.lgamma(c + alpha) - la
    return out


def log_marginal_likelihood(tree: DecisionTree, data: Dataset | None = None, alpha: float = 1.0) -> float:
    """Sum of leaf log evidences.

    If ``data`` is given the tree is refitted against it first; otherwise the
    counts stored in the leaves are used and the tree must carry them.
    """
    if data is not None:
        tree, _ = refit(tree, data)
    total = 0.0
    for _, leaf in tree.leaves():
        if len(leaf.counts) != tree.class_count:
            raise StateError("tree has no class counts; fit it to data first")
        total += leaf_log_ml(leaf.counts, alpha)
    return total


def count_tree_shapes(k: int) -> int:
    """Number of strictly binary tree shapes with ``k`` leaves (Catalan(k-1))."""
    if k < 1:
        raise InputError("k must be at least 1")
    return math.comb(2 * (k - 1), k - 1) // k


@lru_cache(maxsize=4096)
def log_count_tree_shapes(k: int) -> float:
    return math.log(count_tree_shapes(k))


def log_split_rule_prior(tree: DecisionTree, space: ThresholdSpace, X) -> float:
    """Uniform choice of feature and threshold at every split.

    The tree must be fitted so that each split knows the rows reaching it.
    """
    m = X.shape[1]
    total = 0.0
    for _, s in tree.splits():
        if s.rows is None:
            raise StateError("split rule prior needs a fitted tree")
        mu = space.measure(s.rule.feature, X[s.rows, s.rule.feature])
        if mu <= 0:
            return -math.inf
        total -= math.log(mu) + math.log(m)
    return total


def log_structure_prior(tree: DecisionTree, config: PriorConfig, n: int) -> float:
    """The part of the prior that depends only on the tree's shape."""
    if config.kind == "uniform-leaves":
        k = tree.leaf_count
        K = config.leaf_cap(n)
        if k > K:
            return -math.inf
        return -log_count_tree_shapes(k) - math.log(K)
    total = 0.0
    for _, node, depth in tree.walk():
        p = config.split_probability(depth)
        if isinstance(node, Leaf):
            total += math.log1p(-p) if p < 1.0 else -math.inf
        else:
            total += math.log(p)
    return total


def log_tree_prior(
    tree: DecisionTree,
    config: PriorConfig,
    data: Dataset,
    space: ThresholdSpace | None = None,
) -> float:
    """Log prior probability of ``tree`` given the candidate thresholds in ``data``."""
    if space is None:
        space = ThresholdSpace.from_data(data)
    if not tree.is_fitted:
        tree, _ = refit(tree, data)
    return log_structure_prior(tree, config, data.n) + log_split_rule_prior(tree, space, data.features)
