"""Datasets, binary decision trees, routing and single-tree prediction.

Trees are built from two node types, :class:`Leaf` and :class:`Split`.
Nodes are never mutated after construction; every structural change builds
new nodes along the modified path and shares the untouched subtrees.  A node
may carry the row indices of the training points routed to it (``rows``);
such a tree is *fitted*.  Trees stored in an ensemble are stripped of rows
but keep their leaf class counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class BDTError(Exception):
    """Base class for all errors raised by this package."""


class InputError(BDTError, ValueError):
    """Invalid user input (feature vectors, datasets, arguments)."""


class StructureError(BDTError):
    """A tree is structurally inconsistent with the data it is used on."""


class StateError(BDTError):
    """An operation needs state that is missing, e.g. an unfitted tree."""


class ConfigError(BDTError, ValueError):
    """Invalid hyperparameter or prior configuration."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with integer class labels.

    Parameters
    ----------
    features : array of shape (n, m)
        Real-valued features in their original units.
    labels : array of shape (n,)
        Class indices in ``[0, class_count)``.
    feature_names : sequence of str
        One distinct name per column.
    class_count : int
        Number of classes ``C``.
    label_name : str
        Name of the label column, used when writing files and diagrams.
    class_names : sequence of str, optional
        Original text labels when the data was loaded from text classes.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_count: int = 2
    label_name: str = "label"
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim != 2:
            raise InputError(f"features must be a 2-d matrix, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise InputError("labels must be a vector with one entry per row")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise InputError("labels must be integer class indices")
        y = y.astype(np.intp)
        n, m = X.shape
        if n < 2:
            raise InputError(f"need at least 2 rows, got {n}")
        if m < 1:
            raise InputError("need at least 1 feature")
        if self.class_count < 2:
            raise InputError(f"need at least 2 classes, got {self.class_count}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise InputError(f"non-finite feature value at row {r}, column {c}")
        if y.min() < 0 or y.max() >= self.class_count:
            raise InputError(f"labels must lie in [0, {self.class_count})")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != m:
            raise InputError(f"expected {m} feature names, got {len(names)}")
        if len(set(names)) != m:
            raise InputError("feature names must be distinct")
        if self.class_names is not None and len(self.class_names) != self.class_count:
            raise InputError("class_names must have class_count entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def feature_ranges(self) -> np.ndarray:
        """Per-feature ``(min, max)`` as an ``(m, 2)`` array."""
        return np.column_stack([self.features.min(axis=0), self.features.max(axis=0)])

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            self.features[rows],
            self.labels[rows],
            self.feature_names,
            self.class_count,
            self.label_name,
            self.class_names,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.class_count == other.class_count
            and self.label_name == other.label_name
            and self.class_names == other.class_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class SplitRule:
    """``x[feature] < threshold`` sends a point left, otherwise right."""

    feature: int
    threshold: float

    def goes_left(self, x) -> bool:
        return bool(x[self.feature] < self.threshold)


class Leaf:
    __slots__ = ("counts", "rows")
    n_leaves = 1

    def __init__(self, counts: tuple[int, ...], rows: np.ndarray | None = None):
        self.counts = counts
        self.rows = rows

    @property
    def size(self) -> int:
        return sum(self.counts)

    def __repr__(self):
        return f"Leaf{self.counts}"


class Split:
    # ``mu`` memoises the candidate-threshold measure inside a sampler
    __slots__ = ("rule", "left", "right", "rows", "n_leaves", "mu")

    def __init__(self, rule: SplitRule, left: Node, right: Node, rows: np.ndarray | None = None):
        self.rule = rule
        self.left = left
        self.right = right
        self.rows = rows
        self.n_leaves = left.n_leaves + right.n_leaves
        self.mu = None

    @property
    def feature(self) -> int:
        return self.rule.feature

    @property
    def threshold(self) -> float:
        return self.rule.threshold

    def __repr__(self):
        return f"Split(x{self.rule.feature} < {self.rule.threshold!r}, {self.left!r}, {self.right!r})"


Node = Leaf | Split


def _count(labels: np.ndarray, rows: np.ndarray, C: int) -> tuple[int, ...]:
    return tuple(np.bincount(labels[rows], minlength=C).tolist())


def route(node: Node, rows: np.ndarray, X: np.ndarray, y: np.ndarray, C: int) -> Node:
    """Rebuild ``node`` with the given rows routed down to its leaves."""
    if isinstance(node, Leaf):
        return Leaf(_count(y, rows, C), rows)
    mask = X[rows, node.rule.feature] < node.rule.threshold
    return Split(
        node.rule,
        route(node.left, rows[mask], X, y, C),
        route(node.right, rows[~mask], X, y, C),
        rows,
    )


def _strip(node: Node) -> Node:
    if isinstance(node, Leaf):
        return Leaf(node.counts)
    return Split(node.rule, _strip(node.left), _strip(node.right))


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """A rooted, strictly binary classification tree.

    Positions inside the tree are addressed by paths: strings over
    ``"L"``/``"R"``, with ``""`` for the root.
    """

    root: Node
    class_count: int = 2

    @classmethod
    def single_leaf(cls, data: Dataset | None = None, class_count: int = 2) -> "DecisionTree":
        if data is None:
            return cls(Leaf((0,) * class_count), class_count)
        rows = np.arange(data.n, dtype=np.intp)
        return cls(route(Leaf(()), rows, data.features, data.labels, data.class_count), data.class_count)

    # structure ---------------------------------------------------------

    def walk(self) -> Iterator[tuple[str, Node, int]]:
        """Preorder traversal yielding ``(path, node, depth)``."""
        stack = [("", self.root, 0)]
        while stack:
            path, node, depth = stack.pop()
            yield path, node, depth
            if isinstance(node, Split):
                stack.append((path + "R", node.right, depth + 1))
                stack.append((path + "L", node.left, depth + 1))

    def leaves(self) -> list[tuple[str, Leaf]]:
        """``(path, leaf)`` pairs in preorder."""
        out = []
        stack = [("", self.root)]
        while stack:
            path, node = stack.pop()
            if type(node) is Leaf:
                out.append((path, node))
            else:
                stack.append((path + "R", node.right))
                stack.append((path + "L", node.left))
        return out

    def splits(self) -> list[tuple[str, Split]]:
        """``(path, split)`` pairs in preorder."""
        out = []
        stack = [("", self.root)]
        while stack:
            path, node = stack.pop()
            if type(node) is Split:
                out.append((path, node))
                stack.append((path + "R", node.right))
                stack.append((path + "L", node.left))
        return out

    @property
    def leaf_count(self) -> int:
        return self.root.n_leaves

    @property
    def node_count(self) -> int:
        return 2 * self.root.n_leaves - 1

    @property
    def depth(self) -> int:
        return max(d for _, _, d in self.walk())

    @property
    def is_fitted(self) -> bool:
        return all(node.rows is not None for _, node, _ in self.walk())

    def at(self, path: str) -> Node:
        node = self.root
        for step in path:
            if not isinstance(node, Split):
                raise StructureError(f"path {path!r} runs past a leaf")
            node = node.left if step == "L" else node.right
        return node

    def replace(self, path: str, new: Node) -> "DecisionTree":
        """Return a tree with the subtree at ``path`` swapped for ``new``."""

        def rebuild(node, i):
            if i == len(path):
                return new
            if not isinstance(node, Split):
                raise StructureError(f"path {path!r} runs past a leaf")
            if path[i] == "L":
                return Split(node.rule, rebuild(node.left, i + 1), node.right, node.rows)
            return Split(node.rule, node.left, rebuild(node.right, i + 1), node.rows)

        return DecisionTree(rebuild(self.root, 0), self.class_count)

    def prunable(self) -> list[str]:
        """Paths of splits whose two children are both leaves."""
        return [
            p
            for p, s in self.splits()
            if isinstance(s.left, Leaf) and isinstance(s.right, Leaf)
        ]

    def structure_key(self) -> tuple:
        """Shape plus split features, ignoring thresholds and counts."""

        def key(node):
            if isinstance(node, Leaf):
                return ()
            return (node.rule.feature, key(node.left), key(node.right))

        return key(self.root)

    def thresholds(self) -> list[float]:
        """Split thresholds in preorder."""
        return [s.rule.threshold for _, s in self.splits()]

    def feature_counts(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=np.intp)
        for _, s in self.splits():
            out[s.rule.feature] += 1
        return out

    def strip(self) -> "DecisionTree":
        """Copy without cached row indices; leaf counts are kept."""
        return DecisionTree(_strip(self.root), self.class_count)

    # prediction --------------------------------------------------------

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf (in preorder leaf order) reached by each row."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = np.empty(X.shape[0], dtype=np.intp)
        counter = [0]

        def go(node, rows):
            if isinstance(node, Leaf):
                out[rows] = counter[0]
                counter[0] += 1
                return
            mask = X[rows, node.rule.feature] < node.rule.threshold
            go(node.left, rows[mask])
            go(node.right, rows[~mask])

        go(self.root, np.arange(X.shape[0], dtype=np.intp))
        return out

    def leaf_table(self, alpha: float = 1.0) -> np.ndarray:
        """Posterior-mean class probabilities per leaf, shape ``(k, C)``."""
        counts = np.array([leaf.counts for _, leaf in self.leaves()], dtype=float)
        return (counts + alpha) / (counts.sum(axis=1, keepdims=True) + self.class_count * alpha)

    def predict_proba(self, X: np.ndarray, alpha: float = 1.0) -> np.ndarray:
        return self.leaf_table(alpha)[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority class per row; ties and empty leaves go to the lowest index."""
        counts = np.array([leaf.counts for _, leaf in self.leaves()])
        return np.argmax(counts, axis=1)[self.apply(X)]


def check_tree(tree: DecisionTree, m: int) -> None:
    for path, s in tree.splits():
        if not 0 <= s.rule.feature < m:
            raise StructureError(
                f"split at {path or 'root'} uses feature {s.rule.feature}, data has {m} features"
            )


def partition(tree: DecisionTree, data: Dataset) -> dict[str, np.ndarray]:
    """Map each leaf path to the row indices of ``data`` routed to it."""
    check_tree(tree, data.m)
    X = data.features
    out = {}

    def go(node, path, rows):
        if isinstance(node, Leaf):
            out[path] = rows
            return
        mask = X[rows, node.rule.feature] < node.rule.threshold
        go(node.left, path + "L", rows[mask])
        go(node.right, path + "R", rows[~mask])

    go(tree.root, "", np.arange(data.n, dtype=np.intp))
    return out


def refit(tree: DecisionTree, data: Dataset, p_min: int = 1) -> tuple[DecisionTree, int]:
    """Recompute leaf counts (and cached rows) against ``data``.

    Returns the fitted tree and the number of leaves holding fewer than
    ``p_min`` points.
    """
    check_tree(tree, data.m)
    rows = np.arange(data.n, dtype=np.intp)
    fitted = DecisionTree(
        route(tree.root, rows, data.features, data.labels, data.class_count),
        data.class_count,
    )
    return fitted, undersized_count(fitted, p_min)


def undersized_count(tree: DecisionTree, p_min: int) -> int:
    return sum(1 for _, leaf in tree.leaves() if leaf.size < p_min)


def predict_tree(tree: DecisionTree, x: Sequence[float], alpha: float = 1.0) -> np.ndarray:
    """Class probabilities ``(n_tc + alpha) / (n_t + C alpha)`` at the leaf reached by ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("x must be a single feature vector")
    if not np.all(np.isfinite(x)):
        raise InputError("feature vector contains non-finite values")
    node = tree.root
    while isinstance(node, Split):
        if node.rule.feature >= x.shape[0]:
            raise StructureError(f"tree uses feature {node.rule.feature}, x has {x.shape[0]}")
        node = node.left if node.rule.goes_left(x) else node.right
    counts = np.asarray(node.counts, dtype=float)
    return (counts + alpha) / (counts.sum() + tree.class_count * alpha)


def build(spec, class_count: int = 2) -> DecisionTree:
    """Build an unfitted tree from nested tuples.

    ``(feature, threshold, left, right)`` is a split and a tuple of counts
    (or ``None``) is a leaf.  Handy for fixtures::

        build((0, 0.5, (3, 1), (0, 4)))
    """

    def go(s):
        if s is None:
            return Leaf((0,) * class_count)
        if len(s) == 4 and isinstance(s[2], (tuple, type(None))) and not isinstance(s[0], tuple):
            f, t, left, right = s
            return Split(SplitRule(int(f), float(t)), go(left), go(right))
        return Leaf(tuple(int(c) for c in s))

    return DecisionTree(go(spec), class_count)


MOVES = ("birth", "death", "change_split", "change_rule")
PRIOR_KINDS = ("uniform-leaves", "chipman")
THRESHOLD_MODES = ("continuous", "midpoints")


@dataclass(frozen=True)
class Hyperparameters:
    """Sampler and model settings.

    ``move_probs`` is ordered (birth, death, change-split, change-rule).
    ``proposal_std`` is on the min-max normalised feature scale.
    ``max_leaves`` caps the leaf count below the default ``n - 1``.
    ``thresholds="midpoints"`` restricts split thresholds to midpoints between
    consecutive distinct training values; it exists for exact enumeration.
    ``sweep=False`` rejects every candidate with an undersized leaf instead of
    collapsing a single offender.
    """

    p_min: int = 15
    move_probs: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.6)
    proposal_std: float = 0.3
    burn_in: int = 100_000
    post_burn_in: int = 10_000
    thin: int = 7
    gamma0: float = 0.99
    alpha: float = 1.0
    prior: str = "uniform-leaves"
    gamma_split: float = 0.95
    delta_split: float = 1.0
    seed: int = 0
    max_leaves: int | None = None
    thresholds: str = "continuous"
    sweep: bool = True

    def __post_init__(self):
        object.__setattr__(self, "move_probs", tuple(float(p) for p in self.move_probs))
        if len(self.move_probs) != 4 or any(p < 0 for p in self.move_probs):
            raise ConfigError("move_probs must be four non-negative probabilities")
        if abs(sum(self.move_probs) - 1.0) > 1e-12:
            raise ConfigError(f"move_probs must sum to 1, got {sum(self.move_probs)!r}")
        if self.p_min < 1:
            raise ConfigError("p_min must be at least 1")
        if not 0 < self.proposal_std <= 1:
            raise ConfigError("proposal_std must lie in (0, 1]")
        if self.burn_in < 0 or self.post_burn_in < 0:
            raise ConfigError("chain lengths must be non-negative")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.prior not in PRIOR_KINDS:
            raise ConfigError(f"prior must be one of {PRIOR_KINDS}")
        if self.thresholds not in THRESHOLD_MODES:
            raise ConfigError(f"thresholds must be one of {THRESHOLD_MODES}")
        if not 0 < self.gamma0 <= 1:
            raise ConfigError("gamma0 must lie in [1/C, 1]")
        if self.max_leaves is not None and self.max_leaves < 1:
            raise ConfigError("max_leaves must be at least 1")

    def check_gamma0(self, class_count: int) -> None:
        check_gamma0(self.gamma0, class_count)


def check_gamma0(gamma0: float, class_count: int) -> None:
    if not 1.0 / class_count - 1e-12 <= gamma0 <= 1.0:
        raise ConfigError(f"gamma0 must lie in [1/{class_count}, 1], got {gamma0}")


class ThresholdSpace:
    """Where split thresholds may live, per feature.

    A threshold for a split on ``feature`` at a node is admissible when both
    children keep at least ``p_min`` of the node's points.  ``measure`` is the
    size of that admissible set: the normalised width of the interval in
    continuous mode, the number of grid midpoints inside it in midpoint mode.
    Birth proposals draw uniformly from the set, so the same number appears
    in the split prior.
    """

    def __init__(self, ranges: np.ndarray, mode: str = "continuous", grids=None, p_min: int = 1):
        if mode not in THRESHOLD_MODES:
            raise ConfigError(f"thresholds must be one of {THRESHOLD_MODES}")
        self.ranges = np.asarray(ranges, dtype=float)
        self.width = self.ranges[:, 1] - self.ranges[:, 0]
        self.mode = mode
        self.grids = grids
        self.p_min = int(p_min)

    @classmethod
    def from_data(cls, data: Dataset, mode: str = "continuous", p_min: int = 1) -> "ThresholdSpace":
        grids = None
        if mode == "midpoints":
            grids = []
            for j in range(data.m):
                u = np.unique(data.features[:, j])
                grids.append((u[:-1] + u[1:]) / 2)
        return cls(data.feature_ranges(), mode, grids, p_min)

    def bounds(self, values: np.ndarray) -> tuple[float, float] | None:
        """Admissible thresholds form ``(lo, hi]``; None if the node cannot split."""
        n, p = values.shape[0], self.p_min
        if n < 2 * p:
            return None
        if p == 1:
            lo, hi = values.min(), values.max()
        else:
            part = np.partition(values, (p - 1, n - p))
            lo, hi = part[p - 1], part[n - p]
        if hi <= lo:
            return None
        return lo, hi

    def measure(self, feature: int, values: np.ndarray) -> float:
        b = self.bounds(values)
        if b is None:
            return 0.0
        lo, hi = b
        if self.grids is not None:
            g = self.grids[feature]
            return float(g.searchsorted(hi, "left") - g.searchsorted(lo, "right"))
        return float((hi - lo) / self.width[feature])

    def draw(self, feature: int, values: np.ndarray, rng: np.random.Generator) -> float | None:
        """Uniform draw from the admissible set, or None when it is empty."""
        b = self.bounds(values)
        if b is None:
            return None
        lo, hi = b
        if self.grids is not None:
            g = self.grids[feature]
            a, c = g.searchsorted(lo, "right"), g.searchsorted(hi, "left")
            if c <= a:
                return None
            return float(g[a + rng.integers(c - a)])
        return float(rng.uniform(lo, hi))

    def perturb(self, feature: int, threshold: float, std: float, rng: np.random.Generator) -> float | None:
        """Symmetric random-walk proposal for a threshold."""
        if self.grids is not None:
            g = self.grids[feature]
            i = int(np.searchsorted(g, threshold))
            j = i + int(np.rint(rng.normal(0.0, std * len(g))))
            if not 0 <= j < len(g):
                return None
            return float(g[j])
        return float(threshold + rng.normal(0.0, std * self.width[feature]))
