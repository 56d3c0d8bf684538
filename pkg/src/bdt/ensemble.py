"""Averaging over sampled trees and the vote-based uncertainty envelope."""

from __future__ import annotations

import csv
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, DecisionTree, InputError, StateError, check_gamma0

CONFIDENT_CORRECT = "confident-correct"
CONFIDENT_INCORRECT = "confident-incorrect"
CONFIDENT = "confident"
UNCERTAIN = "uncertain"


@dataclass(eq=False)
class Ensemble:
    """Thinned post-burn-in trees, in chain order, plus training metadata."""

    trees: list[DecisionTree]
    class_count: int
    feature_names: tuple[str, ...]
    feature_ranges: np.ndarray
    hyper: object = None
    alpha: float | None = None
    label_name: str = "label"
    class_names: tuple[str, ...] | None = None
    chain: dict = field(default_factory=dict)

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        self.feature_ranges = np.asarray(self.feature_ranges, dtype=float)
        if self.alpha is None:
            self.alpha = getattr(self.hyper, "alpha", 1.0)

    def __len__(self):
        return len(self.trees)

    @property
    def m(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        if not self.trees:
            raise StateError("ensemble is empty")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.m:
            raise InputError(f"expected {self.m} features, got {X.shape[1]}")
        return X

    def tree_predictions(self, X) -> np.ndarray:
        """Majority class of every tree on every row, shape ``(N, n)``."""
        X = self._check(X)
        return np.stack([t.predict(X) for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        """Posterior predictive class probabilities, averaged over trees."""
        X = self._check(X)
        acc = np.zeros((X.shape[0], self.class_count))
        for t in self.trees:
            acc += t.predict_proba(X, self.alpha)
        return acc / len(self.trees)

    def votes(self, X) -> np.ndarray:
        """Per-row vote counts per class, shape ``(n, C)``."""
        preds = self.tree_predictions(X)
        out = np.zeros((preds.shape[1], self.class_count), dtype=np.intp)
        for c in range(self.class_count):
            out[:, c] = (preds == c).sum(axis=0)
        return out


def predict_ensemble(ens: Ensemble, x) -> np.ndarray:
    """Class probability vector for one input."""
    return ens.predict_proba(np.asarray(x, dtype=float)[None, :])[0]


def vote_confidence(ens: Ensemble, x) -> tuple[int, float]:
    """Winning class by tree votes and its share ``gamma = N_win / N``."""
    v = ens.votes(np.asarray(x, dtype=float)[None, :])[0]
    c = int(np.argmax(v))
    return c, v[c] / len(ens)


@dataclass(frozen=True)
class EnvelopeOutcome:
    predicted: int
    gamma: float
    status: str


@dataclass
class EnvelopeReport:
    outcomes: list[EnvelopeOutcome]
    probabilities: np.ndarray
    labels: np.ndarray | None = None
    gamma0: float = 0.99

    @property
    def predicted(self) -> np.ndarray:
        return np.array([o.predicted for o in self.outcomes], dtype=np.intp)

    @property
    def gamma(self) -> np.ndarray:
        return np.array([o.gamma for o in self.outcomes])

    def _frac(self, status) -> float:
        return sum(o.status == status for o in self.outcomes) / len(self.outcomes)

    @property
    def confident_fraction(self) -> float:
        return float(np.mean([o.status != UNCERTAIN for o in self.outcomes]))

    def rates(self) -> dict[str, float] | None:
        """Aggregate rates on labelled data, None without labels.

        The uncertain rate is defined as the complement of the two confident
        rates, so ``confident_correct + confident_incorrect + uncertain`` is
        exactly 1.0 in floating point.  Integer counts are in :meth:`counts`.
        """
        if self.labels is None:
            return None
        n = len(self.outcomes)
        c = self.counts()
        cc = c[CONFIDENT_CORRECT] / n
        ci = c[CONFIDENT_INCORRECT] / n
        return {
            "confident_correct": cc,
            "confident_incorrect": ci,
            "uncertain": 1.0 - (cc + ci),
            "misclassification": float(np.mean(self.predicted != self.labels)),
        }

    def counts(self) -> dict[str, int]:
        out = {CONFIDENT_CORRECT: 0, CONFIDENT_INCORRECT: 0, CONFIDENT: 0, UNCERTAIN: 0}
        for o in self.outcomes:
            out[o.status] += 1
        return out

    def to_csv(self, path, class_names: Sequence[str] | None = None) -> None:
        C = self.probabilities.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["row", "predicted"] + [f"p{c}" for c in range(C)] + ["gamma", "status"]
            if self.labels is not None:
                head.append("label")
            w.writerow(head)
            for i, o in enumerate(self.outcomes):
                row = [i, o.predicted] + [f"{p:.6f}" for p in self.probabilities[i]]
                row += [f"{o.gamma:.6f}", o.status]
                if self.labels is not None:
                    row.append(int(self.labels[i]))
                w.writerow(row)


def classify_with_envelope(ens: Ensemble, data: Dataset | np.ndarray, gamma0: float, labeled: bool = True) -> EnvelopeReport:
    """Vote-based confidence for every row of ``data``.

    A row is confident when its winning vote share reaches ``gamma0``.  With
    labels, confident rows are further split into correct and incorrect.
    """
    check_gamma0(gamma0, ens.class_count)
    if isinstance(data, Dataset):
        X = data.features
        y = data.labels if labeled else None
    else:
        X, y = np.asarray(data, dtype=float), None
    votes = ens.votes(X)
    N = len(ens)
    pred = np.argmax(votes, axis=1)
    gamma = votes[np.arange(len(pred)), pred] / N
    # integer comparison so gamma == gamma0 is not lost to rounding
    confident = votes[np.arange(len(pred)), pred] >= gamma0 * N - 1e-9
    outcomes = []
    for i in range(len(pred)):
        if not confident[i]:
            status = UNCERTAIN
        elif y is None:
            status = CONFIDENT
        else:
            status = CONFIDENT_CORRECT if pred[i] == y[i] else CONFIDENT_INCORRECT
        outcomes.append(EnvelopeOutcome(int(pred[i]), float(gamma[i]), status))
    return EnvelopeReport(outcomes, ens.predict_proba(X), y, gamma0)


def feature_importance(ens: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    """Average per-tree share of splits on each feature.

    A single-leaf tree contributes ``1/m`` to every feature.  Returns
    ``(weights, ranks)`` with rank 1 for the heaviest feature; ties go to the
    lower feature index.
    """
    if not ens.trees:
        raise StateError("ensemble is empty")
    m = ens.m
    # exact rational sums: duplicated or reordered trees give identical weights
    acc = [Fraction(0)] * m
    for t in ens.trees:
        c = t.feature_counts(m).tolist()
        total = sum(c)
        for j in range(m):
            acc[j] += Fraction(c[j], total) if total else Fraction(1, m)
    N = len(ens.trees)
    w = np.array([float(a / N) for a in acc])
    order = sorted(range(m), key=lambda j: (-w[j], j))
    ranks = np.empty(m, dtype=np.intp)
    ranks[order] = np.arange(1, m + 1)
    return w, ranks
