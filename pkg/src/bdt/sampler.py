"""Reversible-jump Metropolis-Hastings over decision trees.

Four moves act on the current tree: birth splits a leaf, death merges two
sibling leaves, change-split redraws the feature and threshold of a split,
and change-rule nudges a split's threshold with a Gaussian step.  Candidates
with undersized leaves are swept before the accept/reject test: a single
undersized leaf is removed together with its parent's question, more than
one means the candidate is rejected outright.

The acceptance log-probability is ``dlog_lik + dlog_prior + log_ratio`` where
``log_ratio`` is the Hastings term ``ln q(current | candidate) - ln q(candidate
| current)``.  Under the uniform-leaves prior the sum ``log_ratio +
dlog_prior`` of a birth (death) reduces to :func:`birth_log_ratio`
(:func:`death_log_ratio`) because births draw the feature and threshold from
their prior.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Dataset,
    DecisionTree,
    Hyperparameters,
    Leaf,
    Split,
    SplitRule,
    ThresholdSpace,
    refit,
    route,
)
from .ensemble import Ensemble
from .likelihood import (
    PriorConfig,
    leaf_log_ml,
    log_count_tree_shapes,
    log_structure_prior,
)


class MoveKind(enum.IntEnum):
    BIRTH = 0
    DEATH = 1
    CHANGE_SPLIT = 2
    CHANGE_RULE = 3

    @property
    def label(self) -> str:
        return self.name.lower()


class SweepStatus(enum.Enum):
    CLEAN = "clean"
    SWEPT = "swept"
    REJECT = "reject"


PHASES = ("burn-in", "post-burn-in")


@dataclass(frozen=True)
class ChainState:
    tree: DecisionTree
    log_lik: float
    log_prior: float
    iteration: int = 0

    @property
    def log_posterior(self) -> float:
        return self.log_lik + self.log_prior


@dataclass
class Proposal:
    move: MoveKind
    tree: DecisionTree
    log_ratio: float
    path: str = ""


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def birth_log_ratio(k: int, dq1: int, p_birth: float = 0.1, p_death: float = 0.1) -> float:
    """``ln R`` for a birth from ``k`` to ``k + 1`` leaves.

    ``dq1`` is the number of splits with two leaf children in the new tree.
    """
    return (
        _log(p_death) - _log(p_birth)
        + math.log(k) - math.log(dq1)
        + log_count_tree_shapes(k) - log_count_tree_shapes(k + 1)
    )


def death_log_ratio(k: int, dq: int, p_birth: float = 0.1, p_death: float = 0.1) -> float:
    """``ln R`` for a death from ``k`` to ``k - 1`` leaves; ``dq`` counts prunable splits now."""
    return (
        _log(p_birth) - _log(p_death)
        + math.log(dq) - math.log(k - 1)
        + log_count_tree_shapes(k) - log_count_tree_shapes(k - 1)
    )


@dataclass
class ChainDiagnostics:
    """Per-iteration traces of a chain run.

    ``phase`` is 0 during burn-in and 1 afterwards; ``move`` holds
    :class:`MoveKind` values.
    """

    phase: np.ndarray
    log_lik: np.ndarray
    leaves: np.ndarray
    move: np.ndarray
    accepted: np.ndarray
    sweep_count: int = 0
    resample_count: int = 0
    converged: bool | None = None
    final_log_lik: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.log_lik)

    def accept_counts(self) -> dict[tuple[str, str], tuple[int, int]]:
        """``(phase, move) -> (accepted, proposed)``."""
        out = {}
        for p, phase in enumerate(PHASES):
            for mv in MoveKind:
                sel = (self.phase == p) & (self.move == mv)
                out[phase, mv.label] = (int(self.accepted[sel].sum()), int(sel.sum()))
        return out

    def acceptance_rate(self, phase: str | None = None, move: MoveKind | None = None) -> float:
        sel = np.ones(self.iterations, dtype=bool)
        if phase is not None:
            sel &= self.phase == PHASES.index(phase)
        if move is not None:
            sel &= self.move == move
        n = int(sel.sum())
        return float(self.accepted[sel].sum()) / n if n else float("nan")

    def summary(self) -> dict:
        """JSON-safe digest; rates of moves never proposed are None."""
        rates = {}
        for (phase, move), (a, p) in self.accept_counts().items():
            rates.setdefault(phase, {})[move] = a / p if p else None
        for phase in PHASES:
            r = self.acceptance_rate(phase)
            rates[phase]["all"] = None if math.isnan(r) else r
        fl = self.final_log_lik
        return {
            "acceptance": rates,
            "converged": self.converged,
            "final_log_lik": fl if math.isfinite(fl) else None,
            "iterations": self.iterations,
            "resamples": self.resample_count,
            "sweeps": self.sweep_count,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phase", "iteration", "loglik", "leaves", "move", "accepted"])
            for i in range(self.iterations):
                w.writerow([
                    PHASES[self.phase[i]],
                    i + 1,
                    repr(float(self.log_lik[i])),
                    int(self.leaves[i]),
                    MoveKind(int(self.move[i])).label,
                    int(self.accepted[i]),
                ])


def convergence_flag(burn_trace: np.ndarray) -> bool | None:
    """Mean log-likelihood of the last tenth of burn-in exceeds the first tenth."""
    if len(burn_trace) < 10:
        return None
    w = len(burn_trace) // 10
    return bool(burn_trace[-w:].mean() > burn_trace[:w].mean())


class TreeSampler:
    """RJ-MCMC sampler bound to one training set and one set of hyperparameters."""

    def __init__(self, data: Dataset, hyper: Hyperparameters):
        hyper.check_gamma0(data.class_count)
        self.data = data
        self.hyper = hyper
        self.X = data.features
        self.y = data.labels
        self.C = data.class_count
        self.m = data.m
        self.space = ThresholdSpace.from_data(data, hyper.thresholds, hyper.p_min)
        self.prior = PriorConfig.from_hyper(hyper)
        self.K = self.prior.leaf_cap(data.n)
        self.log_m = math.log(self.m)
        pb, pd = hyper.move_probs[0], hyper.move_probs[1]
        self._birth_move = _log(pd) - _log(pb) if pb > 0 else 0.0
        self._death_move = _log(pb) - _log(pd) if pd > 0 else 0.0
        self._cum = np.cumsum(hyper.move_probs)
        self._proposers = (
            self.propose_birth,
            self.propose_death,
            self.propose_change_split,
            self.propose_change_rule,
        )
        if self.prior.kind == "chipman":
            # split probability is largest at the root
            self.prior.split_probability(0)

    # scores -------------------------------------------------------------

    def log_lik(self, tree: DecisionTree) -> float:
        a = self.hyper.alpha
        return sum(leaf_log_ml(leaf.counts, a) for _, leaf in tree.leaves())

    def _mu(self, node: Split) -> float:
        if node.mu is None:
            f = node.rule.feature
            node.mu = self.space.measure(f, self.X[node.rows, f])
        return node.mu

    def log_prior(self, tree: DecisionTree) -> float:
        s = log_structure_prior(tree, self.prior, self.data.n)
        if s == -math.inf:
            return s
        for _, node in tree.splits():
            mu = self._mu(node)
            if mu <= 0:
                return -math.inf
            s -= math.log(mu) + self.log_m
        return s

    def state_of(self, tree: DecisionTree, iteration: int = 0) -> ChainState:
        return ChainState(tree, self.log_lik(tree), self.log_prior(tree), iteration)

    def initial_state(self) -> ChainState:
        return self.state_of(DecisionTree.single_leaf(self.data))

    # proposals ----------------------------------------------------------

    def _leaf(self, rows: np.ndarray) -> Leaf:
        return Leaf(tuple(np.bincount(self.y[rows], minlength=self.C).tolist()), rows)

    def propose_birth(self, state: ChainState, rng: np.random.Generator) -> Proposal | None:
        tree = state.tree
        k = tree.leaf_count
        if k >= self.K:
            return None
        leaves = list(tree.leaves())
        path, leaf = leaves[rng.integers(k)]
        f = int(rng.integers(self.m))
        rows = leaf.rows
        vals = self.X[rows, f]
        t = self.space.draw(f, vals, rng)
        if t is None:
            return None
        mask = vals < t
        node = Split(SplitRule(f, t), self._leaf(rows[mask]), self._leaf(rows[~mask]), rows)
        cand = tree.replace(path, node)
        dq1 = len(cand.prunable())
        log_ratio = (
            self._birth_move
            + math.log(k) - math.log(dq1)
            + self.log_m + math.log(self.space.measure(f, vals))
        )
        return Proposal(MoveKind.BIRTH, cand, log_ratio, path)

    def propose_death(self, state: ChainState, rng: np.random.Generator) -> Proposal | None:
        tree = state.tree
        k = tree.leaf_count
        if k < 2:
            return None
        prunable = tree.prunable()
        path = prunable[rng.integers(len(prunable))]
        node = tree.at(path)
        mu = self._mu(node)
        counts = tuple(a + b for a, b in zip(node.left.counts, node.right.counts))
        cand = tree.replace(path, Leaf(counts, node.rows))
        log_ratio = (
            self._death_move
            + math.log(len(prunable)) - math.log(k - 1)
            - self.log_m - _log(mu)
        )
        return Proposal(MoveKind.DEATH, cand, log_ratio, path)

    def _pick_split(self, tree: DecisionTree, rng) -> tuple[str, Split] | None:
        if tree.leaf_count < 2:
            return None
        splits = list(tree.splits())
        return splits[rng.integers(len(splits))]

    def propose_change_split(self, state: ChainState, rng: np.random.Generator) -> Proposal | None:
        picked = self._pick_split(state.tree, rng)
        if picked is None:
            return None
        path, node = picked
        f = int(rng.integers(self.m))
        vals = self.X[node.rows, f]
        t = self.space.draw(f, vals, rng)
        if t is None:
            return None
        mu_old = self._mu(node)
        mu_new = self.space.measure(f, vals)
        new = route(Split(SplitRule(f, t), node.left, node.right), node.rows, self.X, self.y, self.C)
        log_ratio = math.log(mu_new) - _log(mu_old)
        return Proposal(MoveKind.CHANGE_SPLIT, state.tree.replace(path, new), log_ratio, path)

    def propose_change_rule(self, state: ChainState, rng: np.random.Generator) -> Proposal | None:
        picked = self._pick_split(state.tree, rng)
        if picked is None:
            return None
        path, node = picked
        f = node.rule.feature
        t = self.space.perturb(f, node.rule.threshold, self.hyper.proposal_std, rng)
        if t is None:
            return None
        new = route(Split(SplitRule(f, t), node.left, node.right), node.rows, self.X, self.y, self.C)
        return Proposal(MoveKind.CHANGE_RULE, state.tree.replace(path, new), 0.0, path)

    # sweeping -----------------------------------------------------------

    def sweep(self, tree: DecisionTree) -> tuple[DecisionTree, SweepStatus]:
        p_min = self.hyper.p_min
        small = [path for path, leaf in tree.leaves() if leaf.size < p_min]
        if not small:
            return tree, SweepStatus.CLEAN
        if len(small) > 1 or not self.hyper.sweep or small[0] == "":
            return tree, SweepStatus.REJECT
        return _sweep_one(tree, small[0], self.X, self.y, self.C), SweepStatus.SWEPT

    # chain --------------------------------------------------------------

    def step(self, state: ChainState, rng: np.random.Generator) -> tuple[ChainState, bool, MoveKind, SweepStatus | None]:
        """One proposal and accept/reject decision.

        Returns the new state, whether the candidate was accepted, the move
        drawn and the sweep outcome (None when the move was unavailable).
        """
        move = MoveKind(int(np.searchsorted(self._cum, rng.random(), side="right")))
        nxt = state.iteration + 1
        prop = self._proposers[move](state, rng)
        if prop is None:
            return ChainState(state.tree, state.log_lik, state.log_prior, nxt), False, move, None
        tree, status = self.sweep(prop.tree)
        if status is SweepStatus.REJECT:
            return ChainState(state.tree, state.log_lik, state.log_prior, nxt), False, move, status
        if status is SweepStatus.SWEPT and move is MoveKind.BIRTH and tree.leaf_count == state.tree.leaf_count:
            # the new split lost a child straight away: nothing changed
            return ChainState(state.tree, state.log_lik, state.log_prior, nxt), False, move, status
        lp = self.log_prior(tree)
        if lp == -math.inf:
            return ChainState(state.tree, state.log_lik, state.log_prior, nxt), False, move, status
        ll = self.log_lik(tree)
        log_a = ll - state.log_lik + lp - state.log_prior + prop.log_ratio
        if log_a >= 0 or rng.random() < math.exp(log_a):
            return ChainState(tree, ll, lp, nxt), True, move, status
        return ChainState(state.tree, state.log_lik, state.log_prior, nxt), False, move, status

    def run(self, rng: np.random.Generator | None = None, callback=None) -> tuple[Ensemble, ChainDiagnostics]:
        """Burn in, then collect every ``thin``-th tree.

        ``callback(i, state)``, if given, is called after every iteration.
        """
        h = self.hyper
        if h.post_burn_in // h.thin < 2:
            raise ConfigError("post_burn_in / thin must leave at least 2 trees to average")
        if rng is None:
            rng = np.random.default_rng(h.seed)
        total = h.burn_in + h.post_burn_in
        phase = np.zeros(total, dtype=np.int8)
        phase[h.burn_in:] = 1
        ll = np.empty(total)
        leaves = np.empty(total, dtype=np.int32)
        moves = np.empty(total, dtype=np.int8)
        acc = np.zeros(total, dtype=bool)
        sweeps = resamples = 0
        trees = []
        state = self.initial_state()
        for i in range(total):
            state, accepted, move, status = self.step(state, rng)
            ll[i] = state.log_lik
            leaves[i] = state.tree.leaf_count
            moves[i] = move
            acc[i] = accepted
            if status is SweepStatus.SWEPT:
                sweeps += 1
            elif status is SweepStatus.REJECT:
                resamples += 1
            if i >= h.burn_in and (i - h.burn_in + 1) % h.thin == 0:
                trees.append(state.tree.strip())
            if callback is not None:
                callback(i, state)
        diag = ChainDiagnostics(
            phase, ll, leaves, moves, acc, sweeps, resamples,
            convergence_flag(ll[: h.burn_in]), float(state.log_lik),
        )
        ens = Ensemble(
            trees,
            self.C,
            self.data.feature_names,
            self.data.feature_ranges(),
            hyper=h,
            label_name=self.data.label_name,
            class_names=self.data.class_names,
            chain=diag.summary(),
        )
        return ens, diag


def _sweep_one(tree: DecisionTree, leaf_path: str, X, y, C) -> DecisionTree:
    parent_path = leaf_path[:-1]
    parent = tree.at(parent_path)
    sibling = parent.right if leaf_path[-1] == "L" else parent.left
    return tree.replace(parent_path, route(sibling, parent.rows, X, y, C))


def sweep(candidate: DecisionTree, data: Dataset, p_min: int) -> tuple[DecisionTree, SweepStatus]:
    """Sweep a fitted candidate: collapse a single undersized leaf, reject on several."""
    if not candidate.is_fitted:
        candidate, _ = refit(candidate, data)
    small = [path for path, leaf in candidate.leaves() if leaf.size < p_min]
    if not small:
        return candidate, SweepStatus.CLEAN
    if len(small) > 1 or small[0] == "":
        return candidate, SweepStatus.REJECT
    return _sweep_one(candidate, small[0], data.features, data.labels, data.class_count), SweepStatus.SWEPT


def run_chain(data: Dataset, hyper: Hyperparameters, rng: np.random.Generator | None = None):
    """Run one chain from the single-leaf tree; returns ``(Ensemble, ChainDiagnostics)``."""
    return TreeSampler(data, hyper).run(rng)
