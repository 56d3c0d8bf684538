import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdt.core import ConfigError, Dataset, DecisionTree, Hyperparameters, Leaf, Split, SplitRule, build, refit
from bdt.likelihood import PriorConfig, log_marginal_likelihood, log_tree_prior
from bdt.sampler import (
    MoveKind,
    Proposal,
    SweepStatus,
    TreeSampler,
    birth_log_ratio,
    convergence_flag,
    death_log_ratio,
    run_chain,
    sweep,
)
from conftest import random_data


def chain_tree(k):
    """Left-leaning chain with ``k`` leaves on feature 0."""
    spec = None
    for i in range(k - 1):
        spec = (0, float(k - i), spec, None)
    return build(spec)


def all_births(tree):
    """Every shape reachable by splitting one leaf."""
    for path, _ in tree.leaves():
        yield tree.replace(path, Split(SplitRule(0, 0.0), Leaf((0, 0)), Leaf((0, 0))))


def grown(data, rng, k, p_min=1):
    """A fitted tree with ``k`` leaves grown by sampler births."""
    s = TreeSampler(data, Hyperparameters(p_min=p_min))
    state = s.initial_state()
    while state.tree.leaf_count < k:
        prop = s.propose_birth(state, rng)
        if prop is not None:
            state = s.state_of(prop.tree)
    return s, state


class TestProposalRatios:
    def test_two_to_three(self):
        assert birth_log_ratio(2, 1) == pytest.approx(0.0, abs=1e-15)

    def test_three_to_two(self):
        assert death_log_ratio(3, 1) == pytest.approx(0.0, abs=1e-15)

    def test_chain_three_to_four(self):
        seen = set()
        for cand in all_births(chain_tree(3)):
            dq1 = len(cand.prunable())
            assert dq1 in (1, 2)
            seen.add(dq1)
            assert birth_log_ratio(3, dq1) == pytest.approx(math.log(3 / dq1 * 2 / 5), abs=1e-12)
        assert seen == {1, 2}

    def test_unequal_move_probabilities(self):
        assert birth_log_ratio(2, 1, 0.2, 0.1) == pytest.approx(math.log(0.5), abs=1e-15)

    @given(st.integers(1, 6), st.integers(0, 10_000), st.floats(0.05, 0.45), st.floats(0.05, 0.45))
    def test_reversibility(self, k, seed, pb, pd):
        rng = np.random.default_rng(seed)
        tree = DecisionTree.single_leaf(class_count=2)
        while tree.leaf_count < k:
            cands = list(all_births(tree))
            tree = cands[rng.integers(len(cands))]
        for cand in all_births(tree):
            dq1 = len(cand.prunable())
            total = birth_log_ratio(k, dq1, pb, pd) + death_log_ratio(k + 1, dq1, pb, pd)
            assert abs(total) <= 1e-12

    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_sampler_birth_equals_ratio_under_uniform_prior(self, seed, k):
        data = random_data(seed, n=40, m=3)
        rng = np.random.default_rng(seed)
        s, state = grown(data, rng, k)
        prop = s.propose_birth(state, rng)
        if prop is None:
            return
        lp = s.log_prior(prop.tree)
        expect = birth_log_ratio(k, len(prop.tree.prunable()))
        assert prop.log_ratio + lp - state.log_prior == pytest.approx(expect, abs=1e-9)

    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_sampler_death_equals_ratio_under_uniform_prior(self, seed, k):
        data = random_data(seed, n=40, m=3)
        rng = np.random.default_rng(seed)
        s, state = grown(data, rng, k)
        prop = s.propose_death(state, rng)
        lp = s.log_prior(prop.tree)
        expect = death_log_ratio(k, len(state.tree.prunable()))
        assert prop.log_ratio + lp - state.log_prior == pytest.approx(expect, abs=1e-9)


class TestMoves:
    def test_change_split_ratio(self):
        # both features span [0, 4] globally; the left node spans 2 on a and 1 on b
        X = np.array([[0, 0], [1, 0.5], [2, 1], [4, 4], [3, 3]], dtype=float)
        data = Dataset(X, np.array([0, 1, 0, 1, 0]), ("a", "b"))
        s = TreeSampler(data, Hyperparameters(p_min=1))
        state = s.state_of(refit(build((0, 2.5, (0, 1.5, None, None), None)), data)[0])
        for seed in range(200):
            prop = s.propose_change_split(state, np.random.default_rng(seed))
            if prop is None or prop.path != "L":
                continue
            new = prop.tree.at("L").rule.feature
            assert prop.log_ratio == pytest.approx(0.0 if new == 0 else math.log(1 / 2), abs=1e-12)

    def test_change_split_same_range_is_symmetric(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1))
        state = s.state_of(refit(build((0, 0.5, None, None)), small_data)[0])
        for seed in range(50):
            prop = s.propose_change_split(state, np.random.default_rng(seed))
            if prop.tree.root.rule.feature == 0:
                assert prop.log_ratio == 0.0

    def test_change_rule_scale(self):
        X = np.array([[0.0], [100.0], [50.0]])
        s = TreeSampler(Dataset(X, np.array([0, 1, 0]), ("x",)), Hyperparameters(p_min=1))
        state = s.state_of(refit(build((0, 50.0, None, None)), s.data)[0])
        steps = [s.propose_change_rule(state, np.random.default_rng(i)).tree.root.rule.threshold - 50 for i in range(4000)]
        assert np.std(steps) == pytest.approx(30.0, rel=0.05)

    def test_unavailable_on_single_leaf(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1))
        state = s.initial_state()
        rng = np.random.default_rng(0)
        assert s.propose_death(state, rng) is None
        assert s.propose_change_split(state, rng) is None
        assert s.propose_change_rule(state, rng) is None

    def test_birth_unavailable_at_cap(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1, max_leaves=1))
        assert s.propose_birth(s.initial_state(), np.random.default_rng(0)) is None


class TestSweep:
    def data(self):
        X = np.arange(20, dtype=float)[:, None]
        return Dataset(X, np.array([0, 1] * 10), ("x",))

    def test_clean(self):
        tree, status = sweep(build((0, 10.0, None, None)), self.data(), 5)
        assert status is SweepStatus.CLEAN and tree.leaf_count == 2

    def test_one_small_leaf_collapses_parent(self):
        # leaves hold 4, 6 and 10 points; only the first is below 5
        tree = build((0, 10.0, (0, 4.0, None, None), None))
        out, status = sweep(tree, self.data(), 5)
        assert status is SweepStatus.SWEPT
        assert out.leaf_count == 2
        assert all(leaf.size >= 5 for _, leaf in out.leaves())
        assert out.root.left.size == 10

    def test_sibling_subtree_is_promoted(self):
        tree = build((0, 2.0, None, (0, 10.0, None, None)))
        out, status = sweep(tree, self.data(), 5)
        assert status is SweepStatus.SWEPT
        assert out.structure_key() == (0, (), ())
        assert out.root.rule.threshold == 10.0
        assert [leaf.size for _, leaf in out.leaves()] == [10, 10]

    def test_two_small_leaves_reject(self):
        tree = build((0, 3.0, None, (0, 17.0, None, None)))
        _, status = sweep(tree, self.data(), 5)
        assert status is SweepStatus.REJECT


class TestStep:
    def test_neutral_candidate_always_accepted(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1, move_probs=(0, 0, 0, 1)))
        state = s.state_of(refit(build((0, 0.5, None, None)), small_data)[0])
        s._proposers = (None, None, None, lambda st, rng: Proposal(MoveKind.CHANGE_RULE, st.tree, 0.0, ""))
        rng = np.random.default_rng(0)
        assert all(s.step(state, rng)[1] for _ in range(100))

    def test_rejected_sweep_keeps_state(self):
        X = np.arange(20, dtype=float)[:, None]
        data = Dataset(X, np.array([0, 1] * 10), ("x",))
        s = TreeSampler(data, Hyperparameters(p_min=5, move_probs=(0, 0, 0, 1)))
        state = s.state_of(refit(build((0, 10.0, None, None)), data)[0])
        bad = refit(build((0, 3.0, None, (0, 17.0, None, None))), data)[0]
        s._proposers = (None, None, None, lambda st, rng: Proposal(MoveKind.CHANGE_RULE, bad, 0.0, ""))
        new, accepted, move, status = s.step(state, np.random.default_rng(0))
        assert not accepted and status is SweepStatus.REJECT
        assert new.tree is state.tree and new.iteration == state.iteration + 1

    def test_unavailable_move_is_a_rejection(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1, move_probs=(0, 1, 0, 0)))
        new, accepted, move, status = s.step(s.initial_state(), np.random.default_rng(0))
        assert move is MoveKind.DEATH and not accepted and status is None

    def test_move_frequencies(self, small_data):
        s = TreeSampler(small_data, Hyperparameters(p_min=1))
        rng = np.random.default_rng(11)
        state = s.initial_state()
        counts = np.zeros(4)
        N = 100_000
        for _ in range(N):
            state, _, move, _ = s.step(state, rng)
            counts[move] += 1
        np.testing.assert_allclose(counts / N, (0.1, 0.1, 0.2, 0.6), atol=0.02)

    @given(st.integers(0, 1000))
    def test_state_stays_consistent(self, seed):
        data = random_data(seed, n=30)
        h = Hyperparameters(p_min=2)
        s = TreeSampler(data, h)
        rng = np.random.default_rng(seed)
        state = s.initial_state()
        for _ in range(300):
            state, *_ = s.step(state, rng)
        assert state.log_lik == pytest.approx(log_marginal_likelihood(state.tree.strip(), data), abs=1e-9)
        assert state.log_prior == pytest.approx(log_tree_prior(state.tree, PriorConfig(), data, s.space), abs=1e-9)
        assert all(leaf.size >= 2 for _, leaf in state.tree.leaves())


class TestRun:
    def test_counting(self, small_data):
        ens, diag = run_chain(small_data, Hyperparameters(p_min=1, burn_in=0, post_burn_in=10, thin=1))
        assert len(ens) == 10 and diag.iterations == 10

    def test_thin_seven(self, small_data):
        ens, _ = run_chain(small_data, Hyperparameters(p_min=1, burn_in=0, post_burn_in=10_000, thin=7))
        assert len(ens) == 10_000 // 7

    def test_too_few_samples(self, small_data):
        with pytest.raises(ConfigError):
            run_chain(small_data, Hyperparameters(p_min=1, burn_in=0, post_burn_in=13, thin=7))

    def test_deterministic(self, stca_small):
        h = Hyperparameters(burn_in=500, post_burn_in=500, seed=5)
        a_ens, a = run_chain(stca_small, h)
        b_ens, b = run_chain(stca_small, h)
        np.testing.assert_array_equal(a.log_lik, b.log_lik)
        np.testing.assert_array_equal(a.move, b.move)
        assert [t.structure_key() for t in a_ens.trees] == [t.structure_key() for t in b_ens.trees]

    def test_invariants_on_synthetic(self, stca_small):
        h = Hyperparameters(burn_in=2000, post_burn_in=1400, seed=2)
        ens, diag = run_chain(stca_small, h)
        assert diag.leaves.max() <= stca_small.n - 1
        for t in ens.trees:
            fitted, bad = refit(t, stca_small, h.p_min)
            assert bad == 0
        rates = [diag.acceptance_rate(p) for p in ("burn-in", "post-burn-in")]
        assert all(0 <= r <= 1 for r in rates)

    def test_chipman_prior_runs(self, stca_small):
        h = Hyperparameters(burn_in=500, post_burn_in=500, prior="chipman", gamma_split=0.95, delta_split=1.0)
        ens, diag = run_chain(stca_small, h)
        assert len(ens) == 500 // 7

    def test_chipman_rejects_certain_root(self, small_data):
        with pytest.raises(ConfigError):
            TreeSampler(small_data, Hyperparameters(prior="chipman", gamma_split=1.5, delta_split=1.0))

    def test_symmetric_data_gives_symmetric_thresholds(self):
        # two mirror-image clusters: the posterior over the single threshold is symmetric about 0
        left = -np.array([1.0, 1.5, 2.0, 2.5, 3.0])
        X = np.concatenate([left, -left])[:, None]
        data = Dataset(X, np.array([0] * 5 + [1] * 5), ("x",))
        h = Hyperparameters(p_min=1, max_leaves=2, burn_in=1000, post_burn_in=60_000, thin=1, seed=3)
        ens, _ = run_chain(data, h)
        ts = np.array([t.root.rule.threshold for t in ens.trees if t.leaf_count == 2])
        assert len(ts) > 10_000
        assert abs(np.mean(ts < 0) - 0.5) < 0.05
        assert abs(np.mean(ts)) < 0.1


class TestDiagnostics:
    def test_csv_columns(self, small_data, tmp_path):
        _, diag = run_chain(small_data, Hyperparameters(p_min=1, burn_in=5, post_burn_in=14, thin=7))
        path = tmp_path / "d.csv"
        diag.to_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["phase", "iteration", "loglik", "leaves", "move", "accepted"]
        assert len(rows) == 20
        assert rows[1][0] == "burn-in" and rows[-1][0] == "post-burn-in"

    def test_accept_counts_sum(self, small_data):
        _, diag = run_chain(small_data, Hyperparameters(p_min=1, burn_in=50, post_burn_in=70, thin=7))
        total = sum(p for _, p in diag.accept_counts().values())
        assert total == 120

    def test_convergence_flag(self):
        assert convergence_flag(np.linspace(-100, -10, 100)) is True
        assert convergence_flag(np.linspace(-10, -100, 100)) is False
        assert convergence_flag(np.zeros(5)) is None

    def test_summary_is_json_safe(self, small_data):
        import json

        _, diag = run_chain(small_data, Hyperparameters(p_min=1, burn_in=0, post_burn_in=14, thin=7))
        json.dumps(diag.summary(), allow_nan=False)
