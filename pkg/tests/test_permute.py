"""Budget resolution, regrouping draws, and decoy score generation."""

import itertools

import numpy as np
import pytest
from scipy.stats import chi2

from tdfdr.permute import (PermutationBudget, ResamplingMode, decoy_scores,
                           exhaustive_case_subsets, grouping_count,
                           resolve_budget, sample_regrouping,
                           score_all_groupings)
from tdfdr.scores import GroupedSamples, ScoreKind


class TestResolveBudget:
    def test_small_design_goes_exhaustive(self):
        b = resolve_budget(6, 3, 50)
        assert b.t == 20 and b.mode is ResamplingMode.EXHAUSTIVE

    def test_paper_scale_samples_with_replacement(self):
        b = resolve_budget(20, 10, 50)
        assert b.t == 50 and b.mode is ResamplingMode.WITH_REPLACEMENT

    def test_cap_binds(self):
        b = resolve_budget(4, 2, 2)
        assert b.t == 2 and b.mode is ResamplingMode.WITH_REPLACEMENT

    def test_exact_boundary_is_exhaustive(self):
        b = resolve_budget(6, 3, 20)
        assert b.t == 20 and b.mode is ResamplingMode.EXHAUSTIVE

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            resolve_budget(6, 0, 50)
        with pytest.raises(ValueError):
            resolve_budget(6, 6, 50)

    def test_tiny_cap_rejected(self):
        with pytest.raises(ValueError):
            resolve_budget(6, 3, 1)

    def test_huge_designs_do_not_blow_up(self):
        # C(2000, 1000) is astronomically large; the capped count must not
        # materialize it
        b = resolve_budget(2000, 1000, 50)
        assert b.t == 50 and b.mode is ResamplingMode.WITH_REPLACEMENT


def test_grouping_count_matches_comb():
    import math

    for n in range(2, 12):
        for k in range(1, n):
            exact = math.comb(n, k)
            assert grouping_count(n, k, 10**9) == exact
            assert grouping_count(n, k, 3) == min(exact, 3)


class TestSampleRegrouping:
    def test_uniform_over_case_subsets_n2(self):
        rng = np.random.default_rng(11)
        draws = 100_000
        first = np.array([sample_regrouping(2, 1, rng).assignment[0]
                          for _ in range(draws)])
        counts = np.bincount(first, minlength=2)
        expected = draws / 2.0
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert chi2.sf(stat, df=1) > 1e-3

    def test_full_group_allows_any_ordering(self):
        rng = np.random.default_rng(12)
        r = sample_regrouping(3, 3, rng)
        assert sorted(r.assignment.tolist()) == [0, 1, 2]

    def test_same_seed_same_sequence(self):
        a_rng = np.random.default_rng(13)
        b_rng = np.random.default_rng(13)
        a = [sample_regrouping(8, 4, a_rng).assignment for _ in range(5)]
        b = [sample_regrouping(8, 4, b_rng).assignment for _ in range(5)]
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestExhaustiveSubsets:
    def test_identity_first_and_complete(self):
        case_idx, ctrl_idx = exhaustive_case_subsets(6, 3)
        assert case_idx.shape == (20, 3)
        assert case_idx[0].tolist() == [0, 1, 2]
        assert ctrl_idx[0].tolist() == [3, 4, 5]
        as_sets = {tuple(row) for row in case_idx.tolist()}
        assert as_sets == {tuple(sorted(c))
                           for c in itertools.combinations(range(6), 3)}
        for crow, krow in zip(case_idx, ctrl_idx):
            assert sorted(crow.tolist() + krow.tolist()) == list(range(6))


class TestDecoyScores:
    def test_exhaustive_complement_mirrors_target(self):
        # perturbed two-against-two design: the complement regrouping flips
        # the sign, so exactly one decoy matches the target magnitude
        s = GroupedSamples([10.0, 11.0, 0.0, 1.0], 2)
        budget = resolve_budget(4, 2, 50)
        assert budget.t == 6
        rng = np.random.default_rng(21)
        decoys = decoy_scores(s, ScoreKind.ABS_T, budget, rng)
        assert decoys.shape == (5,)
        from tdfdr.scores import t_statistic

        target = t_statistic(s, absolute=True)
        assert np.isclose(decoys, target).sum() == 1

    def test_exhaustive_rank_sum_example(self):
        s = GroupedSamples([10.0, 10.0, 0.0, 0.0], 2)
        budget = resolve_budget(4, 2, 50)
        rng = np.random.default_rng(22)
        decoys = decoy_scores(s, ScoreKind.RANK_SUM_CENTERED, budget, rng)
        # complement keeps the split (score 2); the four mixed regroupings
        # balance the groups (score 0)
        assert sorted(decoys.tolist()) == [0.0, 0.0, 0.0, 0.0, 2.0]

    def test_single_decoy_budget(self):
        s = GroupedSamples([1.0, 5.0, 2.0, 4.0, 3.0, 6.0], 3)
        budget = PermutationBudget(t=2, cap=2,
                                   mode=ResamplingMode.WITH_REPLACEMENT)
        decoys = decoy_scores(s, ScoreKind.ABS_T, budget,
                              np.random.default_rng(23))
        assert decoys.shape == (1,)

    def test_constant_samples_error_for_t(self):
        from tdfdr.scores import DegenerateVarianceError

        s = GroupedSamples([1.0, 1.0, 1.0, 1.0], 2)
        budget = resolve_budget(4, 2, 50)
        with pytest.raises(DegenerateVarianceError):
            decoy_scores(s, ScoreKind.ABS_T, budget,
                         np.random.default_rng(24))

    def test_constant_samples_all_tie_for_rank_sum(self):
        s = GroupedSamples([1.0, 1.0, 1.0, 1.0], 2)
        budget = resolve_budget(4, 2, 50)
        decoys = decoy_scores(s, ScoreKind.RANK_SUM_CENTERED, budget,
                              np.random.default_rng(25))
        assert (decoys == 0.0).all()


def test_null_target_rank_uniform():
    # exchangeable nulls: the target's rank among t = 10 scores must be
    # uniform on 1..10 (chi-squared check at the 1e-3 level)
    from tdfdr import backend

    rng = np.random.default_rng(31)
    m, n, n1, t = 20_000, 8, 4, 10
    values = rng.standard_normal((m, n))
    u = rng.random((m, t - 1, n1))
    scores = backend.t_scores_sampled(values, u, True)
    jitter = rng.random((m, t))
    _, _, ranks = backend.rank_with_ties(scores, jitter)
    counts = np.bincount(ranks, minlength=t + 1)[1:]
    expected = m / t
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert chi2.sf(stat, df=t - 1) > 1e-3


def test_exhaustive_scoring_excludes_one_original_copy():
    rng = np.random.default_rng(32)
    values = rng.standard_normal((5, 6))
    budget = resolve_budget(6, 3, 50)
    scores = score_all_groupings(values, 3, ScoreKind.ABS_T, budget, rng)
    assert scores.shape == (5, 20)
    # column 0 is the target; every other column is a different subset
    case_idx, _ = exhaustive_case_subsets(6, 3)
    assert [0, 1, 2] not in case_idx[1:].tolist()
