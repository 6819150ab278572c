"""Random regroupings of a test's samples and their decoy scores.

A decoy score is the score of the same n values under a random (or
exhaustively enumerated) reassignment of which samples count as cases.
Because scores are within-group symmetric, a uniformly random ordering of
all n samples induces a uniformly random case subset, so both views are
score-equivalent.
"""

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import backend
from .scores import ScoreKind, midranks, rank_sum_expectation

DEFAULT_MAX_SCORES = 50


class ResamplingMode(Enum):
    WITH_REPLACEMENT = "with-replacement"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class PermutationBudget:
    """Per-test score budget: t total scores (1 target + t-1 decoys)."""

    t: int
    cap: int
    mode: ResamplingMode


@dataclass(frozen=True)
class Regrouping:
    """An ordering of sample indices whose first n1 positions are cases."""

    assignment: np.ndarray


def grouping_count(n, n0, cap):
    """min(C(n, n0), cap) without forming the full binomial coefficient."""
    k = min(n0, n - n0)
    count = 1
    for i in range(k):
        count = count * (n - i) // (i + 1)
        if count > cap:
            return cap
    return min(count, cap)


def resolve_budget(n, n0, cap):
    """Choose t = min(C(n, n0), cap) and the matching sampling mode.

    Exhaustive enumeration activates exactly when every distinct grouping
    fits within the cap; otherwise regroupings are sampled with
    replacement.
    """
    if cap < 2:
        raise ValueError("cap must be at least 2 (one target, one decoy)")
    if n0 <= 0 or n0 >= n:
        raise ValueError("both groups must be nonempty")
    distinct = grouping_count(n, n0, cap + 1)
    if distinct <= cap:
        return PermutationBudget(t=distinct, cap=cap, mode=ResamplingMode.EXHAUSTIVE)
    return PermutationBudget(t=cap, cap=cap, mode=ResamplingMode.WITH_REPLACEMENT)


def sample_regrouping(n, n1, rng):
    """A regrouping drawn uniformly from all n! orderings (identity included)."""
    if not 1 <= n1 <= n:
        raise ValueError("n1 must be in 1..n")
    return Regrouping(assignment=rng.permutation(n))


def exhaustive_case_subsets(n, n1):
    """All case subsets of size n1 in lexicographic order, identity first.

    Returns (case_idx, ctrl_idx) int32 arrays of shape (C(n, n1), n1) and
    (C(n, n1), n0); row 0 is the original grouping.
    """
    case_idx = np.array(list(itertools.combinations(range(n), n1)), dtype=np.int32)
    mask = np.ones((case_idx.shape[0], n), dtype=bool)
    np.put_along_axis(mask, case_idx.astype(np.intp), False, axis=1)
    ctrl_idx = np.nonzero(mask)[1].reshape(case_idx.shape[0], n - n1).astype(np.int32)
    return case_idx, ctrl_idx


def score_all_groupings(values, n1, kind, budget, rng):
    """Target plus decoy scores for every test in a values matrix.

    Parameters
    ----------
    values : (m, n) float64, cases in the first n1 columns
    kind : ScoreKind
    budget : resolved PermutationBudget for (n, n - n1)
    rng : numpy Generator driving the sampled regroupings

    Returns
    -------
    (m, budget.t) float64; column 0 is the target score.  Tests whose t
    statistic is degenerate yield NaN entries.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    m, n = values.shape
    absolute = kind is ScoreKind.ABS_T
    if budget.mode is ResamplingMode.EXHAUSTIVE:
        case_idx, ctrl_idx = exhaustive_case_subsets(n, n1)
        if kind is ScoreKind.RANK_SUM_CENTERED:
            return backend.rank_scores_subsets(
                midranks(values), case_idx, rank_sum_expectation(n, n1))
        return backend.t_scores_subsets(values, case_idx, ctrl_idx, absolute)
    u = rng.random((m, budget.t - 1, n1))
    if kind is ScoreKind.RANK_SUM_CENTERED:
        return backend.rank_scores_sampled(
            midranks(values), u, rank_sum_expectation(n, n1))
    return backend.t_scores_sampled(values, u, absolute)


def decoy_scores(samples, kind, budget, rng):
    """The t - 1 decoy scores for one test.

    With-replacement mode scores budget.t - 1 independent uniform
    regroupings; exhaustive mode scores every case subset except one copy
    of the original grouping.  Score errors (degenerate variance) surface
    as NaN from the kernels and are re-raised here.
    """
    from .scores import DegenerateVarianceError

    all_scores = score_all_groupings(samples.values[None, :], samples.n1,
                                     kind, budget, rng)[0]
    decoys = all_scores[1:]
    if np.isnan(decoys).any():
        raise DegenerateVarianceError("zero pooled variance in a regrouping")
    return decoys
