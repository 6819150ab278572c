"""Comparison procedures: p-value generation plus BH and Storey control.

These are the p-value-based competitors the decoy procedures are
benchmarked against: Student-t p-values, exact/approximate rank-sum
p-values, pooled-permutation p-values, the Benjamini-Hochberg step-up,
and Storey q-values with a fixed lambda.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, stdtr

from . import backend
from .permute import exhaustive_case_subsets
from .scores import ScoreKind, midranks, rank_sum_expectation

#: Largest total sample count for which rank-sum p-values are exact.
EXACT_RANK_SUM_MAX_N = 12

#: Tests per block when enumerating rank-sum permutations.
_CHUNK_ROWS = 2000


@dataclass(frozen=True)
class PValueVector:
    """Per-test p-values with a provenance tag."""

    p: np.ndarray
    method: str

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        object.__setattr__(self, "p", p)
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("p-values must lie in [0, 1]")


def _as_pvalues(p):
    return p.p if isinstance(p, PValueVector) else np.asarray(p, dtype=np.float64)


def t_sf(t, df):
    """Student-t survival function via the regularized incomplete beta."""
    return stdtr(df, -np.asarray(t, dtype=np.float64))


def _signed_t_stats(dataset):
    values = dataset.case_first_values()
    n = values.shape[1]
    case_idx = np.arange(dataset.n1, dtype=np.int32)[None, :]
    ctrl_idx = np.arange(dataset.n1, n, dtype=np.int32)[None, :]
    return backend.t_scores_subsets(values, case_idx, ctrl_idx, False)[:, 0]


def t_pvalues(dataset, two_sided=True):
    """Student-t p-values with n - 2 degrees of freedom.

    Degenerate-variance tests get p = 1 with a warning rather than an
    error, so one flat row cannot abort a whole matrix.
    """
    t = _signed_t_stats(dataset)
    df = dataset.n - 2
    degenerate = np.isnan(t)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} tests with zero pooled "
                      "variance; their p-values are set to 1", stacklevel=2)
        t = np.where(degenerate, 0.0, t)
    if two_sided:
        p = 2.0 * t_sf(np.abs(t), df)
    else:
        p = t_sf(t, df)
    p = np.minimum(p, 1.0)
    p[degenerate] = 1.0
    return PValueVector(p=p, method="t")


def _rank_sum_exact(mr, n1, expected):
    """Exact two-sided permutation p for the centered rank-sum score."""
    m, n = mr.shape
    case_idx, _ = exhaustive_case_subsets(n, n1)
    total = case_idx.shape[0]
    observed = backend.rank_scores_subsets(
        mr, np.arange(n1, dtype=np.int32)[None, :], expected)[:, 0]
    p = np.empty(m)
    for lo in range(0, m, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, m)
        block = backend.rank_scores_subsets(
            np.ascontiguousarray(mr[lo:hi]), case_idx, expected)
        p[lo:hi] = (block >= observed[lo:hi, None]).sum(axis=1) / total
    return p


def _tie_term(mr):
    """sum(b^3 - b) over tie blocks per row, as sum_i (c_i^2 - 1)."""
    m, n = mr.shape
    sorted_mr = np.sort(mr, axis=1)
    idx = np.arange(n)
    is_start = np.ones((m, n), dtype=bool)
    is_start[:, 1:] = sorted_mr[:, 1:] != sorted_mr[:, :-1]
    start = np.maximum.accumulate(np.where(is_start, idx, 0), axis=1)
    nxt = np.full((m, n + 1), n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        nxt[:, i] = np.where(is_start[:, i], i, nxt[:, i + 1])
    block = nxt[:, 1:] - start
    return (block.astype(np.float64) ** 2 - 1.0).sum(axis=1)


def _rank_sum_normal(mr, n1, expected):
    """Normal approximation with tie correction and continuity correction."""
    m, n = mr.shape
    n0 = n - n1
    w = mr[:, :n1].sum(axis=1)
    var = n1 * n0 * (n + 1) / 12.0
    var = var - n1 * n0 * _tie_term(mr) / (12.0 * n * (n - 1))
    z = np.zeros(m)
    positive = var > 0
    shifted = np.maximum(np.abs(w - expected) - 0.5, 0.0)
    z[positive] = shifted[positive] / np.sqrt(var[positive])
    p = np.minimum(2.0 * ndtr(-z), 1.0)
    p[~positive] = 1.0
    return p


def rank_sum_pvalues(dataset, exact_max_n=EXACT_RANK_SUM_MAX_N):
    """Two-sided rank-sum p-values.

    Exact by enumerating every case subset when n <= exact_max_n (midranks
    make ties exact too); otherwise the normal approximation with tie and
    continuity corrections.
    """
    values = dataset.case_first_values()
    mr = midranks(values)
    n1 = dataset.n1
    expected = rank_sum_expectation(dataset.n, n1)
    if dataset.n <= exact_max_n:
        p = _rank_sum_exact(mr, n1, expected)
        method = "ranksum-exact"
    else:
        p = _rank_sum_normal(mr, n1, expected)
        method = "ranksum-normal"
    return PValueVector(p=p, method=method)


def pooled_permutation_pvalues(dataset, kind, per_test_draws, rng):
    """Empirical p-values against one score pool shared by all tests.

    Each test contributes ``per_test_draws`` regrouping scores to a
    global pool; p_j = (1 + #{pool >= target_j}) / (1 + pool size), so
    p-values are strictly positive.
    """
    if per_test_draws < 1:
        raise ValueError("per_test_draws must be >= 1")
    values = dataset.case_first_values()
    m, n = values.shape
    n1 = dataset.n1
    absolute = kind is ScoreKind.ABS_T
    u = rng.random((m, per_test_draws, n1))
    if kind is ScoreKind.RANK_SUM_CENTERED:
        scores = backend.rank_scores_sampled(
            midranks(values), u, rank_sum_expectation(n, n1))
    else:
        scores = backend.t_scores_sampled(values, u, absolute)
    targets = scores[:, 0]
    pool = scores[:, 1:].ravel()
    pool = np.sort(pool[~np.isnan(pool)])
    degenerate = np.isnan(targets)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} degenerate tests; their "
                      "p-values are set to 1", stacklevel=2)
    at_least = pool.size - np.searchsorted(pool, np.where(degenerate, np.inf,
                                                          targets), side="left")
    p = (1.0 + at_least) / (1.0 + pool.size)
    p[degenerate] = 1.0
    return PValueVector(p=p, method=f"pooled-permutation-{per_test_draws}")


def bh_reject(p, alpha):
    """Benjamini-Hochberg step-up: indices of the rejected tests.

    Rejects the k smallest p-values for the largest k with
    p_(k) <= k * alpha / m.
    """
    p = _as_pvalues(p)
    m = p.size
    if m == 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    thresholds = alpha * np.arange(1, m + 1) / m
    ok = np.nonzero(sorted_p <= thresholds)[0]
    if ok.size == 0:
        return np.empty(0, dtype=np.int64)
    k = int(ok[-1] + 1)
    return np.sort(order[:k])


def storey_qvalues(p, lam=0.5):
    """Storey q-values with a single fixed lambda.

    pi0 = min(1, #{p > lam} / ((1 - lam) m)); q_(k) is the running
    minimum of pi0 * m * p_(j) / j from the largest p down.  Rejection at
    level alpha is q <= alpha; with pi0 = 1 that reproduces BH exactly.
    """
    p = _as_pvalues(p)
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda must be in [0, 1)")
    m = p.size
    if m == 0:
        return np.empty(0)
    pi0 = min(1.0, float((p > lam).sum()) / ((1.0 - lam) * m))
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    raw = pi0 * m * sorted_p / np.arange(1, m + 1)
    q_sorted = np.minimum.accumulate(raw[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(q_sorted, 1.0)
    return q


def storey_reject(p, alpha, lam=0.5):
    """Indices with Storey q-value at most alpha."""
    q = storey_qvalues(p, lam=lam)
    return np.nonzero(q <= alpha)[0]
