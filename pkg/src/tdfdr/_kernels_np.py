"""Pure-numpy scoring kernels.

Reference implementation of the hot loops; ``tdfdr._kernels_c`` mirrors it
operation for operation so both backends return bit-identical arrays.

Conventions shared by both backends:

* Group values are sorted ascending before any reduction, and sums are
  accumulated strictly left to right.  This makes every score an exact
  function of the two value multisets, so within-group permutations can
  never change a score even in the last ulp.
* Regroupings are expanded from caller-supplied uniforms ``u`` in [0, 1)
  with a partial Fisher-Yates pass (``j = i + floor(u * (n - i))``), so the
  random stream lives outside the kernels and is backend-independent.
* A zero pooled sum of squared deviations yields NaN (degenerate variance);
  callers decide whether that is an error or an unused-label test.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _partial_fisher_yates(u, n):
    """Expand uniforms into case/control index assignments.

    Parameters
    ----------
    u : (m, k, n1) float64 in [0, 1)
    n : total sample count per test

    Returns
    -------
    (m, k, n) int32 array whose first n1 entries per row are the case
    indices, the rest the control indices (order within groups arbitrary).
    """
    m, k, n1 = u.shape
    scratch = np.broadcast_to(np.arange(n, dtype=np.int32), (m, k, n)).copy()
    for i in range(n1):
        j = i + (u[:, :, i] * (n - i)).astype(np.int64)
        j = j[:, :, None]
        chosen = np.take_along_axis(scratch, j, axis=-1)
        np.put_along_axis(scratch, j, scratch[:, :, i : i + 1], axis=-1)
        scratch[:, :, i] = chosen[:, :, 0]
    return scratch


def _seq_sum(a):
    """Left-to-right sum over the last axis (fixed association order)."""
    total = a[..., 0].copy()
    for i in range(1, a.shape[-1]):
        total += a[..., i]
    return total


def _t_from_groups(case_vals, ctrl_vals, absolute):
    """Pooled-variance two-sample t from gathered group values.

    Sorts each group, then mean / sum-of-squared-deviations via sequential
    sums; NaN where the pooled deviation sum is exactly zero.
    """
    n1 = case_vals.shape[-1]
    n0 = ctrl_vals.shape[-1]
    case_vals = np.sort(case_vals, axis=-1)
    ctrl_vals = np.sort(ctrl_vals, axis=-1)
    s1 = _seq_sum(case_vals)
    s0 = _seq_sum(ctrl_vals)
    mean1 = s1 / n1
    mean0 = s0 / n0
    d1 = case_vals - mean1[..., None]
    d0 = ctrl_vals - mean0[..., None]
    ssd = _seq_sum(d1 * d1) + _seq_sum(d0 * d0)
    pooled = ssd / (n1 + n0 - 2)
    inv = 1.0 / n1 + 1.0 / n0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (mean1 - mean0) / np.sqrt(pooled * inv)
    t = np.where(ssd == 0.0, np.nan, t)
    if absolute:
        t = np.abs(t)
    return t


def t_scores_sampled(values, u, absolute):
    """Target plus sampled-regrouping t scores.

    Parameters
    ----------
    values : (m, n) float64, cases in columns 0..n1-1
    u : (m, k, n1) float64 uniforms driving k regroupings per test
    absolute : bool, return ``|t|`` instead of signed t

    Returns
    -------
    (m, k + 1) float64; column 0 is the original-grouping score.
    """
    m, n = values.shape
    _, k, n1 = u.shape
    assign = _partial_fisher_yates(u, n)
    gathered = np.take_along_axis(values[:, None, :], assign, axis=-1)
    out = np.empty((m, k + 1))
    out[:, 0] = _t_from_groups(values[:, :n1], values[:, n1:], absolute)
    out[:, 1:] = _t_from_groups(gathered[..., :n1], gathered[..., n1:], absolute)
    return out


def t_scores_subsets(values, case_idx, ctrl_idx, absolute):
    """t scores for explicit case subsets shared by every test.

    Parameters
    ----------
    values : (m, n) float64
    case_idx : (s, n1) int32 case column indices per regrouping
    ctrl_idx : (s, n0) int32 complementary control indices

    Returns
    -------
    (m, s) float64
    """
    case_vals = values[:, case_idx]
    ctrl_vals = values[:, ctrl_idx]
    return _t_from_groups(case_vals, ctrl_vals, absolute)


def rank_scores_sampled(midranks, u, expected):
    """Centered rank-sum scores |W - expected| for sampled regroupings.

    Parameters
    ----------
    midranks : (m, n) float64 midranks of each test's n values
    u : (m, k, n1) float64 uniforms, as in :func:`t_scores_sampled`
    expected : null mean of the case rank sum, n1 * (n + 1) / 2

    Returns
    -------
    (m, k + 1) float64; column 0 is the original grouping.
    """
    m, n = midranks.shape
    _, k, n1 = u.shape
    assign = _partial_fisher_yates(u, n)
    gathered = np.take_along_axis(midranks[:, None, :], assign[..., :n1], axis=-1)
    out = np.empty((m, k + 1))
    out[:, 0] = np.abs(_seq_sum(midranks[:, :n1]) - expected)
    out[:, 1:] = np.abs(_seq_sum(gathered) - expected)
    return out


def rank_scores_subsets(midranks, case_idx, expected):
    """Centered rank-sum scores for explicit shared case subsets."""
    gathered = midranks[:, case_idx]
    return np.abs(_seq_sum(gathered) - expected)


def rank_with_ties(scores, jitter):
    """Sort each row descending, breaking ties by the jitter values.

    Parameters
    ----------
    scores : (m, t) float64
    jitter : (m, t) float64, unique uniforms per row

    Returns
    -------
    sorted_scores : (m, t) float64 descending
    order : (m, t) int32, original column index at each sorted position
    rank0 : (m,) int64, 1-based sorted position of column 0
    """
    shuffle = np.argsort(jitter, axis=-1, kind="stable").astype(np.int32)
    shuffled = np.take_along_axis(scores, shuffle, axis=-1)
    by_score = np.argsort(-shuffled, axis=-1, kind="stable")
    order = np.take_along_axis(shuffle, by_score, axis=-1)
    sorted_scores = np.take_along_axis(scores, order, axis=-1)
    rank0 = np.argmax(order == 0, axis=-1).astype(np.int64) + 1
    return sorted_scores, order, rank0
