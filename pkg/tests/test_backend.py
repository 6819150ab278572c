"""Backend equivalence: compiled kernels must match the numpy fallback bit
for bit, on ties, degenerate rows, and sentinel scores alike."""

import numpy as np
import pytest
from scipy.stats import rankdata

from tdfdr import _kernels_np, backend
from tdfdr.permute import exhaustive_case_subsets

compiled = pytest.importorskip("tdfdr._kernels_c")


def _tied_values(rng, m, n):
    vals = rng.standard_normal((m, n))
    vals[: m // 3] = np.round(vals[: m // 3])      # heavy ties
    vals[m // 3] = 2.5                             # degenerate row
    return vals


@pytest.mark.parametrize("absolute", [True, False])
def test_t_scores_sampled_bit_identical(absolute):
    rng = np.random.default_rng(101)
    vals = _tied_values(rng, 300, 14)
    u = rng.random((300, 23, 6))
    a = compiled.t_scores_sampled(vals, u, absolute)
    b = _kernels_np.t_scores_sampled(vals, u, absolute)
    assert np.array_equal(a, b, equal_nan=True)


def test_rank_scores_sampled_bit_identical():
    rng = np.random.default_rng(102)
    vals = _tied_values(rng, 200, 12)
    mr = rankdata(vals, method="average", axis=1)
    u = rng.random((200, 17, 5))
    a = compiled.rank_scores_sampled(mr, u, 5 * 13 / 2.0)
    b = _kernels_np.rank_scores_sampled(mr, u, 5 * 13 / 2.0)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("absolute", [True, False])
def test_subset_kernels_bit_identical(absolute):
    rng = np.random.default_rng(103)
    vals = _tied_values(rng, 150, 8)
    case_idx, ctrl_idx = exhaustive_case_subsets(8, 4)
    a = compiled.t_scores_subsets(vals, case_idx, ctrl_idx, absolute)
    b = _kernels_np.t_scores_subsets(vals, case_idx, ctrl_idx, absolute)
    assert np.array_equal(a, b, equal_nan=True)
    mr = rankdata(vals, method="average", axis=1)
    a = compiled.rank_scores_subsets(mr, case_idx, 4 * 9 / 2.0)
    b = _kernels_np.rank_scores_subsets(mr, case_idx, 4 * 9 / 2.0)
    assert np.array_equal(a, b)


def test_rank_with_ties_bit_identical():
    rng = np.random.default_rng(104)
    scores = rng.standard_normal((250, 40))
    scores[:120] = np.round(scores[:120] * 2.0)    # many exact ties
    scores[5, :] = 1.0                             # fully tied row
    scores[6, ::2] = -np.inf                       # sentinel scores
    jitter = rng.random((250, 40))
    a = compiled.rank_with_ties(scores, jitter)
    b = _kernels_np.rank_with_ties(scores, jitter)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_rank_with_ties_orders_descending_and_ranks_target():
    rng = np.random.default_rng(105)
    scores = np.array([[3.0, 1.0, 5.0, 5.0]])
    jitter = rng.random((1, 4))
    sorted_scores, order, rank0 = backend.rank_with_ties(scores, jitter)
    assert np.array_equal(sorted_scores[0], np.array([5.0, 5.0, 3.0, 1.0]))
    assert rank0[0] == 3
    assert set(order[0].tolist()) == {0, 1, 2, 3}


def test_degenerate_rows_yield_nan():
    vals = np.array([[1.0, 1.0, 1.0, 1.0],
                     [1.0, 2.0, 1.0, 2.0]])
    case_idx = np.array([[0, 1]], dtype=np.int32)
    ctrl_idx = np.array([[2, 3]], dtype=np.int32)
    out = backend.t_scores_subsets(vals, case_idx, ctrl_idx, True)
    assert np.isnan(out[0, 0])
    assert np.isfinite(out[1, 0])


def test_sampled_target_column_is_identity_grouping():
    rng = np.random.default_rng(106)
    vals = rng.standard_normal((50, 10))
    u = rng.random((50, 7, 5))
    case_idx = np.arange(5, dtype=np.int32)[None, :]
    ctrl_idx = np.arange(5, 10, dtype=np.int32)[None, :]
    sampled = backend.t_scores_sampled(vals, u, True)
    direct = backend.t_scores_subsets(vals, case_idx, ctrl_idx, True)
    assert np.array_equal(sampled[:, 0], direct[:, 0])


def test_fisher_yates_uniform_over_case_subsets():
    # n=4, choose 2: all six subsets should be equally likely
    rng = np.random.default_rng(107)
    draws = 60000
    u = rng.random((1, draws, 2))
    assign = _kernels_np._partial_fisher_yates(u, 4)[0]
    subsets = np.sort(assign[:, :2], axis=1)
    codes = subsets[:, 0] * 4 + subsets[:, 1]
    _, counts = np.unique(codes, return_counts=True)
    assert counts.size == 6
    expected = draws / 6.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    from scipy.stats import chi2 as chi2_dist
    assert chi2_dist.sf(chi2, df=5) > 1e-3
