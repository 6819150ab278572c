"""Decoy-competition FDR control procedures.

Each test competes against permutation decoys of its own samples: the
rank of the original-grouping score among all t scores decides whether
the test keeps its score as a target, donates a top decoy score as a
decoy, or drops out (unused).  Sorting all tests by final score and
scanning the decoy/target ratio then gives a threshold with the requested
false-discovery-rate budget, no null distribution required.

Three variants: the standard procedure with decoy-to-target odds r, the
simplified procedure (r = 1, no unused labels), and an adaptive procedure
that spends part of the samples picking r before running on the rest.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend
from ._kernels_np import _partial_fisher_yates
from .permute import (DEFAULT_MAX_SCORES, PermutationBudget, ResamplingMode,
                      grouping_count, resolve_budget, score_all_groupings)
from .scores import ScoreKind

#: Final score carried by unused-label tests: strictly below every real
#: score (real scores are finite), so they sink in the global ranking.
BOTTOM = float("-inf")

#: Marker string used for the bottom sentinel in text output.
BOTTOM_MARKER = "BOTTOM"

LABEL_TARGET = "T"
LABEL_DECOY = "D"
LABEL_UNUSED = "U"


class Variant(Enum):
    STANDARD = "standard"
    SIMPLIFIED = "simplified"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class TdConfig:
    """Procedure settings; ``seed`` fixes every random draw in a run."""

    variant: Variant = Variant.SIMPLIFIED
    r: float = 1.0
    alpha: float = 0.05
    tau: int = DEFAULT_MAX_SCORES
    seed: int = 0
    adaptive_r_grid: tuple = (1, 2, 5, 10, 15, 20, 25)
    adaptive_n2: int | None = None
    adaptive_n2_min: int = 5
    adaptive_part1_cap: int = 252

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.r < 1.0:
            raise ValueError("r must be >= 1")
        if self.variant is Variant.SIMPLIFIED and self.r != 1.0:
            raise ValueError("the simplified variant fixes r = 1")
        if self.tau < 2:
            raise ValueError("tau must be at least 2")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not self.adaptive_r_grid:
            raise ValueError("adaptive_r_grid must be nonempty")


@dataclass(frozen=True)
class LabeledTest:
    """Per-test outcome of the decoy competition."""

    id: int
    target_score: float
    score_rank: int
    lam: float | None
    label: str
    final_score: float
    global_rank: int
    rejected: bool


@dataclass
class DecisionSet:
    """Rejections at one control level, plus the full per-test labelling."""

    k: int
    alpha: float
    r: float
    t: int
    variant: Variant
    score_kind: ScoreKind
    rejected_ids: np.ndarray
    estimated_fdr: float
    no_discoveries: bool
    labels: np.ndarray
    target_scores: np.ndarray
    score_ranks: np.ndarray
    lambdas: np.ndarray | None
    final_scores: np.ndarray
    global_ranks: np.ndarray
    n_degenerate: int
    seed: int
    selected_r: float | None = None
    _rejected_mask: np.ndarray = field(default=None, repr=False)

    @property
    def m(self):
        return self.labels.size

    def rejected_mask(self):
        if self._rejected_mask is None:
            mask = np.zeros(self.m, dtype=bool)
            mask[self.rejected_ids] = True
            self._rejected_mask = mask
        return self._rejected_mask

    def per_test(self):
        """LabeledTest records in test order."""
        rejected = self.rejected_mask()
        out = []
        for j in range(self.m):
            out.append(LabeledTest(
                id=j,
                target_score=float(self.target_scores[j]),
                score_rank=int(self.score_ranks[j]),
                lam=None if self.lambdas is None else float(self.lambdas[j]),
                label=str(self.labels[j]),
                final_score=float(self.final_scores[j]),
                global_rank=int(self.global_ranks[j]),
                rejected=bool(rejected[j]),
            ))
        return out


def rank_target(target, decoys, rng):
    """Rank of the target among all t scores, descending, random ties.

    Returns (rank, sorted_scores) with rank 1-based; ties between equal
    scores are ordered uniformly at random via a jitter draw.
    """
    scores = np.ascontiguousarray(
        np.concatenate([[target], np.asarray(decoys, dtype=np.float64)]))
    jitter = rng.random(scores.size)
    sorted_scores, _, rank0 = backend.rank_with_ties(scores[None, :],
                                                     jitter[None, :])
    return int(rank0[0]), sorted_scores[0]


def _standard_label_arrays(sorted_scores, ranks, r, p, u_prime):
    """Vectorized standard labelling from pre-drawn uniforms.

    p in [0, 1) smooths the rank into lam = rank - p; u_prime in (0, 1]
    maps decoys to the score ranked ceil(u_prime * t / (2r)).
    """
    m, t = sorted_scores.shape
    bound_t = t / (2.0 * r)
    lam = ranks - p
    labels = np.full(m, LABEL_UNUSED, dtype="<U1")
    final = np.full(m, BOTTOM)
    is_target = lam <= bound_t
    is_decoy = lam > t / 2.0
    labels[is_target] = LABEL_TARGET
    labels[is_decoy] = LABEL_DECOY
    own = np.take_along_axis(sorted_scores, ranks[:, None] - 1, axis=1)[:, 0]
    final[is_target] = own[is_target]
    decoy_rank = np.ceil(u_prime * bound_t).astype(np.int64)
    mapped = np.take_along_axis(sorted_scores, decoy_rank[:, None] - 1,
                                axis=1)[:, 0]
    final[is_decoy] = mapped[is_decoy]
    return labels, final, lam


def _simplified_label_arrays(sorted_scores, ranks, coin):
    """Vectorized simplified labelling; coin settles the midpoint rank."""
    m, t = sorted_scores.shape
    half = (t + 1) / 2.0
    own = np.take_along_axis(sorted_scores, ranks[:, None] - 1, axis=1)[:, 0]
    labels = np.where(ranks < half, LABEL_TARGET, LABEL_DECOY)
    midpoint = ranks == half
    labels[midpoint & (coin < 0.5)] = LABEL_TARGET
    final = own.copy()
    mirrored = labels == LABEL_DECOY
    mirrored &= ~midpoint
    decoy_rank = np.clip(ranks - (t + 1) // 2, 1, t)
    mapped = np.take_along_axis(sorted_scores, decoy_rank[:, None] - 1,
                                axis=1)[:, 0]
    final[mirrored] = mapped[mirrored]
    return labels, final


def label_standard(sorted_scores, rank, t, r, rng):
    """Standard labelling of one test (Ids the T / D / U branch).

    Draws lam = rank - P with P uniform [0, 1); targets keep their own
    score when lam <= t/(2r), decoys (lam > t/2) adopt a top score ranked
    ceil(lam') with lam' uniform on (0, t/(2r)], and the rest are unused
    and carry the bottom sentinel.
    """
    sorted_scores = np.asarray(sorted_scores, dtype=np.float64)[None, :]
    p = np.array([rng.random()])
    u_prime = np.array([1.0 - rng.random()])
    labels, final, _ = _standard_label_arrays(
        sorted_scores, np.array([rank], dtype=np.int64), r, p, u_prime)
    return str(labels[0]), float(final[0])


def label_simplified(sorted_scores, rank, t, rng):
    """Simplified labelling of one test: top half targets, bottom half
    decoys mirrored onto top scores, midpoint rank settled by a fair coin
    (keeping its own score either way)."""
    sorted_scores = np.asarray(sorted_scores, dtype=np.float64)[None, :]
    coin = np.array([rng.random()])
    labels, final = _simplified_label_arrays(
        sorted_scores, np.array([rank], dtype=np.int64), coin)
    return str(labels[0]), float(final[0])


def _cumulative_ratio(labels_sorted, r):
    """(1/r) * (decoys + 1) / max(targets, 1) after each rank."""
    t_cum = np.cumsum(labels_sorted == LABEL_TARGET)
    d_cum = np.cumsum(labels_sorted == LABEL_DECOY)
    inv_r = 1.0 / r
    ratio = inv_r * ((d_cum + 1.0) / np.maximum(t_cum, 1.0))
    return ratio, t_cum, d_cum


def select_threshold(labels, r, alpha):
    """Deepest rank k where (1/r)(decoys+1)/max(targets,1) stays <= alpha.

    ``labels`` must already be sorted by descending final score; unused
    labels count toward neither tally.  Returns 0 when no rank qualifies.
    """
    labels = np.asarray(labels, dtype="<U1")
    if labels.size == 0:
        return 0
    ratio, _, _ = _cumulative_ratio(labels, r)
    ok = np.nonzero(ratio <= alpha)[0]
    return int(ok[-1] + 1) if ok.size else 0


@dataclass
class _ScoredTests:
    """Per-test competition state after scoring and within-test ranking."""

    sorted_scores: np.ndarray
    ranks: np.ndarray
    degenerate: np.ndarray
    t: int

    @property
    def m(self):
        return self.ranks.size

    def target_scores(self):
        own = np.take_along_axis(self.sorted_scores, self.ranks[:, None] - 1,
                                 axis=1)[:, 0]
        return np.where(self.degenerate, np.nan, own)


def _score_stage(values, n1, kind, budget, rng):
    """Score every grouping and rank each target among its t scores.

    Degenerate tests (NaN scores) get zero placeholders so ranking stays
    well-defined; they are forced to the unused label downstream.
    """
    raw = score_all_groupings(values, n1, kind, budget, rng)
    degenerate = np.isnan(raw).any(axis=1)
    if degenerate.any():
        raw = np.where(degenerate[:, None], 0.0, raw)
    raw = np.ascontiguousarray(raw)
    jitter = rng.random(raw.shape)
    sorted_scores, _, ranks = backend.rank_with_ties(raw, jitter)
    return _ScoredTests(sorted_scores=sorted_scores, ranks=ranks,
                        degenerate=degenerate, t=budget.t)


def _label_stage(scored, variant, r, rng):
    """Draw the labelling randomness and label every test."""
    m = scored.m
    if variant is Variant.STANDARD:
        p = rng.random(m)
        u_prime = 1.0 - rng.random(m)
        labels, final, lam = _standard_label_arrays(
            scored.sorted_scores, scored.ranks, r, p, u_prime)
    else:
        coin = rng.random(m)
        labels, final = _simplified_label_arrays(
            scored.sorted_scores, scored.ranks, coin)
        lam = None
    if scored.degenerate.any():
        labels[scored.degenerate] = LABEL_UNUSED
        final[scored.degenerate] = BOTTOM
    return labels, final, lam


def _global_order(final, rng):
    """Sort tests by final score descending with uniform tie-breaking."""
    jitter = rng.random(final.size)
    _, order, _ = backend.rank_with_ties(
        np.ascontiguousarray(final)[None, :], jitter[None, :])
    order = order[0].astype(np.int64)
    global_ranks = np.empty(final.size, dtype=np.int64)
    global_ranks[order] = np.arange(1, final.size + 1)
    return order, global_ranks


def _decisions_at(labels_sorted, order, r, alpha):
    """Threshold rank, rejected test ids, and the ratio estimate there."""
    ratio, _, _ = _cumulative_ratio(labels_sorted, r)
    ok = np.nonzero(ratio <= alpha)[0]
    k = int(ok[-1] + 1) if ok.size else 0
    if k == 0:
        return 0, order[:0], 0.0, True
    head = labels_sorted[:k] == LABEL_TARGET
    return k, order[:k][head], float(ratio[k - 1]), False


def _check_r_feasible(r, n, n0):
    limit = grouping_count(n, n0, int(math.ceil(r)) + 1)
    if r > limit:
        raise ValueError(f"r={r} exceeds the number of distinct groupings")


def run_procedure_multi(dataset, kind, config, alphas):
    """Run the standard or simplified procedure once, thresholded at each
    alpha in ``alphas`` (labels and the global order are shared, so the
    decisions are nested across levels).  Returns one DecisionSet per
    alpha.
    """
    if config.variant not in (Variant.STANDARD, Variant.SIMPLIFIED):
        raise ValueError("run_procedure handles the standard and simplified "
                         "variants; use adaptive_run for the adaptive one")
    values = dataset.case_first_values()
    n1 = dataset.n1
    n = values.shape[1]
    budget = resolve_budget(n, n - n1, config.tau)
    r = float(config.r)
    _check_r_feasible(r, n, n - n1)
    rng = np.random.default_rng(config.seed)
    scored = _score_stage(values, n1, kind, budget, rng)
    labels, final, lam = _label_stage(scored, config.variant, r, rng)
    order, global_ranks = _global_order(final, rng)
    labels_sorted = labels[order]
    out = []
    for alpha in alphas:
        k, rejected, est, empty = _decisions_at(labels_sorted, order, r, alpha)
        out.append(DecisionSet(
            k=k, alpha=float(alpha), r=r, t=budget.t, variant=config.variant,
            score_kind=kind, rejected_ids=rejected, estimated_fdr=est,
            no_discoveries=empty, labels=labels,
            target_scores=scored.target_scores(), score_ranks=scored.ranks,
            lambdas=lam, final_scores=final, global_ranks=global_ranks,
            n_degenerate=int(scored.degenerate.sum()), seed=config.seed,
        ))
    return out


def run_procedure(dataset, kind, config):
    """Single-level convenience wrapper around :func:`run_procedure_multi`."""
    return run_procedure_multi(dataset, kind, config, [config.alpha])[0]


def pick_grid_r(grid, counts):
    """Grid value with the most rejections; ties go to the smallest r.

    ``grid`` must be sorted ascending, ``counts`` aligned with it.
    """
    best, best_count = grid[0], counts[0]
    for r, count in zip(grid[1:], counts[1:]):
        if count > best_count:
            best, best_count = r, count
    return best


def _auto_n2(n1, n0, n2_min, part1_cap):
    """Largest feasible holdout size: n2 within [n2_min, min(n1, n0) // 2]
    whose exhaustive part-1 budget C(2 n2, n2) fits part1_cap."""
    upper = min(n1 // 2, n0 // 2)
    if upper < n2_min:
        raise ValueError(
            f"groups too small to split: need at least {2 * n2_min} per group")
    for n2 in range(upper, n2_min - 1, -1):
        if grouping_count(2 * n2, n2, part1_cap + 1) <= part1_cap:
            return n2
    raise ValueError("no holdout size fits the part-1 permutation cap")


def _choose_subsets(pool_base, n2, rng):
    """Per-test uniform choice of n2 indices from each row of pool_base.

    Returns (chosen, rest) index arrays of shape (m, n2) and (m, size-n2).
    """
    m, size = pool_base.shape
    u = rng.random((m, 1, n2))
    assign = _partial_fisher_yates(u, size)[:, 0, :]
    picked = np.take_along_axis(pool_base, assign, axis=1)
    return picked[:, :n2], picked[:, n2:]


def adaptive_run_multi(dataset, kind, config, alphas, rng=None):
    """Adaptive variant: split samples, pick r on part 1, decide on part 2.

    For each test, n2 cases and n2 controls are drawn without replacement
    into part 1; the standard procedure with exhaustive regroupings runs
    on part 1 for every r in the grid, and for each alpha the smallest r
    maximizing the part-1 rejection count is used for the standard run on
    part 2.  Returns one DecisionSet per alpha, annotated with the chosen
    r (``selected_r``).
    """
    values = dataset.case_first_values()
    n1, n0 = dataset.n1, dataset.n0
    m, n = values.shape
    n2_min = config.adaptive_n2_min
    if min(n1 // 2, n0 // 2) < n2_min:
        raise ValueError(
            f"groups too small to split: need at least {2 * n2_min} per group")
    if config.adaptive_n2 is not None:
        n2 = int(config.adaptive_n2)
        if not n2_min <= n2 <= min(n1 // 2, n0 // 2):
            raise ValueError(f"n2={n2} outside [{n2_min}, "
                             f"{min(n1 // 2, n0 // 2)}]")
    else:
        n2 = _auto_n2(n1, n0, n2_min, config.adaptive_part1_cap)
    if rng is None:
        rng = np.random.default_rng(config.seed)

    case_cols = np.broadcast_to(np.arange(n1, dtype=np.int32), (m, n1)).copy()
    ctrl_cols = np.broadcast_to(np.arange(n1, n, dtype=np.int32), (m, n0)).copy()
    case_pick, case_rest = _choose_subsets(case_cols, n2, rng)
    ctrl_pick, ctrl_rest = _choose_subsets(ctrl_cols, n2, rng)
    part1 = np.ascontiguousarray(np.concatenate(
        [np.take_along_axis(values, case_pick, axis=1),
         np.take_along_axis(values, ctrl_pick, axis=1)], axis=1))
    part2 = np.ascontiguousarray(np.concatenate(
        [np.take_along_axis(values, case_rest, axis=1),
         np.take_along_axis(values, ctrl_rest, axis=1)], axis=1))

    t1 = grouping_count(2 * n2, n2, config.adaptive_part1_cap + 1)
    budget1 = PermutationBudget(t=t1, cap=t1, mode=ResamplingMode.EXHAUSTIVE)
    scored1 = _score_stage(part1, n2, kind, budget1, rng)

    grid = sorted(set(float(r) for r in config.adaptive_r_grid))
    rejections = {}
    for r in grid:
        labels, final, _ = _label_stage(scored1, Variant.STANDARD, r, rng)
        order, _ = _global_order(final, rng)
        labels_sorted = labels[order]
        ratio, t_cum, _ = _cumulative_ratio(labels_sorted, r)
        counts = []
        for alpha in alphas:
            ok = np.nonzero(ratio <= alpha)[0]
            counts.append(int(t_cum[ok[-1]]) if ok.size else 0)
        rejections[r] = counts

    best_r = [pick_grid_r(grid, [rejections[r][i] for r in grid])
              for i in range(len(alphas))]

    budget2 = resolve_budget(n - 2 * n2, n0 - n2, config.tau)
    scored2 = _score_stage(part2, n1 - n2, kind, budget2, rng)
    part2_runs = {}
    out = [None] * len(alphas)
    for i, alpha in enumerate(alphas):
        r = best_r[i]
        if r not in part2_runs:
            labels, final, lam = _label_stage(scored2, Variant.STANDARD, r, rng)
            order, global_ranks = _global_order(final, rng)
            part2_runs[r] = (labels, final, lam, order, global_ranks,
                             labels[order])
        labels, final, lam, order, global_ranks, labels_sorted = part2_runs[r]
        k, rejected, est, empty = _decisions_at(labels_sorted, order, r, alpha)
        out[i] = DecisionSet(
            k=k, alpha=float(alpha), r=r, t=budget2.t, variant=Variant.ADAPTIVE,
            score_kind=kind, rejected_ids=rejected, estimated_fdr=est,
            no_discoveries=empty, labels=labels,
            target_scores=scored2.target_scores(), score_ranks=scored2.ranks,
            lambdas=lam, final_scores=final, global_ranks=global_ranks,
            n_degenerate=int(scored2.degenerate.sum()), seed=config.seed,
            selected_r=r,
        )
    return out


def adaptive_run(dataset, kind, config, rng=None):
    """Single-level convenience wrapper around :func:`adaptive_run_multi`."""
    return adaptive_run_multi(dataset, kind, config, [config.alpha], rng)[0]
