"""Group-difference scores that are exactly symmetric within groups.

Every score here is a pure function of the two value multisets (cases,
controls): permuting values inside a group can never change the result,
not even in the last bit.  That exact symmetry is what makes permutation
decoys exchangeable with the target under the null, so it is enforced
bitwise and tested bitwise (see :func:`check_group_symmetry`).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from . import backend


class DegenerateVarianceError(ValueError):
    """Raised when the pooled variance of a two-sample t is exactly zero."""


@dataclass(frozen=True)
class GroupedSamples:
    """One test's n samples: cases in positions 0..n1-1, controls after.

    values must be finite; each group needs at least two samples.
    """

    values: np.ndarray
    n1: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.isfinite(values).all():
            raise ValueError("values must be finite")
        if self.n1 < 2 or self.n0 < 2:
            raise ValueError("need at least two samples per group")

    @property
    def n(self):
        return self.values.size

    @property
    def n0(self):
        return self.values.size - self.n1

    @property
    def cases(self):
        return self.values[: self.n1]

    @property
    def controls(self):
        return self.values[self.n1 :]


class ScoreKind(Enum):
    """Built-in score functions (larger = more significant)."""

    ABS_T = "abs-t"
    SIGNED_T = "signed-t"
    RANK_SUM_CENTERED = "ranksum"


_IDENTITY_CACHE = {}


def _identity_subsets(n, n1):
    """Case/control index rows selecting the original grouping."""
    key = (n, n1)
    if key not in _IDENTITY_CACHE:
        _IDENTITY_CACHE[key] = (
            np.arange(n1, dtype=np.int32)[None, :],
            np.arange(n1, n, dtype=np.int32)[None, :],
        )
    return _IDENTITY_CACHE[key]


def t_statistic(samples, absolute=True):
    """Two-sample pooled-variance t statistic (case mean minus control mean).

    Parameters
    ----------
    samples : GroupedSamples
    absolute : return ``|t|`` (two-sided orientation) instead of signed t

    Raises
    ------
    DegenerateVarianceError
        If both groups are constant, i.e. the pooled variance is zero.
    """
    case_idx, ctrl_idx = _identity_subsets(samples.n, samples.n1)
    t = backend.t_scores_subsets(samples.values[None, :], case_idx, ctrl_idx,
                                 bool(absolute))[0, 0]
    if np.isnan(t):
        raise DegenerateVarianceError("zero pooled variance")
    return float(t)


def midranks(values, axis=-1):
    """Midranks (average ranks for ties) along an axis, as float64."""
    return rankdata(values, method="average", axis=axis).astype(np.float64)


def rank_sum_expectation(n, n1):
    """Null mean of the case rank sum: n1 * (n + 1) / 2."""
    return n1 * (n + 1) / 2.0


def rank_sum_statistic(samples):
    """|W - n1(n+1)/2| where W is the case rank sum over all n values.

    Midranks handle ties; centering makes the score two-sided so that
    larger values are more significant in either direction.
    """
    mr = midranks(samples.values)
    case_idx, _ = _identity_subsets(samples.n, samples.n1)
    expected = rank_sum_expectation(samples.n, samples.n1)
    return float(backend.rank_scores_subsets(mr[None, :], case_idx, expected)[0, 0])


def score_function(kind):
    """Map a ScoreKind to its callable; callables pass through unchanged."""
    if callable(kind):
        return kind
    if kind is ScoreKind.ABS_T:
        return lambda s: t_statistic(s, absolute=True)
    if kind is ScoreKind.SIGNED_T:
        return lambda s: t_statistic(s, absolute=False)
    if kind is ScoreKind.RANK_SUM_CENTERED:
        return rank_sum_statistic
    raise ValueError(f"unknown score kind: {kind!r}")


def check_group_symmetry(kind, samples, trials, rng):
    """True iff the score is bit-identical under random within-group shuffles.

    ``kind`` may be a ScoreKind or any callable taking GroupedSamples;
    ``trials`` shuffles of each group are drawn from ``rng``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fn = score_function(kind)
    reference = fn(samples)
    values = samples.values
    n1 = samples.n1
    for _ in range(trials):
        shuffled = np.concatenate(
            [rng.permutation(values[:n1]), rng.permutation(values[n1:])]
        )
        if fn(GroupedSamples(shuffled, n1)) != reference:
            return False
    return True
