"""Synthetic case-control matrices with known ground truth.

Three model families: normal with an optional shared factor inducing
cross-test correlation rho, gamma with independent entries, and gamma
with a shared additive component.  False-null tests sit at the end of the
matrix and their case-sample effects cycle through a fixed sequence
(means 1,2,3,4 for the normal models, shapes 2,3,4,5 for the gamma ones).
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dataset import GroupedDataset

#: Shape of the shared gamma component in the dependent gamma model.
SHARED_GAMMA_SHAPE = 4.0

NORMAL_EFFECT_CYCLE = (1.0, 2.0, 3.0, 4.0)
GAMMA_SHAPE_CYCLE = (2.0, 3.0, 4.0, 5.0)


class Model(Enum):
    NORMAL = "normal"
    GAMMA_INDEP = "gamma-indep"
    GAMMA_DEP = "gamma-dep"


@dataclass(frozen=True)
class SimSpec:
    """One simulation scenario; ``reps`` replicates share the spec seed."""

    model: Model
    m: int
    n1: int
    n0: int
    false_fraction: float
    rho: float = 0.0
    effect_cycle: tuple = ()
    reps: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.false_fraction <= 1.0:
            raise ValueError("false_fraction must be in [0, 1]")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")
        if self.m < 1 or self.n1 < 2 or self.n0 < 2:
            raise ValueError("need m >= 1 and at least two samples per group")
        if not self.effect_cycle:
            cycle = (NORMAL_EFFECT_CYCLE if self.model is Model.NORMAL
                     else GAMMA_SHAPE_CYCLE)
            object.__setattr__(self, "effect_cycle", cycle)

    @property
    def n(self):
        return self.n1 + self.n0

    @property
    def n_false(self):
        return int(round(self.false_fraction * self.m))


@dataclass(frozen=True)
class SimulatedDataset:
    """A generated dataset plus its per-test false-null flags."""

    data: GroupedDataset
    false_null: np.ndarray


def effect_values(spec):
    """Per-test effect (mean shift or gamma shape), 0 for true nulls.

    False nulls occupy the last ``n_false`` tests; their effects repeat
    the spec's cycle in test order.
    """
    effects = np.zeros(spec.m)
    n_false = spec.n_false
    if n_false:
        cycle = np.asarray(spec.effect_cycle, dtype=np.float64)
        reps = -(-n_false // cycle.size)
        effects[spec.m - n_false:] = np.tile(cycle, reps)[:n_false]
    return effects


def false_null_flags(spec):
    flags = np.zeros(spec.m, dtype=bool)
    if spec.n_false:
        flags[spec.m - spec.n_false:] = True
    return flags


def _replicate_rng(spec, replicate_index):
    return np.random.default_rng(
        np.random.SeedSequence(spec.seed, spawn_key=(replicate_index,)))


def _wrap(spec, samples):
    ids = [f"sim{j + 1:06d}" for j in range(spec.m)]
    data = GroupedDataset(
        ids=ids, samples=samples,
        case_columns=np.arange(spec.n1),
        control_columns=np.arange(spec.n1, spec.n),
    )
    return SimulatedDataset(data=data, false_null=false_null_flags(spec))


def gen_normal(spec, replicate_index):
    """Normal model: sqrt(rho) * shared + sqrt(1 - rho) * noise + shift.

    One shared standard-normal factor per replicate is mixed into every
    entry, giving every pair of entries correlation rho (rho = 0 is full
    independence); case samples of false-null tests add the cycling mean
    shift.  True-null rows stay exchangeable across all n samples.
    """
    if spec.model is not Model.NORMAL:
        raise ValueError("spec.model must be NORMAL")
    rng = _replicate_rng(spec, replicate_index)
    shared = rng.standard_normal()
    noise = rng.standard_normal((spec.m, spec.n))
    samples = np.sqrt(spec.rho) * shared + np.sqrt(1.0 - spec.rho) * noise
    effects = effect_values(spec)
    samples[:, : spec.n1] += effects[:, None]
    return _wrap(spec, samples)


def gen_gamma(spec, replicate_index):
    """Gamma models: unit-scale Gamma(shape) entries, baseline shape 1.

    Case samples of false-null tests use the cycling shape; the dependent
    model adds one shared Gamma(4, 1) draw per replicate to every entry,
    which leaves true-null rows exchangeable while correlating tests.
    """
    if spec.model not in (Model.GAMMA_INDEP, Model.GAMMA_DEP):
        raise ValueError("spec.model must be a gamma model")
    rng = _replicate_rng(spec, replicate_index)
    shared = rng.gamma(SHARED_GAMMA_SHAPE) if spec.model is Model.GAMMA_DEP else 0.0
    shapes = np.ones((spec.m, spec.n))
    effects = effect_values(spec)
    false = effects > 0
    shapes[false, : spec.n1] = effects[false, None]
    samples = rng.gamma(shapes)
    if spec.model is Model.GAMMA_DEP:
        samples = shared + samples
    return _wrap(spec, samples)


def gen_dataset(spec, replicate_index):
    """Generate one replicate of the spec's model."""
    if spec.model is Model.NORMAL:
        return gen_normal(spec, replicate_index)
    return gen_gamma(spec, replicate_index)


def adaptive_small_spec(seed=0, reps=1000):
    """The small adaptive-study scenario: 200 tests, 10 + 10 samples,
    20 false nulls whose case samples are N(4, 1), everything else
    N(0, 1), all entries independent."""
    return SimSpec(model=Model.NORMAL, m=200, n1=10, n0=10,
                   false_fraction=0.1, rho=0.0, effect_cycle=(4.0,),
                   reps=reps, seed=seed)


def gen_adaptive_small(replicate_index, seed=0):
    """One replicate of the small adaptive-study scenario."""
    return gen_dataset(adaptive_small_spec(seed=seed), replicate_index)
