"""Decoy-competition FDR control for two-group multiple testing.

Permutation decoys of each test's own samples compete with the original
grouping; the decoy/target ratio along the ranked tests yields an FDR
threshold without any null-distribution model.
"""

__version__ = "0.1.0"

from .dataset import GroupedDataset, MatrixFormatError, ingest_matrix  # noqa: F401
from .harness import ExperimentSummary, MethodSpec, fdp, run_experiment  # noqa: F401
from .permute import PermutationBudget, ResamplingMode, resolve_budget  # noqa: F401
from .procedure import (DecisionSet, LabeledTest, TdConfig, Variant,  # noqa: F401
                        adaptive_run, run_procedure, select_threshold)
from .scores import (DegenerateVarianceError, GroupedSamples, ScoreKind,  # noqa: F401
                     check_group_symmetry, rank_sum_statistic, t_statistic)
from .simgen import Model, SimSpec, SimulatedDataset, gen_dataset  # noqa: F401
