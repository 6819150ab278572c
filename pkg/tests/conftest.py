import numpy as np

from tdfdr.dataset import GroupedDataset


def make_dataset(samples, n1):
    """GroupedDataset from a raw matrix whose first n1 columns are cases."""
    samples = np.asarray(samples, dtype=np.float64)
    m, n = samples.shape
    return GroupedDataset(ids=[f"t{j}" for j in range(m)], samples=samples,
                          case_columns=np.arange(n1),
                          control_columns=np.arange(n1, n))
