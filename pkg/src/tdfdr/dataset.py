"""Grouped test matrices: the m-tests-by-n-samples container and file I/O.

Matrices are delimited text, one row per test, optionally with a header
line and a leading id column.  Rows containing missing or non-numeric
values are dropped (and counted) at ingestion rather than imputed, since
imputation would break the exchangeability the decoy competition relies
on.
"""

from dataclasses import dataclass, field

import numpy as np


class MatrixFormatError(ValueError):
    """Malformed input matrix (bad shape, empty data, overlapping groups)."""


@dataclass
class GroupedDataset:
    """m tests by n samples with a case/control column split."""

    ids: list
    samples: np.ndarray
    case_columns: np.ndarray
    control_columns: np.ndarray

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        self.case_columns = np.asarray(self.case_columns, dtype=np.intp)
        self.control_columns = np.asarray(self.control_columns, dtype=np.intp)
        if self.samples.ndim != 2:
            raise MatrixFormatError("samples must be a 2-D matrix")
        if len(self.ids) != self.samples.shape[0]:
            raise MatrixFormatError("one id per row required")
        n = self.samples.shape[1]
        case = set(self.case_columns.tolist())
        ctrl = set(self.control_columns.tolist())
        if not case or not ctrl:
            raise MatrixFormatError("case and control column sets must be nonempty")
        if case & ctrl:
            raise MatrixFormatError("case and control columns overlap")
        if case | ctrl != set(range(n)):
            raise MatrixFormatError("case and control columns must cover all columns")
        if not np.isfinite(self.samples).all():
            raise MatrixFormatError("samples contain non-finite entries")

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def n(self):
        return self.samples.shape[1]

    @property
    def n1(self):
        return self.case_columns.size

    @property
    def n0(self):
        return self.control_columns.size

    def case_first_values(self):
        """(m, n) float64 copy with case columns first, then controls."""
        order = np.concatenate([self.case_columns, self.control_columns])
        return np.ascontiguousarray(self.samples[:, order])

    def test(self, j):
        """One test's samples as GroupedSamples (cases first)."""
        from .scores import GroupedSamples

        row = self.samples[j]
        values = np.concatenate(
            [row[self.case_columns], row[self.control_columns]]
        )
        return GroupedSamples(values, self.n1)


@dataclass
class IngestResult:
    dataset: GroupedDataset
    n_dropped: int
    dropped_lines: list = field(default_factory=list)


def parse_column_spec(spec, names=None):
    """Parse a column selector like "2-4", "1,3,5", or "colA,colB".

    Numeric entries are 1-based over the data columns; name entries are
    resolved against the header ``names``.  Returns 0-based indices.
    """
    indices = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part and not part.lstrip("-").isalpha():
            lo, _, hi = part.partition("-")
            if lo.strip().isdigit() and hi.strip().isdigit():
                lo_i, hi_i = int(lo), int(hi)
                if lo_i < 1 or hi_i < lo_i:
                    raise ValueError(f"bad column range: {part!r}")
                indices.extend(range(lo_i - 1, hi_i))
                continue
        if part.isdigit():
            idx = int(part)
            if idx < 1:
                raise ValueError(f"column numbers are 1-based: {part!r}")
            indices.append(idx - 1)
        elif names is not None and part in names:
            indices.append(names.index(part))
        else:
            raise ValueError(f"unknown column: {part!r}")
    if not indices:
        raise ValueError(f"empty column spec: {spec!r}")
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate columns in spec: {spec!r}")
    return indices


def _parse_float(token):
    try:
        value = float(token)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def ingest_matrix(path, case_spec, control_spec, delimiter="\t", header=True,
                  ids=True):
    """Read a delimited matrix into a GroupedDataset.

    Rows with missing or non-numeric values in the selected columns are
    dropped and counted.  Raises MatrixFormatError with a line number for
    rows of the wrong width, and ValueError for overlapping column specs.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise MatrixFormatError(f"{path}: empty file")

    names = None
    start = 0
    if header:
        header_cells = lines[0].split(delimiter)
        names = header_cells[1:] if ids else header_cells
        start = 1
    if start >= len(lines):
        raise MatrixFormatError(f"{path}: no data rows")

    case_cols = parse_column_spec(case_spec, names)
    ctrl_cols = parse_column_spec(control_spec, names)
    if set(case_cols) & set(ctrl_cols):
        raise ValueError("case and control column specs overlap")
    selected = case_cols + ctrl_cols

    width = None
    kept_ids, rows = [], []
    n_dropped = 0
    dropped_lines = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        cells = line.split(delimiter)
        if width is None:
            width = len(cells)
            max_col = max(selected) + (1 if ids else 0)
            if width <= max_col:
                raise MatrixFormatError(
                    f"{path}:{lineno}: only {width} columns, "
                    f"column spec needs {max_col + 1}")
        elif len(cells) != width:
            raise MatrixFormatError(
                f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
        row_id = cells[0] if ids else f"row{lineno}"
        data_cells = cells[1:] if ids else cells
        values = [_parse_float(data_cells[c]) for c in selected]
        if any(v is None for v in values):
            n_dropped += 1
            dropped_lines.append(lineno)
            continue
        kept_ids.append(row_id)
        rows.append(values)

    if not rows:
        raise MatrixFormatError(f"{path}: no usable data rows")
    samples = np.array(rows, dtype=np.float64)
    n1 = len(case_cols)
    dataset = GroupedDataset(
        ids=kept_ids,
        samples=samples,
        case_columns=np.arange(n1),
        control_columns=np.arange(n1, n1 + len(ctrl_cols)),
    )
    return IngestResult(dataset=dataset, n_dropped=n_dropped,
                        dropped_lines=dropped_lines)


def write_matrix(dataset, path, delimiter="\t"):
    """Write a dataset back out (id column, cases first, then controls).

    Ingesting the result with the matching column specs reproduces the
    retained rows exactly.
    """
    n1, n0 = dataset.n1, dataset.n0
    header = ["id"] + [f"case{i + 1}" for i in range(n1)] + \
        [f"control{i + 1}" for i in range(n0)]
    values = dataset.case_first_values()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delimiter.join(header) + "\n")
        for row_id, row in zip(dataset.ids, values):
            cells = [str(row_id)] + [repr(float(v)) for v in row]
            fh.write(delimiter.join(cells) + "\n")
