"""Column-named sample tables and their CSV serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, MissingVariable


@dataclass
class Dataset:
    """Rectangular table of endogenous samples.

    ``provenance`` records how the table was produced (generator name, seed)
    and travels with reports for reproducibility.
    """

    columns: tuple[str, ...]
    values: np.ndarray  # shape (n_rows, n_columns), float64
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("dataset values must be a 2-D array")
        if self.values.shape[1] != len(self.columns):
            raise DataError(
                f"{len(self.columns)} columns declared, "
                f"{self.values.shape[1]} present"
            )
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise MissingVariable(f"no column {name!r}") from None
        return self.values[:, idx]

    def row(self, i: int) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.columns, self.values[i])}

    def rows_as_arrays(self) -> dict[str, np.ndarray]:
        return {c: self.values[:, j].copy() for j, c in enumerate(self.columns)}


def write_csv(dataset: Dataset, path) -> None:
    """17 significant digits: enough for exact float64 round trips."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.columns)
        for row in dataset.values:
            writer.writerow([format(v, ".17g") for v in row])


def read_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return Dataset(tuple(header), values, provenance={"source": str(path)})
