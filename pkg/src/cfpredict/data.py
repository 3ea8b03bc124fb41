"""Exposure-labelled datasets, column schemas and their on-disk formats.

The canonical CSV layout is ``exposure,outcome,<covariates...>`` with numbers
written in shortest round-trip form.  Schemas are small JSON documents::

    {"columns": [{"name": "x1", "type": "continuous"},
                 {"name": "x2", "type": "categorical", "categories": 3}]}
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("binary", "categorical", "continuous")


class DataError(ValueError):
    """Raised for malformed input data, schemas or unit specifications."""


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    categories: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown type {self.kind!r}")
        if self.kind == "binary" and self.categories != 2:
            raise DataError(f"column {self.name!r}: binary columns have 2 categories")
        if self.kind == "categorical" and self.categories < 2:
            raise DataError(f"column {self.name!r}: categorical needs >= 2 categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind in ("binary", "categorical")

    def to_json(self) -> dict:
        out = {"name": self.name, "type": self.kind}
        if self.kind == "categorical":
            out["categories"] = self.categories
        return out


def continuous(name: str) -> ColumnSchema:
    return ColumnSchema(name, "continuous")


def binary(name: str) -> ColumnSchema:
    return ColumnSchema(name, "binary")


def categorical(name: str, k: int) -> ColumnSchema:
    return ColumnSchema(name, "categorical", k)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed units: exposure label, outcome and raw covariate row.

    Potential outcomes never live here; see ``experiments.SyntheticUnits``.
    """

    z: np.ndarray
    y: np.ndarray
    X: np.ndarray
    schema: tuple[ColumnSchema, ...]
    exposure_labels: tuple = field(default=())
    n_exposures: int = 0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "schema", tuple(self.schema))
        n = len(y)
        if n < 1:
            raise DataError("dataset has no rows")
        if z.shape != (n,) or X.shape[0] != n:
            raise DataError("exposure, outcome and covariate row counts differ")
        if X.shape[1] != len(self.schema):
            raise DataError(
                f"{X.shape[1]} covariate columns but schema lists {len(self.schema)}"
            )
        if not np.all(np.isfinite(y)):
            raise DataError(f"non-finite outcome at row {int(np.argmin(np.isfinite(y)))}")
        if z.min() < 0:
            raise DataError("exposure labels must be integers 0..K-1")
        K = max(self.n_exposures, int(z.max()) + 1, len(self.exposure_labels))
        object.__setattr__(self, "n_exposures", K)
        for j, col in enumerate(self.schema):
            check_column(col, X[:, j])
        if not self.exposure_labels:
            object.__setattr__(self, "exposure_labels", tuple(range(K)))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def K(self) -> int:
        return self.n_exposures

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )


@dataclass(frozen=True, eq=False)
class ExposureData:
    """Rows of one exposure group, as fed to a per-exposure fit."""

    exposure: int
    y: np.ndarray
    X: np.ndarray

    @property
    def n(self) -> int:
        return len(self.y)


def check_column(col: ColumnSchema, values: np.ndarray, row_offset: int = 0) -> None:
    if col.kind == "continuous":
        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataError(f"row {i + row_offset}, column {col.name!r}: non-finite value")
        return
    bad = (values != np.round(values)) | (values < 0) | (values >= col.categories)
    bad |= ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(
            f"row {i + row_offset}, column {col.name!r}: category code {values[i]!r} "
            f"out of range 0..{col.categories - 1}"
        )


# -- schema JSON ------------------------------------------------------------

def schema_from_json(doc: dict) -> tuple[ColumnSchema, ...]:
    try:
        cols = doc["columns"]
    except (KeyError, TypeError):
        raise DataError("schema must be an object with a 'columns' list") from None
    out = []
    for c in cols:
        if "name" not in c or "type" not in c:
            raise DataError(f"schema column entry {c!r} needs 'name' and 'type'")
        out.append(ColumnSchema(str(c["name"]), c["type"], int(c.get("categories", 2))))
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        raise DataError("duplicate column names in schema")
    return tuple(out)


def schema_to_json(schema: Sequence[ColumnSchema]) -> dict:
    return {"columns": [c.to_json() for c in schema]}


def load_schema(path) -> tuple[ColumnSchema, ...]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: invalid JSON schema ({err})") from None
    return schema_from_json(doc)


def save_schema(schema: Sequence[ColumnSchema], path) -> None:
    Path(path).write_text(json.dumps(schema_to_json(schema), indent=2) + "\n", encoding="utf-8")


def infer_schema(names: Sequence[str], X: np.ndarray) -> tuple[ColumnSchema, ...]:
    """Numeric columns with at most two distinct values {0, 1} are binary."""
    out = []
    for j, name in enumerate(names):
        vals = np.unique(X[:, j])
        if len(vals) <= 2 and set(vals.tolist()) <= {0.0, 1.0}:
            out.append(binary(name))
        else:
            out.append(continuous(name))
    return tuple(out)


# -- CSV --------------------------------------------------------------------

def format_number(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def save_csv(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["exposure", "outcome", *data.names]) + "\n")
        labels = data.exposure_labels or tuple(range(data.K))
        for z, y, row in zip(data.z, data.y, data.X):
            cells = [format_number(labels[z]), format_number(y)]
            cells.extend(format_number(v) for v in row)
            fh.write(",".join(cells) + "\n")


def load_csv(path, schema_path=None) -> Dataset:
    """Read and validate a CSV dataset.

    Exposure labels are re-indexed to ``0..K-1`` in sorted order; the original
    labels are kept in ``Dataset.exposure_labels``.  Without a schema, columns
    are inferred (0/1-valued → binary, else continuous).
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    for required in ("exposure", "outcome"):
        if required not in header:
            raise DataError(f"{path}: missing required column {required!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    covariate_names = [h for h in header if h not in ("exposure", "outcome")]
    if schema_path is not None:
        schema = load_schema(schema_path)
        missing = [c.name for c in schema if c.name not in header]
        if missing:
            raise DataError(f"{path}: missing column {missing[0]!r} named in schema")
        covariate_names = [c.name for c in schema]
    index = {h: i for i, h in enumerate(header)}

    def parse(r: int, name: str) -> float:
        row = rows[r]
        i = index[name]
        if i >= len(row):
            raise DataError(f"{path}: row {r + 1} has too few fields")
        try:
            return float(row[i])
        except ValueError:
            raise DataError(
                f"{path}: row {r + 1}, column {name!r}: cannot parse {row[i]!r} as a number"
            ) from None

    n = len(rows)
    raw_z = np.array([parse(r, "exposure") for r in range(n)])
    y = np.array([parse(r, "outcome") for r in range(n)])
    X = np.array(
        [[parse(r, c) for c in covariate_names] for r in range(n)], dtype=float
    ).reshape(n, len(covariate_names))

    if schema_path is None:
        schema = infer_schema(covariate_names, X)
    for j, col in enumerate(schema):
        check_column(col, X[:, j], row_offset=1)

    labels, z = np.unique(raw_z, return_inverse=True)
    labels = tuple(int(v) if float(v).is_integer() else float(v) for v in labels)
    return Dataset(z, y, X, schema, exposure_labels=labels)
