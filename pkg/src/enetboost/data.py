"""Tabular container, CSV ingestion, standardization, and stratified splitting.

Every transform returns a new Dataset; feature matrices are read-only
float64 arrays, so a Dataset can be shared freely across worker processes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError, SchemaError, StratificationError


class Dataset:
    """Immutable table of float64 feature columns plus an optional target."""

    __slots__ = ("feature_names", "X", "target_name", "y", "row_ids")

    def __init__(
        self,
        feature_names: tuple[str, ...],
        X: np.ndarray,
        target_name: str | None = None,
        y: np.ndarray | None = None,
        row_ids: np.ndarray | None = None,
    ):
        feature_names = tuple(feature_names)
        if len(set(feature_names)) != len(feature_names):
            raise DataError("duplicate feature names")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(feature_names):
            raise DataError("feature matrix shape does not match feature names")
        if (target_name is None) != (y is None):
            raise DataError("target name and values must be given together")
        if y is not None:
            y = np.ascontiguousarray(y, dtype=np.float64)
            if y.shape != (X.shape[0],):
                raise DataError("target length does not match row count")
            if target_name in feature_names:
                raise DataError(f"target {target_name!r} duplicates a feature name")
        if row_ids is None:
            row_ids = np.arange(X.shape[0], dtype=np.int64)
        else:
            row_ids = np.ascontiguousarray(row_ids, dtype=np.int64)
            if row_ids.shape != (X.shape[0],):
                raise DataError("row_ids length does not match row count")
        for a in (X, y, row_ids):
            if a is not None:
                a.flags.writeable = False
        self.feature_names = feature_names
        self.X = X
        self.target_name = target_name
        self.y = y
        self.row_ids = row_ids

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> np.ndarray:
        """Read-only view of one feature column (or the target, by its name)."""
        if name == self.target_name:
            return self.y
        try:
            j = self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None
        return self.X[:, j]

    def has_column(self, name: str) -> bool:
        return name in self.feature_names or name == self.target_name

    def take(self, rows) -> "Dataset":
        """New Dataset restricted to the given row indices, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.feature_names,
            self.X[rows],
            self.target_name,
            None if self.y is None else self.y[rows],
            self.row_ids[rows],
        )

    def select_features(self, names) -> "Dataset":
        """New Dataset keeping only the named features, in the given order."""
        names = tuple(names)
        idx = []
        for name in names:
            if name not in self.feature_names:
                raise SchemaError(f"no column named {name!r}")
            idx.append(self.feature_names.index(name))
        return Dataset(names, self.X[:, idx], self.target_name, self.y, self.row_ids)

    def with_target(self, name: str, values) -> "Dataset":
        return Dataset(self.feature_names, self.X, name, np.asarray(values, dtype=np.float64), self.row_ids)

    def require_binary_target(self) -> np.ndarray:
        if self.y is None:
            raise DataError("dataset has no target column")
        if not np.isin(self.y, (0.0, 1.0)).all():
            raise DataError("target must contain only 0 and 1")
        return self.y

    @classmethod
    def from_columns(cls, columns, target=None, row_ids=None) -> "Dataset":
        """Build from a list of (name, values) pairs; target is a (name, values) pair."""
        names = tuple(name for name, _ in columns)
        if columns:
            X = np.column_stack([np.asarray(v, dtype=np.float64) for _, v in columns])
        else:
            n = 0 if target is None else len(target[1])
            X = np.empty((n, 0))
        tname, ty = (None, None) if target is None else target
        return cls(names, X, tname, ty, row_ids)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column z-score statistics fitted on one split, for replay on another."""

    columns: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    constant: tuple[bool, ...]


def standardize(d: Dataset, cols) -> tuple[Dataset, StandardizationParams]:
    """Z-score the named columns: (x - mean) / std with the n-1 denominator.

    Constant columns are centered, flagged, and given std 1 so that a
    degenerate indicator on a small split passes through as zeros
    instead of aborting the run.
    """
    cols = tuple(cols)
    means = np.empty(len(cols))
    stds = np.empty(len(cols))
    constant = []
    X = np.array(d.X)
    for i, name in enumerate(cols):
        v = d.column(name)
        m = float(np.mean(v))
        s = float(np.std(v, ddof=1)) if v.shape[0] > 1 else 0.0
        is_const = not (s > 0.0 and math.isfinite(s))
        if is_const:
            s = 1.0
        j = d.feature_names.index(name)
        X[:, j] = (v - m) / s
        means[i] = m
        stds[i] = s
        constant.append(is_const)
    out = Dataset(d.feature_names, X, d.target_name, d.y, d.row_ids)
    return out, StandardizationParams(cols, means, stds, tuple(constant))


def apply_standardization(p: StandardizationParams, d: Dataset) -> Dataset:
    """Replay train-fitted z-score statistics on another Dataset."""
    X = np.array(d.X)
    for name, m, s in zip(p.columns, p.means, p.stds):
        j_list = [j for j, fname in enumerate(d.feature_names) if fname == name]
        if not j_list:
            raise SchemaError(f"no column named {name!r}")
        X[:, j_list[0]] = (d.column(name) - m) / s
    return Dataset(d.feature_names, X, d.target_name, d.y, d.row_ids)


@dataclass(frozen=True)
class FoldAssignment:
    """Assignment of each row to one of k cross-validation folds."""

    k: int
    fold_of_row: np.ndarray

    def val_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row != fold)


def split_stratified(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded train/test split preserving the class balance of a binary target.

    The test set receives floor(n * test_fraction) rows in total;
    per-class counts are the proportional shares rounded by largest
    remainder, so each lands within one row of exact proportionality.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    y = d.require_binary_target()
    class_rows = [np.flatnonzero(y == label) for label in (0.0, 1.0)]
    for label, rows in zip((0, 1), class_rows):
        if rows.shape[0] < 2:
            raise StratificationError(f"class {label} has fewer than 2 rows")
    total = int(math.floor(d.n_rows * test_fraction))
    exact = [rows.shape[0] * test_fraction for rows in class_rows]
    counts = [int(math.floor(e)) for e in exact]
    leftovers = sorted(range(2), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in leftovers[: total - sum(counts)]:
        counts[i] += 1

    rng = np.random.default_rng(seed)
    test_idx = []
    for rows, c in zip(class_rows, counts):
        perm = rng.permutation(rows)
        test_idx.append(perm[:c])
    in_test = np.zeros(d.n_rows, dtype=bool)
    in_test[np.concatenate(test_idx)] = True
    return d.take(np.flatnonzero(~in_test)), d.take(np.flatnonzero(in_test))


def _deal_round_robin(fold_of_row, rows, k, start):
    for i, r in enumerate(rows):
        fold_of_row[r] = (start + i) % k
    return (start + len(rows)) % k


def kfold_stratified(d: Dataset, k: int, seed: int) -> FoldAssignment:
    """Stratified k-fold assignment for a binary target.

    Each class is shuffled and dealt round-robin with a fold cursor that
    carries over between classes, so fold sizes and per-fold class counts
    both stay within one row of exact proportionality. k equal to the row
    count is allowed as leave-one-out; otherwise classes smaller than k
    are refused.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > d.n_rows:
        raise StratificationError(f"k = {k} exceeds the row count {d.n_rows}")
    y = d.require_binary_target()
    if k < d.n_rows:  # leave-one-out is exempt from the per-class floor
        for label in (0.0, 1.0):
            n_c = int(np.sum(y == label))
            if n_c < k:
                raise StratificationError(f"class {int(label)} has {n_c} rows, fewer than k = {k}")
    rng = np.random.default_rng(seed)
    fold_of_row = np.empty(d.n_rows, dtype=np.int64)
    cursor = 0
    for label in (0.0, 1.0):
        rows = rng.permutation(np.flatnonzero(y == label))
        cursor = _deal_round_robin(fold_of_row, rows, k, cursor)
    return FoldAssignment(k, fold_of_row)


def kfold_random(n_rows: int, k: int, seed: int) -> FoldAssignment:
    """Unstratified k-fold assignment, for continuous targets."""
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > n_rows:
        raise ConfigError(f"k = {k} exceeds the row count {n_rows}")
    rng = np.random.default_rng(seed)
    fold_of_row = np.empty(n_rows, dtype=np.int64)
    _deal_round_robin(fold_of_row, rng.permutation(n_rows), k, 0)
    return FoldAssignment(k, fold_of_row)


# ---------------------------------------------------------------------------
# CSV ingestion

@dataclass(frozen=True)
class Schema:
    """Declared column types for a CSV file.

    Column specs: "numeric"; {"type": "binary", "yes": tok, "no": tok};
    {"type": "categorical", "levels": [...]}. A two-level categorical
    encodes to a single 0/1 column under the bare name (1 marks the
    lexicographically later level); more levels one-hot encode to
    "name=level" columns with the lexicographically first level dropped
    as the reference.
    """

    columns: dict
    target: str | None = None

    def __post_init__(self):
        for name, spec in self.columns.items():
            if spec == "numeric":
                continue
            if not isinstance(spec, dict) or spec.get("type") not in ("binary", "categorical"):
                raise SchemaError(f"column {name!r}: unknown type spec {spec!r}")
            if spec["type"] == "binary" and not ("yes" in spec and "no" in spec):
                raise SchemaError(f"column {name!r}: binary spec needs yes/no tokens")
            if spec["type"] == "categorical":
                levels = spec.get("levels", [])
                if len(levels) < 2 or len(set(levels)) != len(levels):
                    raise SchemaError(f"column {name!r}: need at least 2 distinct levels")
        if self.target is not None and self.target not in self.columns:
            raise SchemaError(f"target {self.target!r} is not a declared column")

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if "columns" not in raw:
            raise SchemaError("schema file must have a 'columns' map")
        return cls(columns=raw["columns"], target=raw.get("target"))


@dataclass
class IngestReport:
    """Row accounting for one CSV ingestion."""

    n_rows_read: int = 0
    n_rows_kept: int = 0
    n_rejected_missing: int = 0
    n_rejected_unparseable: int = 0
    rejections: list = field(default_factory=list)  # (file_row, column, reason)


def _parse_cell(cell: str, spec):
    """Parsed value, or None when the cell is missing. Raises ValueError otherwise."""
    cell = cell.strip()
    if cell == "":
        return None
    if spec == "numeric":
        v = float(cell)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {cell!r}")
        return v
    if spec["type"] == "binary":
        if cell == str(spec["yes"]):
            return 1.0
        if cell == str(spec["no"]):
            return 0.0
        raise ValueError(f"expected {spec['yes']!r} or {spec['no']!r}, got {cell!r}")
    if cell not in spec["levels"]:
        raise ValueError(f"not a declared level: {cell!r}")
    return cell


def _encoded_names(name: str, spec) -> list[str]:
    if spec == "numeric" or spec["type"] == "binary":
        return [name]
    levels = sorted(spec["levels"])
    if len(levels) == 2:
        return [name]
    return [f"{name}={lv}" for lv in levels[1:]]


def _encode_value(value, spec) -> list[float]:
    if spec == "numeric" or spec["type"] == "binary":
        return [float(value)]
    levels = sorted(spec["levels"])
    if len(levels) == 2:
        return [1.0 if value == levels[1] else 0.0]
    return [1.0 if value == lv else 0.0 for lv in levels[1:]]


def ingest_csv(path, schema: Schema, strict: bool = True) -> tuple[Dataset, IngestReport]:
    """Read a CSV under a declared schema.

    Rows with missing cells are always rejected and counted. Unparseable
    cells raise a row-indexed ParseError in strict mode; with strict off
    the row is rejected and counted instead. Row numbers in the report
    are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        declared = set(schema.columns)
        missing = declared - set(header)
        extra = set(header) - declared
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing columns {sorted(missing)}")
            if extra:
                parts.append(f"undeclared columns {sorted(extra)}")
            raise SchemaError(f"{path}: header does not match schema: " + "; ".join(parts))

        report = IngestReport()
        kept_rows = []
        kept_ids = []
        for file_row, cells in enumerate(reader, start=2):
            if not cells:
                continue  # blank line
            report.n_rows_read += 1
            if len(cells) != len(header):
                if strict:
                    raise ParseError(file_row, "", f"expected {len(header)} cells, got {len(cells)}")
                report.n_rejected_unparseable += 1
                report.rejections.append((file_row, "", "ragged row"))
                continue
            values = {}
            bad = None
            for name, cell in zip(header, cells):
                spec = schema.columns[name]
                try:
                    v = _parse_cell(cell, spec)
                except ValueError as exc:
                    bad = ("unparseable", name, str(exc))
                    break
                if v is None:
                    bad = ("missing", name, "missing value")
                    break
                values[name] = v
            if bad is not None:
                kind, col, reason = bad
                if kind == "unparseable" and strict:
                    raise ParseError(file_row, col, reason)
                if kind == "missing":
                    report.n_rejected_missing += 1
                else:
                    report.n_rejected_unparseable += 1
                report.rejections.append((file_row, col, reason))
                continue
            kept_rows.append(values)
            kept_ids.append(file_row - 2)
        report.n_rows_kept = len(kept_rows)

    columns = []
    for name in header:
        if name == schema.target:
            continue
        spec = schema.columns[name]
        for enc_i, enc_name in enumerate(_encoded_names(name, spec)):
            col = np.array(
                [_encode_value(r[name], spec)[enc_i] for r in kept_rows], dtype=np.float64
            )
            columns.append((enc_name, col))
    target = None
    if schema.target is not None:
        spec = schema.columns[schema.target]
        if _encoded_names(schema.target, spec) != [schema.target]:
            raise SchemaError("target must encode to a single column")
        tvals = np.array([_encode_value(r[schema.target], spec)[0] for r in kept_rows])
        target = (schema.target, tvals)
    d = Dataset.from_columns(columns, target=target, row_ids=np.array(kept_ids, dtype=np.int64))
    return d, report


def load_csv(path, schema: Schema) -> Dataset:
    """Strict CSV ingestion: any unparseable cell raises a row-indexed error."""
    d, _ = ingest_csv(path, schema, strict=True)
    return d


def write_csv(d: Dataset, path) -> None:
    """Write features (and the target, if present, as the last column) as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(d.feature_names)
        if d.target_name is not None:
            header.append(d.target_name)
        writer.writerow(header)
        for i in range(d.n_rows):
            row = [repr(float(v)) for v in d.X[i]]
            if d.y is not None:
                row.append(repr(float(d.y[i])))
            writer.writerow(row)
