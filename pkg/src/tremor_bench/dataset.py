"""Ingestion of the clinical/speech/motor feature CSV and the binary subsets built from it.

The raw file holds one row per subject with a group label (PD, RBD or HC).
Two binary tasks are derived from it: PD vs RBD on every feature, and PD vs HC
restricted to the columns that are recorded for healthy controls.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DatasetError

GROUPS = ("PD", "RBD", "HC")
POSITIVE_GROUP = "PD"

GENDER_ENCODING = {"Female": 1, "Male": 0}
YES_NO_ENCODING = {"Yes": 1, "No": 0}

COLUMN_KINDS = ("numeric", "categorical", "group", "ignore")


class Missing(enum.Enum):
    MISSING = "MISSING"

    def __repr__(self) -> str:
        return "MISSING"


MISSING = Missing.MISSING

Cell = Union[float, str, Missing]


def default_encoding(column: str) -> dict[str, int]:
    """Binary encoding used for a categorical column without an explicit map."""
    if "gender" in column.lower() or column.lower() == "sex":
        return dict(GENDER_ENCODING)
    return dict(YES_NO_ENCODING)


@dataclass(frozen=True)
class Schema:
    """Column manifest for a feature CSV.

    ``columns`` and ``kinds`` are aligned and list every CSV column in file
    order. Exactly one column has kind ``group``.
    """

    columns: tuple[str, ...]
    kinds: tuple[str, ...]
    missing_tokens: tuple[str, ...] = ("",)
    encodings: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    group_aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.columns) != len(self.kinds):
            raise DatasetError("schema columns and kinds differ in length")
        if len(set(self.columns)) != len(self.columns):
            raise DatasetError("schema has duplicate column names")
        for name, kind in zip(self.columns, self.kinds):
            if kind not in COLUMN_KINDS:
                raise DatasetError(f"schema column {name!r}: unknown kind {kind!r}")
        if self.kinds.count("group") != 1:
            raise DatasetError("schema must contain exactly one group column")

    @property
    def group_column(self) -> str:
        return self.columns[self.kinds.index("group")]

    @property
    def feature_columns(self) -> tuple[str, ...]:
        return tuple(c for c, k in zip(self.columns, self.kinds) if k in ("numeric", "categorical"))

    def to_dict(self) -> dict:
        cols = []
        for name, kind in zip(self.columns, self.kinds):
            entry = {"name": name, "kind": kind}
            if name in self.encodings:
                entry["encoding"] = dict(self.encodings[name])
            cols.append(entry)
        out = {"columns": cols, "missing_tokens": list(self.missing_tokens)}
        if self.group_aliases:
            out["group_aliases"] = dict(self.group_aliases)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Schema":
        try:
            entries = data["columns"]
            columns = tuple(str(e["name"]) for e in entries)
            kinds = tuple(str(e.get("kind", "numeric")) for e in entries)
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed schema manifest: {exc}") from exc
        group_column = data.get("group_column")
        if group_column is not None:
            if group_column not in columns:
                raise DatasetError(f"group_column {group_column!r} is not a listed column")
            kinds = tuple("group" if c == group_column else k for c, k in zip(columns, kinds))
        encodings = {str(e["name"]): dict(e["encoding"]) for e in entries if "encoding" in e}
        return cls(
            columns=columns,
            kinds=kinds,
            missing_tokens=tuple(data.get("missing_tokens", ("",))),
            encodings=encodings,
            group_aliases=dict(data.get("group_aliases", {})),
        )


def load_schema(path: Union[str, Path]) -> Schema:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"schema file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"schema {path} is not valid JSON: {exc}") from exc
    return Schema.from_dict(data)


@dataclass(frozen=True)
class FeatureTable:
    """Named-column table of per-subject cells, MISSING allowed.

    Categorical cells hold their raw text until :func:`encode_categoricals`
    turns them into 0/1 floats.
    """

    column_names: tuple[str, ...]
    kinds: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    groups: tuple[str, ...]
    group_column: str = "group"
    encodings: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.column_names)
        if len(self.kinds) != width:
            raise DatasetError("kinds and column_names differ in length")
        if len(self.rows) != len(self.groups):
            raise DatasetError("rows and groups differ in length")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DatasetError(f"row {i} has {len(row)} cells, expected {width}")
        for i, g in enumerate(self.groups):
            if g not in GROUPS:
                raise DatasetError(f"row {i}: unknown group label {g!r}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def group_counts(self) -> dict[str, int]:
        return {g: self.groups.count(g) for g in GROUPS}

    def column(self, name: str) -> list[Cell]:
        j = self.column_names.index(name)
        return [row[j] for row in self.rows]

    def schema(self) -> Schema:
        return Schema(
            columns=self.column_names + (self.group_column,),
            kinds=self.kinds + ("group",),
            missing_tokens=("",),
            encodings=dict(self.encodings),
        )


def _parse_numeric(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(
            f"non-numeric value {text!r} in numeric column {column!r} (row {row})"
        ) from None
    if not math.isfinite(value):
        raise DatasetError(f"non-finite value {text!r} in column {column!r} (row {row})")
    return value


def load_csv(path: Union[str, Path], schema: Schema) -> FeatureTable:
    """Read a comma-separated UTF-8 file whose header must equal ``schema.columns``."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    missing_tokens = set(schema.missing_tokens)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: file is empty, a header row is required") from None
        for j, expected in enumerate(schema.columns):
            got = header[j] if j < len(header) else None
            if got != expected:
                raise DatasetError(
                    f"{path}: header mismatch at column {j}: expected {expected!r}, got {got!r}"
                )
        if len(header) > len(schema.columns):
            raise DatasetError(f"{path}: unexpected extra column {header[len(schema.columns)]!r}")

        feature_idx = [j for j, k in enumerate(schema.kinds) if k in ("numeric", "categorical")]
        group_idx = schema.kinds.index("group")
        rows, groups = [], []
        for i, raw in enumerate(reader):
            if not raw:
                continue
            if len(raw) != len(schema.columns):
                raise DatasetError(
                    f"{path}: row {i} has {len(raw)} cells, expected {len(schema.columns)}"
                )
            cells: list[Cell] = []
            for j in feature_idx:
                text = raw[j].strip()
                if text in missing_tokens:
                    cells.append(MISSING)
                elif schema.kinds[j] == "numeric":
                    cells.append(_parse_numeric(text, schema.columns[j], i))
                else:
                    cells.append(text)
            label = raw[group_idx].strip()
            label = schema.group_aliases.get(label, label)
            if label not in GROUPS:
                raise DatasetError(f"{path}: row {i} has unknown group label {label!r}")
            rows.append(tuple(cells))
            groups.append(label)

    encodings = {}
    for j in feature_idx:
        if schema.kinds[j] == "categorical":
            name = schema.columns[j]
            encodings[name] = dict(schema.encodings.get(name) or default_encoding(name))
    return FeatureTable(
        column_names=tuple(schema.columns[j] for j in feature_idx),
        kinds=tuple(schema.kinds[j] for j in feature_idx),
        rows=tuple(rows),
        groups=tuple(groups),
        group_column=schema.group_column,
        encodings=encodings,
    )


def write_csv(table: FeatureTable, path: Union[str, Path]) -> None:
    """Write ``table`` so that ``load_csv(path, table.schema())`` restores it."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(table.column_names) + [table.group_column])
        for row, group in zip(table.rows, table.groups):
            out = []
            for cell in row:
                if cell is MISSING:
                    out.append("")
                elif isinstance(cell, float):
                    out.append(repr(cell))
                else:
                    out.append(str(cell))
            writer.writerow(out + [group])


def encode_categoricals(table: FeatureTable) -> FeatureTable:
    """Map every categorical column to 0/1 floats; MISSING cells stay MISSING.

    Columns already encoded (kind ``numeric``) are left untouched, which makes
    the operation idempotent.
    """
    cat_idx = [j for j, k in enumerate(table.kinds) if k == "categorical"]
    if not cat_idx:
        return table
    maps = {j: table.encodings.get(table.column_names[j]) or default_encoding(table.column_names[j])
            for j in cat_idx}
    new_rows = []
    for i, row in enumerate(table.rows):
        cells = list(row)
        for j in cat_idx:
            cell = cells[j]
            if cell is MISSING:
                continue
            mapping = maps[j]
            if isinstance(cell, float):
                if cell in (0.0, 1.0):
                    continue
                raise DatasetError(
                    f"unrecognized category {cell!r} in column {table.column_names[j]!r} (row {i})"
                )
            if cell not in mapping:
                raise DatasetError(
                    f"unrecognized category {cell!r} in column {table.column_names[j]!r} (row {i})"
                )
            cells[j] = float(mapping[cell])
        new_rows.append(tuple(cells))
    kinds = tuple("numeric" if k == "categorical" else k for k in table.kinds)
    return FeatureTable(
        column_names=table.column_names,
        kinds=kinds,
        rows=tuple(new_rows),
        groups=table.groups,
        group_column=table.group_column,
        encodings=table.encodings,
    )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Dense feature matrix with binary labels (1 = positive class).

    ``row_ids`` track where each row came from: a non-negative id is an index
    into the source table, ``-1`` marks a synthetic row.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    positive_class_name: str = POSITIVE_GROUP
    negative_class_name: str = "negative"
    row_ids: np.ndarray = None
    degenerate: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        if X.ndim != 2:
            raise DatasetError(f"X must be 2-D, got shape {X.shape}")
        y = np.array(self.y, copy=True)
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DatasetError(f"y has length {len(y)}, X has {X.shape[0]} rows")
        if len(y) and not np.all((y == 0) | (y == 1)):
            raise DatasetError("labels must be 0 or 1")
        y = y.astype(np.int64)
        if X.shape[1] != len(self.feature_names):
            raise DatasetError(
                f"X has {X.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if not np.all(np.isfinite(X)):
            raise DatasetError("X contains non-finite values")
        if not self.degenerate and len(y) and len(np.unique(y)) < 2:
            raise DatasetError("dataset holds a single class; pass degenerate=True to allow it")
        row_ids = np.arange(len(y)) if self.row_ids is None else np.array(self.row_ids, dtype=np.int64)
        if row_ids.shape != y.shape:
            raise DatasetError("row_ids must align with y")
        for arr in (X, y, row_ids):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> dict[str, int]:
        pos = int(self.y.sum())
        return {self.positive_class_name: pos, self.negative_class_name: len(self.y) - pos}

    def subset(self, indices, degenerate: bool = None) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.X[idx], self.y[idx], self.feature_names,
            self.positive_class_name, self.negative_class_name,
            row_ids=self.row_ids[idx],
            degenerate=self.degenerate if degenerate is None else degenerate,
        )

    def replace(self, X=None, y=None, row_ids=None) -> "LabeledDataset":
        return LabeledDataset(
            self.X if X is None else X,
            self.y if y is None else y,
            self.feature_names,
            self.positive_class_name,
            self.negative_class_name,
            row_ids=self.row_ids if row_ids is None else row_ids,
            degenerate=self.degenerate,
        )

    def equals(self, other: "LabeledDataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.row_ids, other.row_ids)
        )


def _binary_subset(table: FeatureTable, negative: str, drop_missing_columns: bool) -> LabeledDataset:
    rows = [i for i, g in enumerate(table.groups) if g in (POSITIVE_GROUP, negative)]
    labels = [1 if table.groups[i] == POSITIVE_GROUP else 0 for i in rows]
    name = f"{POSITIVE_GROUP}{negative}"
    if POSITIVE_GROUP not in (table.groups[i] for i in rows) or negative not in (table.groups[i] for i in rows):
        raise DatasetError(f"subset {name} is missing one of its classes")

    keep = []
    for j, col in enumerate(table.column_names):
        has_missing = any(table.rows[i][j] is MISSING for i in rows)
        if has_missing:
            if drop_missing_columns:
                continue
            raise DatasetError(f"subset {name}: column {col!r} has MISSING cells")
        keep.append(j)
    if not keep:
        raise DatasetError(f"subset {name} ends up with zero features")
    X = np.array([[table.rows[i][j] for j in keep] for i in rows], dtype=float)
    return LabeledDataset(
        X=X,
        y=np.array(labels, dtype=np.int64),
        feature_names=tuple(table.column_names[j] for j in keep),
        positive_class_name=POSITIVE_GROUP,
        negative_class_name=negative,
        row_ids=np.array(rows, dtype=np.int64),
    )


def derive_subsets(table: FeatureTable) -> tuple[LabeledDataset, LabeledDataset]:
    """Return the (PD vs RBD, PD vs HC) datasets.

    PD vs RBD keeps every feature. PD vs HC drops each column that has a
    MISSING cell anywhere among the PD and HC rows.
    """
    for j, kind in enumerate(table.kinds):
        if kind == "categorical":
            raise DatasetError(
                f"column {table.column_names[j]!r} is not encoded; run encode_categoricals first"
            )
    pdrbd = _binary_subset(table, "RBD", drop_missing_columns=False)
    pdhc = _binary_subset(table, "HC", drop_missing_columns=True)
    return pdrbd, pdhc


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: LabeledDataset
    test: LabeledDataset
    seed: int
    test_fraction: float


def allocate_largest_remainder(sizes: Sequence[int], fraction: float) -> list[int]:
    """Split ``round(fraction * sum(sizes))`` across groups by largest remainder.

    Equal remainders go to the group listed first.
    """
    quotas = [fraction * s for s in sizes]
    total = int(math.floor(fraction * sum(sizes) + 0.5))
    counts = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(counts)
    order = sorted(range(len(sizes)), key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[:max(leftover, 0)]:
        counts[c] += 1
    return counts


def stratified_split(ds: LabeledDataset, test_fraction: float, seed: int) -> SplitPair:
    """Seeded, per-class shuffled train/test partition.

    The positive class is listed first, so it wins remainder ties.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}")
    classes = (1, 0)
    members = [np.flatnonzero(ds.y == c) for c in classes]
    for c, m in zip(classes, members):
        if len(m) < 2:
            raise DatasetError(f"class {c} has {len(m)} rows; at least 2 are required")
    n_test = allocate_largest_remainder([len(m) for m in members], test_fraction)
    rng = np.random.default_rng(seed)
    test_idx, train_idx = [], []
    for c, m, t in zip(classes, members, n_test):
        if t == 0 or t == len(m):
            raise DatasetError(
                f"test_fraction {test_fraction} leaves class {c} with no "
                f"{'test' if t == 0 else 'train'} rows"
            )
        perm = rng.permutation(m)
        test_idx.append(perm[:t])
        train_idx.append(perm[t:])
    test = np.sort(np.concatenate(test_idx))
    train = np.sort(np.concatenate(train_idx))
    return SplitPair(ds.subset(train), ds.subset(test), seed=seed, test_fraction=test_fraction)
