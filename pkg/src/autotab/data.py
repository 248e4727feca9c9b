"""CSV ingestion, column parsing, roles, and the typed dataset container.

Parsing is a trial cascade per column: integer, float, datetime (fixed format
list), then category. Constant columns are dropped. Datetime columns are
expanded into calendar parts and excluded from modeling themselves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .metrics import MetricSpec, default_metric

ROLE_KINDS = ("numeric", "category", "datetime", "target", "drop")
TASK_KINDS = ("binary", "multiclass", "regression")

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})

# Trial order for datetime detection. A column is datetime only if at least
# 99% of its non-missing cells parse under a single format.
DATETIME_FORMATS = (
    "%Y-%m-%d",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y/%m/%d",
    "%d.%m.%Y",
    "%m/%d/%Y",
)
EPOCH_FORMAT = "epoch_seconds"
EPOCH_RANGE = (10 ** 8, 10 ** 11)
DATETIME_PARSE_THRESHOLD = 0.99

DATETIME_PARTS = ("year", "month", "day", "weekday", "hour")

# Conventional default fold count; used for the small-class warning at build
# time (make_folds performs the actual fallback).
DEFAULT_K = 5


@dataclass(frozen=True)
class RawTable:
    """A parsed CSV: header plus all cells as text, missing cells as None."""

    column_names: tuple[str, ...]
    columns: tuple[tuple, ...]
    n_rows: int

    def column(self, name: str) -> tuple:
        return self.columns[self.column_names.index(name)]


@dataclass(frozen=True)
class Task:
    kind: str
    n_classes: int = 0
    metric: MetricSpec | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise DataError(f"unknown task kind {self.kind!r}")
        if self.metric is None:
            object.__setattr__(self, "metric", default_metric(self.kind))
        if not self.metric.valid_for(self.kind):
            raise DataError(f"metric {self.metric.name!r} is not valid for {self.kind} tasks")


@dataclass(frozen=True)
class Column:
    """One typed feature column.

    kind 'numeric':  float64 values, NaN marks missing.
    kind 'category': int32 dense codes 0..card-1, -1 marks missing/unseen;
                     `dictionary` holds the observed training values (strings
                     for text columns, float64 for numeric-origin categories).
    kind 'datetime': float64 epoch seconds, NaN marks missing (kept only for
                     bookkeeping; modeling uses the expanded parts).
    """

    name: str
    kind: str
    values: np.ndarray
    dictionary: np.ndarray | None = None
    # True when the source cells were float literals with a fractional part.
    from_float_literals: bool = False
    # Set for parsed datetime columns so inference can reuse the format.
    datetime_format: str | None = None

    def missing_mask(self) -> np.ndarray:
        if self.kind == "category":
            return self.values < 0
        return np.isnan(self.values)


@dataclass
class DatasetMeta:
    n_rows: int
    n_features: int
    unique_counts: dict[str, int] = field(default_factory=dict)
    missing_rates: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class Dataset:
    """Immutable typed table: modeling columns, roles, target, task, metadata.

    ``columns`` hold only modeling features (numeric and category). Dropped
    and raw datetime columns are tracked through ``roles`` so reports and the
    inference schema can still see them.
    """

    columns: dict[str, Column]
    roles: dict[str, str]
    target: np.ndarray
    target_name: str
    task: Task
    meta: DatasetMeta
    # Raw-table parse recipe per source column, used to rebuild feature
    # columns from a new CSV at inference time.
    schema: dict[str, dict] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.meta.n_rows

    def feature_names(self) -> list[str]:
        return list(self.columns.keys())

    def numeric_feature_names(self) -> list[str]:
        return [n for n, c in self.columns.items() if c.kind == "numeric"]

    def category_feature_names(self) -> list[str]:
        return [n for n, c in self.columns.items() if c.kind == "category"]

    def with_columns_as_category(self, names: list[str]) -> "Dataset":
        """Return a copy where the given numeric columns become categories."""
        new_cols = dict(self.columns)
        new_roles = dict(self.roles)
        new_schema = {k: dict(v) for k, v in self.schema.items()}
        for name in names:
            col = self.columns[name]
            if col.kind != "numeric":
                continue
            new_cols[name] = numeric_to_category(col)
            new_roles[name] = "category"
            if name in new_schema:
                new_schema[name]["kind"] = "category_numeric"
        ds = Dataset(new_cols, new_roles, self.target, self.target_name,
                     self.task, self.meta, new_schema)
        ds.meta = _build_meta(new_cols, self.meta.n_rows, list(self.meta.warnings))
        return ds


def numeric_to_category(col: Column) -> Column:
    finite = col.values[~np.isnan(col.values)]
    dictionary = np.unique(finite)
    codes = np.full(col.values.shape, -1, dtype=np.int32)
    ok = ~np.isnan(col.values)
    idx = np.searchsorted(dictionary, col.values[ok])
    codes[ok] = idx.astype(np.int32)
    return Column(col.name, "category", codes, dictionary=dictionary,
                  from_float_literals=col.from_float_literals)


# ---------------------------------------------------------------------------
# CSV reading


def read_csv(path: str, target_name: str | None = None,
             hints: dict[str, str] | None = None) -> RawTable:
    """Read an RFC 4180 CSV with a header row into text columns.

    Empty cells and the tokens NA/NaN/null/None (case-insensitive) become
    missing (None). Ragged rows are a hard error reporting the 1-based data
    row index. `target_name` and hint keys are validated against the header.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        n_cols = len(header)
        cols: list[list] = [[] for _ in range(n_cols)]
        n_rows = 0
        for i, row in enumerate(reader, start=1):
            if len(row) != n_cols:
                raise DataError(
                    f"{path}: ragged row {i}: expected {n_cols} cells, got {len(row)}")
            for j, cell in enumerate(row):
                cols[j].append(None if cell.strip().lower() in MISSING_TOKENS else cell)
            n_rows += 1
    if target_name is not None and target_name not in header:
        raise DataError(f"target column {target_name!r} not found in header")
    for key in (hints or {}):
        if key not in header:
            raise DataError(f"role hint names unknown column {key!r}")
    return RawTable(tuple(header), tuple(tuple(c) for c in cols), n_rows)


# ---------------------------------------------------------------------------
# Column parsing cascade


def _try_int(cells) -> tuple[np.ndarray, bool] | None:
    out = np.full(len(cells), np.nan)
    for i, c in enumerate(cells):
        if c is None:
            continue
        s = c.strip()
        try:
            out[i] = int(s)
        except ValueError:
            return None
    return out, False


def _try_float(cells) -> tuple[np.ndarray, bool] | None:
    out = np.full(len(cells), np.nan)
    has_fraction = False
    for i, c in enumerate(cells):
        if c is None:
            continue
        try:
            v = float(c.strip())
        except ValueError:
            return None
        if not math.isfinite(v):
            return None
        out[i] = v
        if v != math.floor(v):
            has_fraction = True
    return out, has_fraction


def _parse_datetime_format(cells, fmt: str) -> tuple[np.ndarray, int]:
    """Parse under one format; failures become NaN. Returns (epochs, n_parsed)."""
    out = np.full(len(cells), np.nan)
    n_parsed = 0
    for i, c in enumerate(cells):
        if c is None:
            continue
        try:
            dt = datetime.strptime(c.strip(), fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
        out[i] = dt.timestamp()
        n_parsed += 1
    return out, n_parsed


def _try_datetime(cells) -> tuple[np.ndarray, str] | None:
    n_nonmissing = sum(1 for c in cells if c is not None)
    if n_nonmissing == 0:
        return None
    for fmt in DATETIME_FORMATS:
        epochs, n_parsed = _parse_datetime_format(cells, fmt)
        if n_parsed / n_nonmissing >= DATETIME_PARSE_THRESHOLD:
            return epochs, fmt
    return None


def _epoch_int_to_datetime(values: np.ndarray) -> np.ndarray | None:
    """Integers that all look like epoch seconds become a datetime column."""
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return None
    lo, hi = EPOCH_RANGE
    in_range = (finite >= lo) & (finite <= hi)
    if in_range.mean() >= DATETIME_PARSE_THRESHOLD:
        out = values.copy()
        out[(out < lo) | (out > hi)] = np.nan
        return out
    return None


def _category_column(name: str, cells) -> Column:
    seen = sorted({c for c in cells if c is not None})
    dictionary = np.array(seen, dtype=str)
    lookup = {v: i for i, v in enumerate(seen)}
    codes = np.array([lookup.get(c, -1) if c is not None else -1 for c in cells],
                     dtype=np.int32)
    return Column(name, "category", codes, dictionary=dictionary)


def parse_column(name: str, cells) -> tuple[Column, dict]:
    """Run the trial cascade on one text column.

    Returns the typed column plus a schema entry describing how to re-parse
    the same source column at inference time.
    """
    parsed_int = _try_int(cells)
    if parsed_int is not None:
        values, _ = parsed_int
        as_epoch = _epoch_int_to_datetime(values)
        if as_epoch is not None:
            col = Column(name, "datetime", as_epoch, datetime_format=EPOCH_FORMAT)
            return col, {"kind": "datetime", "format": EPOCH_FORMAT}
        return Column(name, "numeric", values), {"kind": "numeric"}
    parsed_float = _try_float(cells)
    if parsed_float is not None:
        values, has_fraction = parsed_float
        col = Column(name, "numeric", values, from_float_literals=has_fraction)
        return col, {"kind": "numeric", "float_literals": has_fraction}
    parsed_dt = _try_datetime(cells)
    if parsed_dt is not None:
        epochs, fmt = parsed_dt
        col = Column(name, "datetime", epochs, datetime_format=fmt)
        return col, {"kind": "datetime", "format": fmt}
    return _category_column(name, cells), {"kind": "category"}


def parse_with_schema(name: str, cells, entry: dict) -> Column:
    """Re-parse a raw column at inference using the stored training recipe."""
    kind = entry["kind"]
    if kind == "numeric":
        out = np.full(len(cells), np.nan)
        for i, c in enumerate(cells):
            if c is None:
                continue
            try:
                out[i] = float(c.strip())
            except ValueError:
                pass
        return Column(name, "numeric", out)
    if kind == "datetime":
        fmt = entry["format"]
        if fmt == EPOCH_FORMAT:
            parsed = _try_int(cells) or _try_float(cells)
            values = parsed[0] if parsed is not None else np.full(len(cells), np.nan)
            lo, hi = EPOCH_RANGE
            values = values.copy()
            values[(values < lo) | (values > hi)] = np.nan
            return Column(name, "datetime", values, datetime_format=fmt)
        epochs, _ = _parse_datetime_format(cells, fmt)
        return Column(name, "datetime", epochs, datetime_format=fmt)
    if kind == "category_numeric":
        out = np.full(len(cells), np.nan)
        for i, c in enumerate(cells):
            if c is None:
                continue
            try:
                out[i] = float(c.strip())
            except ValueError:
                pass
        return Column(name, "numeric", out)
    # plain text category: codes resolved against the stored dictionary later
    return _category_column(name, cells)


# ---------------------------------------------------------------------------
# Datetime expansion


def expand_datetime(col: Column) -> list[Column]:
    """Expand epoch seconds into numeric year/month/day/weekday/hour columns.

    Missing timestamps propagate as NaN in every part. Weekday is 0 for
    Monday. Constant parts are handled by the caller's constant-column rule.
    """
    values = col.values
    mask = np.isnan(values)
    safe = np.where(mask, 0.0, values).astype(np.int64)
    dt64 = safe.astype("datetime64[s]")
    years = dt64.astype("datetime64[Y]")
    months = dt64.astype("datetime64[M]")
    days = dt64.astype("datetime64[D]")
    part_values = {
        "year": years.astype(np.int64) + 1970,
        "month": months.astype(np.int64) % 12 + 1,
        "day": (days - months).astype(np.int64) + 1,
        "weekday": (days.astype(np.int64) + 3) % 7,
        "hour": (dt64 - days).astype("timedelta64[h]").astype(np.int64),
    }
    out = []
    for part in DATETIME_PARTS:
        arr = part_values[part].astype(np.float64)
        arr[mask] = np.nan
        out.append(Column(f"{col.name}__{part}", "numeric", arr))
    return out


# ---------------------------------------------------------------------------
# Target handling


def _encode_target(cells, task_kind: str, n_rows: int) -> tuple[np.ndarray, tuple[str, ...]]:
    for i, c in enumerate(cells):
        if c is None:
            raise DataError(f"target has a missing value at row {i + 1}")
    if task_kind == "regression":
        out = np.empty(n_rows)
        for i, c in enumerate(cells):
            try:
                out[i] = float(c.strip())
            except ValueError:
                raise DataError(f"target value {c!r} at row {i + 1} is not numeric") from None
            if not math.isfinite(out[i]):
                raise DataError(f"target value at row {i + 1} is not finite")
        return out, ()
    labels = sorted({c.strip() for c in cells})
    if task_kind == "binary" and len(labels) != 2:
        raise DataError(f"binary target must have exactly 2 labels, found {len(labels)}")
    if task_kind == "multiclass" and len(labels) < 3:
        raise DataError(f"multiclass target must have at least 3 labels, found {len(labels)}")
    lookup = {v: i for i, v in enumerate(labels)}
    out = np.array([lookup[c.strip()] for c in cells], dtype=np.int64)
    return out, tuple(labels)


def _constant(col: Column) -> bool:
    if col.kind == "category":
        vals = col.values[col.values >= 0]
        return vals.size == 0 or np.unique(vals).size <= 1
    vals = col.values[~np.isnan(col.values)]
    return vals.size == 0 or np.unique(vals).size <= 1


def _build_meta(columns: dict[str, Column], n_rows: int,
                warnings: list[str]) -> DatasetMeta:
    meta = DatasetMeta(n_rows=n_rows, n_features=len(columns), warnings=warnings)
    for name, col in columns.items():
        mask = col.missing_mask()
        if col.kind == "category":
            meta.unique_counts[name] = int(col.dictionary.shape[0])
        else:
            meta.unique_counts[name] = int(np.unique(col.values[~mask]).size)
        meta.missing_rates[name] = float(mask.mean()) if n_rows else 0.0
    return meta


# ---------------------------------------------------------------------------
# Dataset construction


def build_dataset(raw: RawTable, target_name: str, task_kind: str,
                  hints: dict[str, str] | None = None,
                  metric: MetricSpec | None = None) -> Dataset:
    """Parse a raw table into a typed dataset for the given task.

    Hints override the cascade per column ('numeric', 'category', 'datetime',
    'drop'). Constant columns are dropped, datetime columns expanded, and
    classification targets label-encoded with the mapping stored on the task.
    """
    if target_name not in raw.column_names:
        raise DataError(f"target column {target_name!r} not found")
    hints = dict(hints or {})
    for key, role in hints.items():
        if role not in ROLE_KINDS:
            raise DataError(f"role hint for {key!r} has unknown role {role!r}")

    target, labels = _encode_target(raw.column(target_name), task_kind, raw.n_rows)
    task = Task(task_kind, n_classes=len(labels) if task_kind != "regression" else 0,
                metric=metric, labels=labels)

    columns: dict[str, Column] = {}
    roles: dict[str, str] = {target_name: "target"}
    schema: dict[str, dict] = {}
    warnings: list[str] = []

    for name in raw.column_names:
        if name == target_name:
            continue
        cells = raw.column(name)
        hint = hints.get(name)
        if hint == "drop":
            roles[name] = "drop"
            continue
        if hint == "category":
            col, entry = _category_column(name, cells), {"kind": "category"}
        elif hint == "numeric":
            parsed = _try_int(cells) or _try_float(cells)
            if parsed is None:
                raise DataError(f"column {name!r} hinted numeric but does not parse")
            col, entry = Column(name, "numeric", parsed[0],
                                from_float_literals=parsed[1]), {"kind": "numeric"}
        elif hint == "datetime":
            parsed_dt = _try_datetime(cells)
            if parsed_dt is None:
                raise DataError(f"column {name!r} hinted datetime but does not parse")
            col = Column(name, "datetime", parsed_dt[0], datetime_format=parsed_dt[1])
            entry = {"kind": "datetime", "format": parsed_dt[1]}
        else:
            col, entry = parse_column(name, cells)

        if col.kind == "datetime":
            roles[name] = "datetime"
            schema[name] = entry
            for part in expand_datetime(col):
                if _constant(part):
                    roles[part.name] = "drop"
                    continue
                columns[part.name] = part
                roles[part.name] = "numeric"
                schema[part.name] = {"kind": "datetime_part", "source": name,
                                     "part": part.name.rsplit("__", 1)[1]}
            continue

        if _constant(col):
            roles[name] = "drop"
            continue
        columns[name] = col
        roles[name] = col.kind
        schema[name] = entry

    if task_kind == "multiclass":
        counts = np.bincount(target, minlength=task.n_classes)
        small = [task.labels[i] for i in range(task.n_classes) if counts[i] < DEFAULT_K]
        if small:
            warnings.append(
                f"classes {small} have fewer than {DEFAULT_K} members; stratification degrades")

    meta = _build_meta(columns, raw.n_rows, warnings)
    return Dataset(columns, roles, target, target_name, task, meta, schema)


def dataset_from_arrays(X: np.ndarray, y: np.ndarray, task_kind: str,
                        feature_names: list[str] | None = None,
                        category_columns: list[str] | None = None,
                        metric: MetricSpec | None = None) -> Dataset:
    """Build a dataset directly from numeric arrays (tests, stacking levels).

    Columns listed in `category_columns` are converted to dense codes.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be 2-dimensional")
    n, f = X.shape
    names = feature_names or [f"f{i}" for i in range(f)]
    if len(names) != f:
        raise DataError("feature_names length does not match X")
    y = np.asarray(y)
    if task_kind == "regression":
        target = y.astype(np.float64)
        labels: tuple[str, ...] = ()
    else:
        classes = np.unique(y)
        target = np.searchsorted(classes, y).astype(np.int64)
        labels = tuple(str(c) for c in classes)
        if task_kind == "binary" and len(labels) != 2:
            raise DataError("binary target must have exactly 2 labels")
    task = Task(task_kind, n_classes=len(labels), metric=metric, labels=labels)
    columns: dict[str, Column] = {}
    roles: dict[str, str] = {"__target__": "target"}
    schema: dict[str, dict] = {}
    for j, name in enumerate(names):
        vals = X[:, j]
        finite = vals[~np.isnan(vals)]
        has_fraction = bool(finite.size and np.any(finite != np.floor(finite)))
        col = Column(name, "numeric", vals.copy(), from_float_literals=has_fraction)
        if category_columns and name in category_columns:
            col = numeric_to_category(col)
        columns[name] = col
        roles[name] = col.kind
        schema[name] = {"kind": "numeric" if col.kind == "numeric" else "category_numeric"}
    meta = _build_meta(columns, n, [])
    return Dataset(columns, roles, target, "__target__", task, meta, schema)


def dataset_from_raw_with_schema(raw: RawTable, reference: Dataset,
                                 selected: list[str] | None = None) -> Dataset:
    """Rebuild the feature columns of `reference` from a new raw table.

    Applies the stored parse recipes and category dictionaries; the target is
    not required. Unseen categories map to code -1. Raises on missing source
    columns.
    """
    needed_sources: dict[str, dict] = {}
    wanted = set(selected if selected is not None else reference.feature_names())
    for name in wanted:
        entry = reference.schema.get(name)
        if entry is None:
            raise DataError(f"no parse recipe stored for column {name!r}")
        source = entry.get("source", name)
        source_entry = reference.schema[source] if entry["kind"] == "datetime_part" else entry
        needed_sources[source] = source_entry
    missing = [s for s in needed_sources if s not in raw.column_names]
    if missing:
        raise DataError(f"input table is missing columns {sorted(missing)}")

    parsed_sources = {
        source: parse_with_schema(source, raw.column(source), entry)
        for source, entry in needed_sources.items()
    }
    expanded: dict[str, Column] = {}
    for source, col in parsed_sources.items():
        if col.kind == "datetime":
            for part in expand_datetime(col):
                expanded[part.name] = part

    columns: dict[str, Column] = {}
    for name in reference.feature_names():
        if name not in wanted:
            continue
        ref_col = reference.columns[name]
        entry = reference.schema[name]
        if entry["kind"] == "datetime_part":
            col = expanded[name]
        else:
            col = parsed_sources[name]
        if ref_col.kind == "category":
            columns[name] = _recode_category(col, ref_col)
        else:
            columns[name] = Column(name, "numeric", col.values.astype(np.float64))
    roles = {n: c.kind for n, c in columns.items()}
    meta = _build_meta(columns, raw.n_rows, [])
    return Dataset(columns, roles, np.zeros(raw.n_rows), reference.target_name,
                   reference.task, meta, reference.schema)


def _recode_category(col: Column, ref_col: Column) -> Column:
    dictionary = ref_col.dictionary
    codes = np.full(col.values.shape[0], -1, dtype=np.int32)
    if dictionary.dtype.kind in ("U", "S"):
        # parsed fresh from text: match against stored strings
        raw_dict = col.dictionary if col.kind == "category" else None
        if raw_dict is None:
            str_vals = np.array([str(v) for v in col.values], dtype=str)
            idx = np.searchsorted(dictionary, str_vals)
            idx = np.clip(idx, 0, len(dictionary) - 1)
            hit = dictionary[idx] == str_vals
            codes[hit] = idx[hit].astype(np.int32)
        else:
            remap = np.full(len(raw_dict), -1, dtype=np.int32)
            idx = np.searchsorted(dictionary, raw_dict)
            idx = np.clip(idx, 0, len(dictionary) - 1)
            hit = dictionary[idx] == raw_dict
            remap[hit] = idx[hit].astype(np.int32)
            ok = col.values >= 0
            codes[ok] = remap[col.values[ok]]
    else:
        vals = col.values if col.kind == "numeric" else col.values.astype(np.float64)
        ok = ~np.isnan(vals)
        idx = np.searchsorted(dictionary, vals[ok])
        idx = np.clip(idx, 0, len(dictionary) - 1)
        hit = dictionary[idx] == vals[ok]
        sub = np.full(int(ok.sum()), -1, dtype=np.int32)
        sub[hit] = idx[hit].astype(np.int32)
        codes[ok] = sub
    return Column(col.name, "category", codes, dictionary=dictionary)
