"""Tabular datasets with column roles and a missingness mask, CSV I/O, and
the target-domain perturbations used to simulate shifts.

Binary-label columns (protected attribute, outcome) are encoded to -1/+1.
For the protected attribute, +1 is the advantaged group and -1 the
disadvantaged group.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

KINDS = ("numeric", "binary-label", "categorical")
ROLES = ("feature", "protected", "outcome", "domain-indicator")
INDICATOR_SUFFIX = "__missing"


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str = "numeric"
    role: str = "feature"
    # binary-label: raw (negative, positive) spellings; categorical: all levels
    levels: tuple | None = None
    indicator: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DataError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.role in ("protected", "outcome") and self.kind != "binary-label":
            raise DataError(f"column {self.name!r}: {self.role} column must be binary-label")
        if self.kind == "categorical" and not self.levels:
            raise DataError(f"categorical column {self.name!r} needs declared levels")
        if self.kind == "binary-label" and self.levels is not None and len(self.levels) != 2:
            raise DataError(f"binary-label column {self.name!r} needs exactly two levels")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))

    def expanded(self) -> tuple[str, ...]:
        if self.kind == "categorical":
            names = tuple(f"{self.name}={lvl}" for lvl in self.levels)
        else:
            names = (self.name,)
        if self.indicator:
            names += (self.name + INDICATOR_SUFFIX,)
        return names


def validate_schema(schema) -> tuple[ColumnSchema, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise DataError("duplicate column names in schema")
    for role in ("protected", "outcome"):
        n = sum(c.role == role for c in schema)
        if n != 1:
            raise DataError(f"schema needs exactly one {role} column, got {n}")
    if sum(c.role == "domain-indicator" for c in schema) > 1:
        raise DataError("at most one domain-indicator column")
    return schema


def load_schema(path) -> tuple[ColumnSchema, ...]:
    """Read a YAML sidecar mapping column name -> {kind, role, levels, indicator}."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    cols = []
    for name, spec in raw.items():
        spec = dict(spec or {})
        if "levels" in spec:
            spec["levels"] = tuple(spec["levels"])
        cols.append(ColumnSchema(name=str(name), **spec))
    return validate_schema(cols)


def dump_schema(schema, path) -> None:
    out = {}
    for c in schema:
        entry = {"kind": c.kind, "role": c.role}
        if c.levels is not None:
            entry["levels"] = list(c.levels)
        if c.indicator:
            entry["indicator"] = True
        out[c.name] = entry
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(out, fh, sort_keys=False)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of encoded values plus a missingness mask.

    ``columns`` are the expanded column names (one-hot dummies, missingness
    indicators); ``blocks`` maps each schema column to its expansions.
    """

    schema: tuple[ColumnSchema, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray
    blocks: dict = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape or values.shape[1] != len(self.columns):
            raise DataError("values/mask/columns shape mismatch")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_columns(cls, schema, data: dict, mask: dict | None = None) -> "Dataset":
        """Build from already-encoded arrays keyed by expanded column name."""
        schema = validate_schema(schema)
        columns, blocks = _expand(schema)
        n = len(next(iter(data.values())))
        values = np.empty((n, len(columns)))
        m = np.zeros((n, len(columns)), dtype=bool)
        for j, name in enumerate(columns):
            if name.endswith(INDICATOR_SUFFIX) and name not in data:
                continue
            values[:, j] = data[name]
            if mask and name in mask:
                m[:, j] = mask[name]
        ds = cls(schema, columns, values, m, blocks)
        return ds._refresh_indicators()

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def spec(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise DataError(f"unknown column {name!r}")

    def _role(self, role):
        return [c.name for c in self.schema if c.role == role]

    @property
    def protected(self) -> str:
        return self._role("protected")[0]

    @property
    def outcome(self) -> str:
        return self._role("outcome")[0]

    @property
    def domain(self) -> str | None:
        found = self._role("domain-indicator")
        return found[0] if found else None

    @property
    def feature_blocks(self) -> list[str]:
        """Schema columns usable as predictors (protected attribute included)."""
        return [c.name for c in self.schema if c.role in ("feature", "protected")]

    def expand(self, names) -> list[str]:
        """Map schema-column or expanded names to expanded column names."""
        out = []
        for name in names:
            cols = self.blocks.get(name, (name,))
            for c in cols:
                self.index(c)
                if c not in out:
                    out.append(c)
        return out

    def matrix(self, names) -> np.ndarray:
        idx = [self.index(c) for c in self.expand(names)]
        return self.values[:, idx]

    @property
    def labels(self) -> np.ndarray:
        return self.column(self.outcome)

    @property
    def groups(self) -> np.ndarray:
        return self.column(self.protected)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return replace(self, values=self.values[rows], mask=self.mask[rows])

    def _refresh_indicators(self) -> "Dataset":
        values = self.values.copy()
        for c in self.schema:
            if c.indicator:
                src = self.index(self.blocks[c.name][0])
                values[:, self.index(c.name + INDICATOR_SUFFIX)] = self.mask[:, src]
        return replace(self, values=values)


def _expand(schema):
    columns, blocks = [], {}
    for c in schema:
        exp = c.expanded()
        blocks[c.name] = exp
        columns.extend(exp)
    return tuple(columns), blocks


def _parse_binary(raw: str, col: ColumnSchema) -> float:
    if col.levels is not None:
        if raw == col.levels[1]:
            return 1.0
        if raw == col.levels[0]:
            return -1.0
        raise DataError(f"column {col.name!r}: unknown level {raw!r}")
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"column {col.name!r}: cannot parse {raw!r}") from None
    if v == 1.0:
        return 1.0
    if v in (-1.0, 0.0):
        return -1.0
    raise DataError(f"column {col.name!r}: binary value {raw!r} not in {{-1, 0, 1}}")


def load_csv(path, schema) -> Dataset:
    schema = validate_schema(schema)
    columns, blocks = _expand(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    want = [c.name for c in schema]
    if sorted(header) != sorted(want):
        missing = sorted(set(want) - set(header))
        extra = sorted(set(header) - set(want))
        raise DataError(f"header mismatch: missing {missing}, unexpected {extra}")
    pos = {h: i for i, h in enumerate(header)}

    n = len(rows)
    values = np.zeros((n, len(columns)))
    mask = np.zeros((n, len(columns)), dtype=bool)
    col_index = {c: j for j, c in enumerate(columns)}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i + 2}: expected {len(header)} cells, got {len(row)}")
        for col in schema:
            raw = row[pos[col.name]].strip()
            targets = [col_index[c] for c in blocks[col.name] if not c.endswith(INDICATOR_SUFFIX)]
            if raw == "":
                mask[i, targets] = True
                continue
            if col.kind == "numeric":
                try:
                    values[i, targets[0]] = float(raw)
                except ValueError:
                    raise DataError(f"row {i + 2}, column {col.name!r}: cannot parse {raw!r}") from None
            elif col.kind == "binary-label":
                values[i, targets[0]] = _parse_binary(raw, col)
            else:
                if raw not in col.levels:
                    raise DataError(f"row {i + 2}, column {col.name!r}: unknown category {raw!r}")
                values[i, targets[col.levels.index(raw)]] = 1.0
    return Dataset(schema, columns, values, mask, blocks)._refresh_indicators()


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return format(v, ".17g")


def write_csv(ds: Dataset, path) -> None:
    """Write schema columns back in raw form; masked cells become empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in ds.schema])
        for i in range(ds.n):
            row = []
            for col in ds.schema:
                j = ds.index(ds.blocks[col.name][0])
                if ds.mask[i, j]:
                    row.append("")
                elif col.kind == "numeric":
                    row.append(_fmt(ds.values[i, j]))
                elif col.kind == "binary-label":
                    v = ds.values[i, j]
                    if col.levels is not None:
                        row.append(col.levels[1] if v > 0 else col.levels[0])
                    else:
                        row.append("1" if v > 0 else "-1")
                else:
                    k = int(np.argmax(ds.matrix([col.name])[i, : len(col.levels)]))
                    row.append(col.levels[k])
            w.writerow(row)


def largest_remainder(n: int, fractions) -> list[int]:
    quotas = [n * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split(ds: Dataset, fractions, seed) -> list[Dataset]:
    """Random disjoint row partition with largest-remainder sizes."""
    fractions = [float(f) for f in fractions]
    if not fractions or any(f <= 0 for f in fractions):
        raise DataError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions sum to {sum(fractions)!r}, not 1")
    sizes = largest_remainder(ds.n, fractions)
    perm = np.random.default_rng(seed).permutation(ds.n)
    parts, start = [], 0
    for size in sizes:
        parts.append(ds.take(np.sort(perm[start:start + size])))
        start += size
    return parts


def inject_missingness(ds: Dataset, column: str, fraction: float, seed) -> Dataset:
    """Mask ``round(fraction * n)`` uniformly chosen rows of ``column``."""
    if not 0.0 <= fraction <= 1.0:
        raise DataError("fraction must lie in [0, 1]")
    targets = [c for c in ds.expand([column]) if not c.endswith(INDICATOR_SUFFIX)]
    k = int(math.floor(fraction * ds.n + 0.5))
    if k == 0:
        return ds
    rows = np.random.default_rng(seed).choice(ds.n, size=k, replace=False)
    mask = ds.mask.copy()
    for c in targets:
        mask[rows, ds.index(c)] = True
    return replace(ds, mask=mask)._refresh_indicators()


def impute_mean(ds: Dataset, stats_source: Dataset) -> Dataset:
    """Fill masked cells with column means of ``stats_source``'s observed cells."""
    if stats_source.columns != ds.columns:
        raise DataError("impute_mean: schemas differ")
    if not ds.mask.any():
        return ds
    values = ds.values.copy()
    label_cols = {ds.index(ds.protected), ds.index(ds.outcome)}
    for j in np.flatnonzero(ds.mask.any(axis=0)):
        if j in label_cols:
            raise DataError(f"cannot impute label column {ds.columns[j]!r}")
        observed = ~stats_source.mask[:, j]
        if not observed.any():
            raise DataError(f"column {ds.columns[j]!r} fully masked in stats source")
        values[ds.mask[:, j], j] = stats_source.values[observed, j].mean()
    return replace(ds, values=values, mask=np.zeros_like(ds.mask))


def _level_value(ds: Dataset, column: str, level):
    col = ds.spec(column)
    if col.kind == "categorical":
        if str(level) not in col.levels:
            raise DataError(f"column {column!r} has no level {level!r}")
        return ds.column(f"{column}={level}") == 1.0
    if col.kind == "binary-label":
        if col.levels is not None and str(level) in col.levels:
            code = 1.0 if str(level) == col.levels[1] else -1.0
        else:
            code = _parse_binary(str(level), replace(col, levels=None))
        return ds.column(column) == code
    return ds.column(column) == float(level)


def downsample_group(ds: Dataset, column: str, level, reject_prob: float, seed) -> Dataset:
    """Drop each row with ``column == level`` independently with ``reject_prob``."""
    if not 0.0 <= reject_prob <= 1.0:
        raise DataError("reject_prob must lie in [0, 1]")
    in_group = _level_value(ds, column, level) & ~ds.mask[:, ds.index(ds.blocks[column][0])]
    if not in_group.any():
        raise DataError(f"level {level!r} does not occur in column {column!r}")
    draws = np.random.default_rng(seed).random(ds.n)
    keep = ~(in_group & (draws < reject_prob))
    return ds.take(np.flatnonzero(keep))
