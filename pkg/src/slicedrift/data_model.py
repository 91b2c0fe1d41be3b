"""Tabular datasets with a misclassification indicator.

A :class:`Dataset` holds one numpy vector per feature plus the boolean
indicator ``theta`` (True where the model misclassified the row). Numeric
features are ``float64`` with ``NaN`` for missing values; categorical
features are ``int64`` codes into the schema's category table with ``-1``
for missing values.

On disk a dataset is a CSV file plus a JSON schema sidecar::

    {"features": [{"name": "age", "kind": "numeric"}, ...],
     "indicator": "misclassified",
     "categories": {"region": ["west", "east", ...]}}

Category codes are positions in the sidecar's label lists. Labels not yet in
the table are appended in first-seen order, so a baseline and a deployment
file read with the same sidecar share their codes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._random import make_rng
from .errors import DataParseError, DegenerateInputError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_CODE = -1

_TRUE_TOKENS = {"1", "true"}
_FALSE_TOKENS = {"0", "false"}


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list, indicator column name and category code table."""

    features: tuple[Feature, ...]
    indicator: str
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.indicator in names:
            raise SchemaError(f"indicator column {self.indicator!r} is also a feature")
        cats = {}
        for f in self.features:
            if f.kind == CATEGORICAL:
                cats[f.name] = tuple(self.categories.get(f.name, ()))
        unknown = set(self.categories) - set(cats)
        if unknown:
            raise SchemaError(f"category tables for non-categorical features: {sorted(unknown)}")
        object.__setattr__(self, "categories", cats)

    @property
    def names(self):
        return [f.name for f in self.features]

    def kind(self, name):
        for f in self.features:
            if f.name == name:
                return f.kind
        raise SchemaError(f"unknown feature {name!r}")

    def has(self, name):
        return any(f.name == name for f in self.features)

    def select(self, names):
        keep = set(names)
        return FeatureSchema(
            features=tuple(f for f in self.features if f.name in keep),
            indicator=self.indicator,
            categories={k: v for k, v in self.categories.items() if k in keep},
        )

    def to_dict(self):
        return {
            "features": [{"name": f.name, "kind": f.kind} for f in self.features],
            "indicator": self.indicator,
            "categories": {k: list(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            features = tuple(Feature(f["name"], f["kind"]) for f in obj["features"])
            indicator = obj["indicator"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc
        cats = {k: tuple(v) for k, v in (obj.get("categories") or {}).items()}
        return cls(features=features, indicator=indicator, categories=cats)


def load_schema(path):
    with open(path, encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def sidecar_path(csv_path):
    """Default schema sidecar location for a CSV file: ``<stem>.schema.json``."""
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".schema.json")


def _frozen(arr):
    # freeze a view so the caller's array keeps its own flags
    arr = np.ascontiguousarray(arr).view()
    arr.flags.writeable = False
    return arr


class Dataset:
    """Immutable columnar table with an optional misclassification indicator.

    ``theta`` may be ``None`` for deployment data whose labels are unknown;
    operations that need it raise :class:`DegenerateInputError`.
    """

    __slots__ = ("schema", "columns", "theta", "name")

    def __init__(self, schema, columns, theta=None, name=""):
        n = None
        cols = {}
        for f in schema.features:
            if f.name not in columns:
                raise SchemaError(f"missing column {f.name!r}")
            dtype = np.float64 if f.kind == NUMERIC else np.int64
            col = np.asarray(columns[f.name], dtype=dtype)
            if col.ndim != 1:
                raise SchemaError(f"column {f.name!r} must be one-dimensional")
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise SchemaError("all columns must have the same length")
            if f.kind == CATEGORICAL and len(col):
                ncat = len(schema.categories[f.name])
                if col.min() < MISSING_CODE or col.max() >= ncat:
                    raise SchemaError(f"column {f.name!r} has codes outside its category table")
            cols[f.name] = _frozen(col)
        if theta is not None:
            theta = np.asarray(theta, dtype=bool)
            if theta.shape != (n,):
                raise SchemaError("theta must match the column length")
            theta = _frozen(theta)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("Dataset is immutable")

    def __reduce__(self):
        return (Dataset, (self.schema, self.columns, self.theta, self.name))

    def __len__(self):
        return self.N

    def __repr__(self):
        return f"Dataset(name={self.name!r}, N={self.N}, M={self.M if self.has_theta else None})"

    @property
    def N(self):
        return len(next(iter(self.columns.values())))

    @property
    def has_theta(self):
        return self.theta is not None

    @property
    def M(self):
        return int(self.require_theta().sum())

    @property
    def mcr(self):
        return self.M / self.N if self.N else 0.0

    def require_theta(self):
        if self.theta is None:
            raise DegenerateInputError("dataset has no misclassification indicator")
        return self.theta

    def take(self, rows, name=None):
        """Return a new dataset made of ``rows`` (indices, repeats allowed)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.schema,
            {k: v[rows] for k, v in self.columns.items()},
            None if self.theta is None else self.theta[rows],
            name=self.name if name is None else name,
        )

    def replace(self, columns=None, theta=..., schema=None, name=None):
        cols = dict(self.columns)
        if columns:
            cols.update(columns)
        return Dataset(
            self.schema if schema is None else schema,
            cols,
            self.theta if theta is ... else theta,
            name=self.name if name is None else name,
        )

    def without_theta(self):
        return self.replace(theta=None)

    def equals(self, other):
        if self.schema != other.schema or self.N != other.N:
            return False
        if (self.theta is None) != (other.theta is None):
            return False
        if self.theta is not None and not np.array_equal(self.theta, other.theta):
            return False
        for f in self.schema.features:
            a, b = self.columns[f.name], other.columns[f.name]
            if f.kind == NUMERIC:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True

    def rows(self):
        """Full records (features then theta) as a list of tuples, for multiset checks."""
        cols = [self.columns[n].tolist() for n in self.schema.names]
        if self.theta is not None:
            cols.append(self.theta.tolist())
        return list(zip(*cols))


def _parse_indicator(token, row):
    t = token.strip().lower()
    if t in _TRUE_TOKENS:
        return True
    if t in _FALSE_TOKENS:
        return False
    raise DataParseError(f"indicator value {token!r} is not a boolean", row=row)


def _parse_float(token):
    try:
        value = float(token)
    except ValueError:
        return math.nan
    return value


def load_dataset(path, schema=None, name=None, read_indicator=True):
    """Read a CSV file into a :class:`Dataset`.

    ``schema`` defaults to the ``<stem>.schema.json`` sidecar next to ``path``.
    Unparseable numeric values become missing; empty categorical fields are
    missing. Labels absent from the schema's category table are appended, and
    the returned dataset carries the extended schema. With
    ``read_indicator=False`` the indicator column is neither required nor read
    and the dataset has no ``theta``.
    """
    path = Path(path)
    if schema is None:
        schema = load_schema(sidecar_path(path))
    elif not isinstance(schema, FeatureSchema):
        schema = load_schema(schema)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        index = {col: i for i, col in enumerate(header)}
        needed = schema.names + ([schema.indicator] if read_indicator else [])
        missing = [col for col in needed if col not in index]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")

        tables = {k: list(v) for k, v in schema.categories.items()}
        lookup = {k: {lab: i for i, lab in enumerate(v)} for k, v in tables.items()}
        raw = {f.name: [] for f in schema.features}
        theta = []
        ind = index[schema.indicator] if read_indicator else None
        for row_no, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) < len(header):
                raise DataParseError(f"expected {len(header)} fields, got {len(record)}", row=row_no)
            if read_indicator:
                theta.append(_parse_indicator(record[ind], row_no))
            for f in schema.features:
                token = record[index[f.name]]
                if f.kind == NUMERIC:
                    raw[f.name].append(_parse_float(token))
                elif token == "":
                    raw[f.name].append(MISSING_CODE)
                else:
                    codes = lookup[f.name]
                    code = codes.get(token)
                    if code is None:
                        code = codes[token] = len(tables[f.name])
                        tables[f.name].append(token)
                    raw[f.name].append(code)

    schema = FeatureSchema(schema.features, schema.indicator, {k: tuple(v) for k, v in tables.items()})
    theta = np.array(theta, dtype=bool) if read_indicator else None
    return Dataset(schema, raw, theta, name=path.stem if name is None else name)


def save_dataset(d, path, schema_path=None):
    """Write ``d`` as CSV plus schema sidecar; returns the sidecar path."""
    path = Path(path)
    schema_path = sidecar_path(path) if schema_path is None else Path(schema_path)
    s = d.schema
    theta = d.theta
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(s.names + [s.indicator])
        cols = []
        for f in s.features:
            col = d.columns[f.name]
            if f.kind == NUMERIC:
                cols.append(["" if math.isnan(v) else repr(v) for v in col.tolist()])
            else:
                labels = s.categories[f.name]
                cols.append(["" if c == MISSING_CODE else labels[c] for c in col.tolist()])
        flags = ["" for _ in range(d.N)] if theta is None else ["1" if t else "0" for t in theta.tolist()]
        writer.writerows(zip(*cols, flags))
    save_schema(s, schema_path)
    return schema_path


@dataclass(frozen=True)
class SplitPair:
    baseline: Dataset
    deployment: Dataset
    seed: int
    split_index: int = 0


def stratified_split(d, seed, split_index=0):
    """Split ``d`` 50-50, stratified on the indicator.

    Each stratum is halved, with the odd row of an odd-sized stratum sent to a
    seeded-random side. When both strata are odd the two odd rows go to
    opposite sides, which keeps the side sizes within one of each other.
    """
    theta = d.require_theta()
    if d.N < 2:
        raise DegenerateInputError(f"stratified split needs N >= 2, got {d.N}")
    rng = make_rng(seed)
    order = rng.permutation(d.N)
    bad = order[theta[order]]
    good = order[~theta[order]]
    coin_bad, coin_good = (int(b) for b in rng.integers(0, 2, size=2))
    if len(bad) % 2 and len(good) % 2:
        coin_good = 1 - coin_bad

    side = np.zeros(d.N, dtype=np.int8)
    for stratum, coin in ((bad, coin_bad), (good, coin_good)):
        big = (len(stratum) + 1) // 2
        first, second = (stratum[:big], stratum[big:])
        # coin picks which side receives the larger half
        side[first] = coin
        side[second] = 1 - coin

    in_order = side[order]
    baseline = d.take(order[in_order == 0], name=f"{d.name}.baseline")
    deployment = d.take(order[in_order == 1], name=f"{d.name}.deployment")
    return SplitPair(baseline, deployment, seed=seed, split_index=split_index)


def resample_rows(d, seed):
    """Draw ``N`` rows uniformly with replacement."""
    if d.N == 0:
        raise DegenerateInputError("cannot resample an empty dataset")
    rows = make_rng(seed).integers(0, d.N, size=d.N)
    return d.take(rows)


def drop_low_variance(d, min_minority_count):
    """Drop features whose rows outside the modal value number fewer than ``min_minority_count``.

    Missing values count as their own value. At least one feature is kept.
    """
    keep = []
    for f in d.schema.features:
        col = d.columns[f.name]
        if f.kind == NUMERIC:
            col = np.where(np.isnan(col), np.inf, col)
        _, counts = np.unique(col, return_counts=True)
        minority = d.N - (counts.max() if len(counts) else 0)
        if minority >= min_minority_count:
            keep.append(f.name)
    if not keep:
        raise DegenerateInputError("every feature falls below the minority-count threshold")
    schema = d.schema.select(keep)
    return Dataset(schema, {k: d.columns[k] for k in keep}, d.theta, name=d.name)
