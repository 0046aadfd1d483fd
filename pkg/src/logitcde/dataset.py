"""Tabular data container, CSV ingestion, covariate scaling and grouped folds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

NA_TOKENS = ["", "NA"]


class DataError(ValueError):
    """Raised for unusable input tables."""


@dataclass
class Dataset:
    features: np.ndarray
    response: np.ndarray
    groups: Optional[np.ndarray] = None
    column_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self.response = np.asarray(self.response, dtype=float).ravel()
        n, p = self.features.shape
        if n < 1 or p < 1:
            raise DataError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
        if self.response.shape[0] != n:
            raise DataError("response length does not match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain missing or non-finite values")
        if not np.all(np.isfinite(self.response)):
            raise DataError("response contains missing or non-finite values")
        if self.groups is not None:
            self.groups = np.asarray(self.groups)
            if self.groups.shape[0] != n:
                raise DataError("groups length does not match feature rows")
        if not self.column_names:
            self.column_names = [f"x{j + 1}" for j in range(p)]
        if len(self.column_names) != p:
            raise DataError("column_names length does not match feature columns")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx],
            self.response[idx],
            None if self.groups is None else self.groups[idx],
            list(self.column_names),
        )


@dataclass(frozen=True)
class NormalizationParams:
    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        if np.shape(self.mean) != np.shape(self.sd):
            raise DataError("mean and sd lengths differ")
        if np.any(np.asarray(self.sd) <= 0):
            raise DataError("standard deviations must be strictly positive")

    def to_dict(self) -> dict:
        return {"mean": np.asarray(self.mean).tolist(), "sd": np.asarray(self.sd).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["sd"], dtype=float))


def load_table(
    path,
    response_column: str,
    group_column: Optional[str] = None,
    delimiter: str = ",",
    feature_columns: Optional[Sequence[str]] = None,
    row_filter: Optional[dict] = None,
) -> Dataset:
    """Read a delimited text file with a header row into a :class:`Dataset`.

    Empty cells and the literal ``NA`` are treated as missing. Rows with a
    missing response are dropped; a missing or non-numeric feature cell is
    an error. Every column other than the response and group columns is a
    feature unless ``feature_columns`` narrows the selection. ``row_filter``
    keeps only rows whose listed columns equal the given text values; those
    columns are then excluded from the features.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    frame = pd.read_csv(
        path,
        sep=delimiter,
        na_values=NA_TOKENS,
        keep_default_na=False,
        dtype=str,
        encoding="utf-8",
    )
    row_filter = row_filter or {}
    for col in [response_column] + ([group_column] if group_column else []) + list(row_filter):
        if col not in frame.columns:
            raise DataError(f"unknown column {col!r}; have {list(frame.columns)}")
    for col, value in row_filter.items():
        frame = frame[frame[col] == str(value)].reset_index(drop=True)
    if feature_columns is None:
        skip = {response_column, group_column, *row_filter}
        feature_columns = [c for c in frame.columns if c not in skip]
    else:
        missing = [c for c in feature_columns if c not in frame.columns]
        if missing:
            raise DataError(f"unknown feature columns {missing}")
    if not feature_columns:
        raise DataError("no feature columns")

    response = _parse_floats(frame[response_column], response_column, allow_missing=True)
    keep = ~np.isnan(response)
    dropped = int((~keep).sum())
    if keep.sum() == 0:
        raise DataError("zero usable rows: every response value is missing")

    feats = np.empty((int(keep.sum()), len(feature_columns)))
    for j, col in enumerate(feature_columns):
        feats[:, j] = _parse_floats(frame.loc[keep, col], col, allow_missing=False)

    groups = None
    if group_column:
        groups = frame.loc[keep, group_column].to_numpy()
    log.info("loaded %d rows from %s (%d dropped for missing response)", keep.sum(), path, dropped)
    return Dataset(feats, response[keep], groups, list(feature_columns))


def _parse_floats(column: pd.Series, name: str, allow_missing: bool) -> np.ndarray:
    # float() on the raw text keeps shortest-repr values bit-exact
    out = np.full(len(column), np.nan)
    for i, cell in enumerate(column.to_numpy(dtype=object)):
        if cell is None or (isinstance(cell, float) and np.isnan(cell)):
            if not allow_missing:
                raise DataError(f"missing value in feature column {name!r}")
            continue
        try:
            out[i] = float(cell)
        except ValueError:
            raise DataError(f"non-numeric cell in column {name!r}: {cell!r}") from None
    return out


def write_table(data: Dataset, path, response_column: str = "y", group_column: Optional[str] = None,
                delimiter: str = ","):
    frame = pd.DataFrame(data.features, columns=data.column_names)
    frame[response_column] = data.response
    if data.groups is not None:
        frame[group_column or "group"] = data.groups
    frame.to_csv(path, sep=delimiter, index=False)


def fit_normalization(data: Dataset) -> NormalizationParams:
    mean = data.features.mean(axis=0)
    if data.n < 2:
        raise DataError("need at least two rows to estimate a standard deviation")
    sd = data.features.std(axis=0, ddof=1)
    for j, s in enumerate(sd):
        if not s > 0:
            raise DataError(f"zero variance in column {data.column_names[j]!r}")
    return NormalizationParams(mean, sd)


def apply_normalization(data: Dataset, params: NormalizationParams) -> Dataset:
    if data.p != len(params.mean):
        raise DataError(f"normalization has {len(params.mean)} columns, data has {data.p}")
    return replace(data, features=(data.features - params.mean) / params.sd)


def invert_normalization(data: Dataset, params: NormalizationParams) -> Dataset:
    if data.p != len(params.mean):
        raise DataError(f"normalization has {len(params.mean)} columns, data has {data.p}")
    return replace(data, features=data.features * params.sd + params.mean)


def kfold_by_group(data: Dataset, k: int, seed=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split rows into ``k`` folds, keeping every group inside a single fold.

    Without group labels each row is its own group. Groups are shuffled and
    dealt round-robin, so fold sizes (in groups) differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    labels = data.groups if data.groups is not None else np.arange(data.n)
    uniq, inverse = np.unique(labels, return_inverse=True)
    if len(uniq) < k:
        raise DataError(f"{len(uniq)} groups cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(uniq))
    fold_of_group = np.empty(len(uniq), dtype=int)
    fold_of_group[order] = np.arange(len(uniq)) % k
    row_fold = fold_of_group[inverse]
    all_rows = np.arange(data.n)
    return [(all_rows[row_fold != f], all_rows[row_fold == f]) for f in range(k)]
