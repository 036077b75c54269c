"""Flow dataset ingestion, splitting, scaling and undersampling"""

__docformat__ = "restructuredtext"

import logging
from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import (
    DataError,
    UsageError,
)

lgr = logging.getLogger("datalad.perturb.dataset_io")

# label values taken as benign when no explicit benign label is given
BENIGN_ALIASES = ("benign", "normal")


class ScalerMethod(str, Enum):
    STANDARDIZE = "standardize"
    MINMAX = "minmax"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Numeric feature matrix with binary labels.

    Arrays are copied on construction and marked read-only.
    """

    feature_names: tuple
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        x = _frozen(self.x, np.float64)
        y = _frozen(self.y, np.int64)
        if x.ndim != 2:
            raise DataError(f"feature matrix must be 2-dimensional, got {x.ndim}")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"{x.shape[0]} feature rows but {y.shape[0]} labels", module="dataset_io"
            )
        if x.shape[1] != len(self.feature_names):
            raise DataError(
                f"{x.shape[1]} feature columns but {len(self.feature_names)} names",
                module="dataset_io",
            )
        if not np.all(np.isfinite(x)):
            raise DataError("feature matrix contains non-finite values", module="dataset_io")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 (benign) or 1 (malicious)", module="dataset_io")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    def with_x(self, x, feature_names=None):
        """Same labels, new feature matrix"""
        return Dataset(
            self.feature_names if feature_names is None else feature_names, x, self.y
        )

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.feature_names, self.x[rows], self.y[rows])

    def class_counts(self):
        return int(np.sum(self.y == 0)), int(np.sum(self.y == 1))


@dataclass
class DropReport:
    rows_read: int
    rows_dropped: int
    per_column_failures: dict = field(default_factory=dict)
    label_encoding: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "per_column_failures": dict(self.per_column_failures),
            "label_encoding": dict(self.label_encoding),
        }


@dataclass(frozen=True, eq=False)
class ScalerParams:
    method: ScalerMethod
    per_feature_a: np.ndarray
    per_feature_b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "method", ScalerMethod(self.method))
        a = _frozen(self.per_feature_a, np.float64)
        b = _frozen(self.per_feature_b, np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise DataError("scaler parameter vectors must have equal length")
        object.__setattr__(self, "per_feature_a", a)
        object.__setattr__(self, "per_feature_b", b)

    def to_dict(self):
        return {
            "method": self.method.value,
            "a": self.per_feature_a.tolist(),
            "b": self.per_feature_b.tolist(),
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(ScalerMethod(rec["method"]), rec["a"], rec["b"])


def encode_labels(values, benign_label=None):
    """Map raw label values onto {0: benign, 1: malicious}

    Resolution order: the explicit ``benign_label``; numeric labels that
    already are 0/1; a value that reads "benign" or "normal"
    (case-insensitive); finally the alphabetically first value.

    Parameters
    ----------
    values : pandas.Series
        Label column, as read from the CSV (strings).
    benign_label : str, optional

    Returns
    -------
    tuple
        (numpy.ndarray of int, dict mapping raw value -> code), the mapping
        sorted alphabetically by raw value.
    """
    values = values.astype(str).str.strip()
    distinct = sorted(values.unique())
    if benign_label is not None:
        if benign_label not in distinct:
            raise DataError(
                f"benign label {benign_label!r} does not occur in the label column",
                module="dataset_io",
            )
        benign = benign_label
    elif set(distinct) <= {"0", "1"}:
        benign = "0"
    else:
        aliases = [v for v in distinct if v.lower() in BENIGN_ALIASES]
        if aliases:
            benign = aliases[0]
        else:
            benign = distinct[0]
            lgr.warning(
                "No benign label given or recognised, treating %r as benign", benign
            )
    encoding = {v: 0 if v == benign else 1 for v in distinct}
    return values.map(encoding).to_numpy(dtype=np.int64), encoding


def load_csv(path, label_column, benign_label=None):
    """Load a flow CSV into a numeric `Dataset`

    Every feature column is coerced to numeric; values that cannot be
    coerced (and infinities) count as failures of their column. Rows with
    any failure or missing value are dropped.

    Parameters
    ----------
    path : str or Path
    label_column : str
        Name of the column holding the class label.
    benign_label : str, optional
        Label value mapped to 0; every other value maps to 1.

    Returns
    -------
    tuple
        (Dataset, DropReport)
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[""])
    except FileNotFoundError as e:
        raise DataError(f"dataset not found: {path}", module="dataset_io") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}", module="dataset_io") from e
    df.columns = [c.strip() for c in df.columns]
    if label_column not in df.columns:
        raise DataError(
            f"label column {label_column!r} not found in {path}", module="dataset_io"
        )
    rows_read = len(df)
    feature_names = [c for c in df.columns if c != label_column]

    failures = {}
    numeric = {}
    for col in feature_names:
        raw = df[col]
        coerced = pd.to_numeric(raw, errors="coerce").astype(np.float64)
        bad = raw.notna() & ~np.isfinite(coerced)
        n_bad = int(bad.sum())
        if n_bad:
            failures[col] = n_bad
        numeric[col] = coerced.where(np.isfinite(coerced))
    numeric = pd.DataFrame(numeric, index=df.index, columns=feature_names)

    usable = numeric.notna().all(axis=1) & df[label_column].notna()
    numeric = numeric[usable]
    labels = df.loc[usable, label_column]
    dropped = rows_read - int(usable.sum())
    if not len(numeric):
        raise DataError(f"no usable rows in {path}", module="dataset_io")

    y, encoding = encode_labels(labels, benign_label)
    report = DropReport(
        rows_read=rows_read,
        rows_dropped=dropped,
        per_column_failures=failures,
        label_encoding=encoding,
    )
    lgr.info(
        "Loaded %d of %d rows (%d features) from %s",
        len(numeric),
        rows_read,
        len(feature_names),
        path,
    )
    if dropped:
        lgr.debug("Coercion failures per column: %s", failures)
    return Dataset(feature_names, numeric.to_numpy(), y), report


def split(dataset, test_fraction, seed):
    """Seeded shuffle split into (train, test)

    The test side receives ``round(test_fraction * n)`` rows, rounding
    halves up.
    """
    if not 0 < test_fraction < 1:
        raise UsageError(f"test fraction must lie in (0, 1), got {test_fraction}")
    n = dataset.n_rows
    n_test = int(np.floor(test_fraction * n + 0.5))
    if n_test == 0 or n_test == n:
        raise DataError(
            f"degenerate split: {n} rows with test fraction {test_fraction} "
            f"leaves {n - n_test} train and {n_test} test rows",
            module="dataset_io",
        )
    order = np.random.default_rng(seed).permutation(n)
    return dataset.take(order[n_test:]), dataset.take(order[:n_test])


def fit_scaler(train, method):
    """Fit per-feature scaling parameters on training data only"""
    method = ScalerMethod(method)
    if not train.n_rows:
        raise DataError("cannot fit a scaler on an empty training set")
    x = train.x
    constant = np.ptp(x, axis=0) == 0
    if method is ScalerMethod.STANDARDIZE:
        a = x.mean(axis=0)
        b = x.std(axis=0)
        b[constant] = 1.0
        a[constant] = x[0, constant]
    else:
        a = x.min(axis=0)
        b = x.max(axis=0)
    if constant.any():
        lgr.debug("%d constant feature(s) in training data", int(constant.sum()))
    return ScalerParams(method, a, b)


def apply_scaler(params, dataset):
    a, b = params.per_feature_a, params.per_feature_b
    if a.size != dataset.n_features:
        raise DataError(
            f"scaler fitted on {a.size} features, dataset has {dataset.n_features}",
            module="dataset_io",
        )
    x = dataset.x
    if params.method is ScalerMethod.STANDARDIZE:
        scaled = (x - a) / b
    else:
        span = b - a
        degenerate = span == 0
        scaled = (x - a) / np.where(degenerate, 1.0, span)
        scaled[:, degenerate] = 0.0
    return dataset.with_x(scaled)


def undersample(train, seed):
    """Randomly downsample the majority class to the minority count"""
    idx_benign = np.flatnonzero(train.y == 0)
    idx_malicious = np.flatnonzero(train.y == 1)
    if not idx_benign.size or not idx_malicious.size:
        raise DataError(
            "undersampling needs both classes in the training data",
            module="dataset_io",
        )
    if idx_benign.size == idx_malicious.size:
        return train
    if idx_benign.size > idx_malicious.size:
        majority, minority = idx_benign, idx_malicious
    else:
        majority, minority = idx_malicious, idx_benign
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority, size=minority.size, replace=False)
    rows = np.sort(np.concatenate([kept, minority]))
    lgr.debug(
        "Undersampled %d majority rows to %d", majority.size, minority.size
    )
    return train.take(rows)
