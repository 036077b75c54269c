"""Per-feature annotation catalog and PS thresholds"""

__docformat__ = "restructuredtext"

import json
import logging
from dataclasses import (
    asdict,
    dataclass,
    field,
)
from enum import Enum
from pathlib import Path

import numpy as np

from .exceptions import (
    CatalogError,
    DataError,
    UsageError,
)

lgr = logging.getLogger("datalad.perturb.metadata")

REQUIRED_KEYS = (
    "name",
    "is_protocol_id",
    "is_critical_identifier",
    "is_functional_integrity",
    "direction",
    "is_flow_wide_aggregate",
)
OPTIONAL_KEYS = ("declared_cardinality",)


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    INTERFLOW = "interflow"
    BIDIRECTIONAL = "bidirectional"
    NONE = "none"

    @property
    def attacker_inaccessible(self):
        """Backward and interflow statistics are out of the attacker's reach"""
        return self in (Direction.BACKWARD, Direction.INTERFLOW)


@dataclass(frozen=True)
class FeatureMetadata:
    """Human supplied annotations for a single flow feature."""

    name: str
    is_protocol_id: bool = False
    is_critical_identifier: bool = False
    is_functional_integrity: bool = False
    direction: Direction = Direction.NONE
    is_flow_wide_aggregate: bool = False
    declared_cardinality: int | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise CatalogError("feature name must be a nonempty string")
        if not isinstance(self.direction, Direction):
            try:
                object.__setattr__(self, "direction", Direction(self.direction))
            except ValueError:
                raise CatalogError(
                    f"feature {self.name!r}: unknown direction {self.direction!r}, "
                    f"expected one of {[d.value for d in Direction]}"
                ) from None
        if self.declared_cardinality is not None and (
            isinstance(self.declared_cardinality, bool)
            or not isinstance(self.declared_cardinality, int)
            or self.declared_cardinality < 1
        ):
            raise CatalogError(
                f"feature {self.name!r}: declared_cardinality must be an "
                f"integer >= 1, got {self.declared_cardinality!r}"
            )

    @property
    def is_pinned(self):
        """True if any of the C1-C3 conditions applies"""
        return (
            self.is_protocol_id
            or self.is_critical_identifier
            or self.is_functional_integrity
        )

    def to_dict(self):
        rec = asdict(self)
        rec["direction"] = self.direction.value
        if self.declared_cardinality is None:
            del rec["declared_cardinality"]
        return rec

    @classmethod
    def from_dict(cls, rec, index=None):
        where = f"entry {index}" if index is not None else "entry"
        if not isinstance(rec, dict):
            raise CatalogError(f"{where}: expected an object, got {type(rec).__name__}")
        if "name" in rec:
            where = f"{where} ({rec['name']!r})"
        unknown = sorted(set(rec) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
        if unknown:
            raise CatalogError(f"{where}: unknown key(s) {', '.join(unknown)}")
        missing = [k for k in REQUIRED_KEYS if k not in rec]
        if missing:
            raise CatalogError(f"{where}: missing required key(s) {', '.join(missing)}")
        for flag in REQUIRED_KEYS[1:4] + ("is_flow_wide_aggregate",):
            if not isinstance(rec[flag], bool):
                raise CatalogError(f"{where}: {flag} must be true or false")
        return cls(
            name=rec["name"],
            is_protocol_id=rec["is_protocol_id"],
            is_critical_identifier=rec["is_critical_identifier"],
            is_functional_integrity=rec["is_functional_integrity"],
            direction=rec["direction"],
            is_flow_wide_aggregate=rec["is_flow_wide_aggregate"],
            declared_cardinality=rec.get("declared_cardinality"),
        )


@dataclass(frozen=True)
class MetadataCatalog:
    """Ordered, name-unique collection of feature annotations."""

    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            if e.name in seen:
                raise CatalogError(f"duplicate feature name {e.name!r} in catalog")
            seen.add(e.name)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, name):
        return any(e.name == name for e in self.entries)

    @property
    def names(self):
        return [e.name for e in self.entries]

    def get(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def align(self, feature_names):
        """Return catalog entries in the order of ``feature_names``

        Raises
        ------
        DataError
            If any feature has no annotation.
        """
        by_name = {e.name: e for e in self.entries}
        missing = [n for n in feature_names if n not in by_name]
        if missing:
            raise DataError(
                f"{len(missing)} feature(s) without annotation: {', '.join(missing)}",
                module="metadata",
            )
        return [by_name[n] for n in feature_names]

    def to_list(self):
        return [e.to_dict() for e in self.entries]


@dataclass(frozen=True)
class ThresholdConfig:
    """Operator-set thresholds for scoring and masking."""

    min_r: int = 2
    max_r: int = 255
    tau: float = 0.87
    corr_threshold: float = 0.80
    hist_bin_width: float = 0.05

    def __post_init__(self):
        if not 1 <= self.min_r < self.max_r:
            raise UsageError(
                f"cardinality bounds must satisfy 1 <= min_r < max_r, "
                f"got min_r={self.min_r}, max_r={self.max_r}"
            )
        if not 0 < self.tau <= 1:
            raise UsageError(f"tau must lie in (0, 1], got {self.tau}")
        if not 0 < self.corr_threshold < 1:
            raise UsageError(
                f"corr_threshold must lie in (0, 1), got {self.corr_threshold}"
            )
        if not 0 < self.hist_bin_width <= 1:
            raise UsageError(
                f"histogram bin width must lie in (0, 1], got {self.hist_bin_width}"
            )

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    feature: str
    message: str = field(compare=False)

    def to_dict(self):
        return asdict(self)


def load_catalog(path):
    """Load a feature annotation catalog from a JSON file

    Parameters
    ----------
    path : str or Path
        JSON document holding a top-level array of annotation objects.

    Returns
    -------
    MetadataCatalog

    Raises
    ------
    CatalogError
        On syntax errors (with line and column), schema violations
        (unknown or missing keys) and duplicate names.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CatalogError(f"cannot read catalog {path}: {e}", module="metadata") from e
    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise CatalogError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}", module="metadata"
        ) from e
    if not isinstance(records, list):
        raise CatalogError(f"{path}: top level must be an array", module="metadata")
    catalog = MetadataCatalog(
        FeatureMetadata.from_dict(rec, index=i) for i, rec in enumerate(records)
    )
    lgr.debug("Loaded %d feature annotations from %s", len(catalog), path)
    return catalog


def dump_catalog(catalog, path):
    Path(path).write_text(
        json.dumps(catalog.to_list(), indent=2) + "\n", encoding="utf-8"
    )


def validate_catalog(catalog, feature_names):
    """Compare a catalog against dataset columns and sanity check its flags

    Returns
    -------
    list of ValidationIssue
        Empty if, and only if, both name sets coincide and no entry is
        self-contradictory.
    """
    issues = []
    annotated = set(catalog.names)
    columns = set(feature_names)
    for name in feature_names:
        if name not in annotated:
            issues.append(
                ValidationIssue("unannotated", name, f"column {name!r} has no annotation")
            )
    for name in catalog.names:
        if name not in columns:
            issues.append(
                ValidationIssue("no-column", name, f"annotation {name!r} has no column")
            )
    for e in catalog:
        issues.extend(_contradictions(e))
    return issues


def _contradictions(meta):
    found = []
    if meta.is_critical_identifier and meta.direction.attacker_inaccessible:
        # addresses and ports are endpoint fields, not response statistics
        found.append(
            ValidationIssue(
                "contradiction",
                meta.name,
                f"{meta.name!r} is a critical identifier but annotated "
                f"{meta.direction.value}",
            )
        )
    if meta.is_flow_wide_aggregate and meta.is_pinned:
        found.append(
            ValidationIssue(
                "contradiction",
                meta.name,
                f"{meta.name!r} is a flow-wide aggregate but also flagged as a "
                "protocol, identifier or integrity field",
            )
        )
    if meta.is_flow_wide_aggregate and meta.direction is Direction.NONE:
        found.append(
            ValidationIssue(
                "contradiction",
                meta.name,
                f"{meta.name!r} aggregates over packets but has no direction",
            )
        )
    return found


def effective_cardinality(column, declared=None):
    """Number of possible values (PV) of a feature

    Parameters
    ----------
    column : array-like
        Training split values of the feature.
    declared : int, optional
        Domain cardinality; takes precedence over the data when given.

    Examples
    --------
    >>> effective_cardinality([0, 1, 0, 1, 1])
    2
    >>> effective_cardinality([1, 2, 3], declared=300)
    300
    """
    column = np.asarray(column)
    if column.size == 0:
        raise DataError("cannot determine cardinality of an empty column")
    if declared is not None:
        return int(declared)
    return int(np.unique(column).size)
