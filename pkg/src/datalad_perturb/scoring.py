"""Perturb-ability Score (PS) fields, totals and classes"""

__docformat__ = "restructuredtext"

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .exceptions import (
    DataError,
    InvariantError,
)
from .metadata import (
    FeatureMetadata,
    ThresholdConfig,
)

lgr = logging.getLogger("datalad.perturb.scoring")

# totals at or below this are Low
ZERO_TOLERANCE = 1e-12


class PsClass(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @property
    def color(self):
        return {"Low": "green", "Medium": "yellow", "High": "red"}[self.value]


def ps1(meta):
    """0 for protocol, critical identifier and functional integrity fields"""
    return 0.0 if meta.is_pinned else 1.0


def ps2(pv, min_r=2, max_r=255):
    """Cardinality field: binary-like features score low, wide ranges high

    Examples
    --------
    >>> ps2(2), ps2(255), ps2(1)
    (0.5, 1.0, 0.0)
    """
    if pv < 1:
        raise DataError(f"cardinality must be >= 1, got {pv}", module="scoring")
    if pv > max_r:
        return 1.0
    if pv < min_r:
        return 0.0
    return 0.5 + 0.5 * (pv - min_r) / (max_r - min_r)


def ps3(cf):
    if cf < 0:
        raise DataError(f"correlation count must be >= 0, got {cf}", module="scoring")
    return 0.5 + 0.5 / 2**cf


def ps4(meta, forward_corr_count):
    """Direction field

    Backward and interflow features are only reachable through correlated
    forward features: one such feature keeps the full score, several halve
    it, none zero it.
    """
    if forward_corr_count < 0:
        raise DataError(
            f"forward correlation count must be >= 0, got {forward_corr_count}",
            module="scoring",
        )
    if not meta.direction.attacker_inaccessible:
        return 1.0
    if forward_corr_count == 1:
        return 1.0
    if forward_corr_count >= 2:
        return 0.5
    return 0.0


def ps5(meta):
    return 0.5 if meta.is_flow_wide_aggregate else 1.0


def ps_total(*fields):
    """Geometric mean of the five PS fields, exactly 0 if any field is 0"""
    if len(fields) != 5:
        raise InvariantError(f"expected 5 PS fields, got {len(fields)}")
    for v in fields:
        if not 0.0 <= v <= 1.0:
            raise InvariantError(f"PS field {v!r} outside [0, 1]", module="scoring")
    if any(v == 0.0 for v in fields):
        return 0.0
    return math.prod(fields) ** (1.0 / 5.0)


def classify(total, tau=0.87):
    if not 0.0 <= total <= 1.0:
        raise InvariantError(f"PS total {total!r} outside [0, 1]", module="scoring")
    if total <= ZERO_TOLERANCE:
        return PsClass.LOW
    if total >= tau:
        return PsClass.HIGH
    return PsClass.MEDIUM


@dataclass(frozen=True)
class PsInputs:
    meta: FeatureMetadata
    pv: int
    cf: int
    forward_corr_count: int


@dataclass(frozen=True)
class PsBreakdown:
    feature: str
    ps1: float
    ps2: float
    ps3: float
    ps4: float
    ps5: float
    ps_total: float
    class_label: PsClass
    inputs: dict

    @property
    def fields(self):
        return (self.ps1, self.ps2, self.ps3, self.ps4, self.ps5)

    def to_dict(self):
        return {
            "name": self.feature,
            "ps1": self.ps1,
            "ps2": self.ps2,
            "ps3": self.ps3,
            "ps4": self.ps4,
            "ps5": self.ps5,
            "ps_total": self.ps_total,
            "class": self.class_label.value,
            "inputs": dict(self.inputs),
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(
            feature=rec["name"],
            ps1=rec["ps1"],
            ps2=rec["ps2"],
            ps3=rec["ps3"],
            ps4=rec["ps4"],
            ps5=rec["ps5"],
            ps_total=rec["ps_total"],
            class_label=PsClass(rec["class"]),
            inputs=rec["inputs"],
        )


@dataclass(frozen=True)
class ScoreReport:
    breakdowns: tuple
    thresholds: ThresholdConfig
    histogram: tuple

    @property
    def feature_names(self):
        return [b.feature for b in self.breakdowns]

    @property
    def classes(self):
        return [b.class_label for b in self.breakdowns]

    def class_counts(self):
        counts = {c: 0 for c in PsClass}
        for b in self.breakdowns:
            counts[b.class_label] += 1
        return counts

    def features_in(self, *classes):
        return [b.feature for b in self.breakdowns if b.class_label in classes]

    def to_dict(self):
        return {
            "features": [b.to_dict() for b in self.breakdowns],
            "class_counts": {c.value: n for c, n in self.class_counts().items()},
            "thresholds": self.thresholds.to_dict(),
            "histogram": [{"lower": lo, "count": n} for lo, n in self.histogram],
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(
            breakdowns=tuple(PsBreakdown.from_dict(b) for b in rec["features"]),
            thresholds=ThresholdConfig(**rec["thresholds"]),
            histogram=tuple((h["lower"], h["count"]) for h in rec["histogram"]),
        )


def histogram(totals, bin_width=0.05):
    """Count PS totals per fixed-width bin over [0, 1]

    Bins are half-open except the last, which is closed so that 1.0 is
    counted.
    """
    n_bins = int(round(1.0 / bin_width))
    # rounded so that a total of exactly 0.85 falls into the 0.85 bin
    edges = np.round(np.linspace(0.0, 1.0, n_bins + 1), 10)
    counts, _ = np.histogram(np.asarray(totals, dtype=np.float64), bins=edges)
    return tuple((float(edges[k]), int(c)) for k, c in enumerate(counts))


def score_feature(inputs, config):
    meta = inputs.meta
    fields = (
        ps1(meta),
        ps2(inputs.pv, config.min_r, config.max_r),
        ps3(inputs.cf),
        ps4(meta, inputs.forward_corr_count),
        ps5(meta),
    )
    total = ps_total(*fields)
    if fields[1] == 0.0 and not meta.is_pinned:
        lgr.warning(
            "Feature %r has a single possible value (PS2 = 0); consider dropping it",
            meta.name,
        )
    return PsBreakdown(
        meta.name,
        *fields,
        ps_total=total,
        class_label=classify(total, config.tau),
        inputs={
            "pv": int(inputs.pv),
            "cf": int(inputs.cf),
            "forward_corr_count": int(inputs.forward_corr_count),
            "flags": meta.to_dict(),
        },
    )


def score_all(inputs, config=None):
    """Score every feature

    Parameters
    ----------
    inputs : sequence of PsInputs
        One entry per feature, in dataset column order.
    config : ThresholdConfig, optional

    Returns
    -------
    ScoreReport
    """
    config = config or ThresholdConfig()
    names = [i.meta.name for i in inputs]
    if len(set(names)) != len(names):
        raise DataError("score inputs are not aligned: duplicate feature names")
    breakdowns = tuple(score_feature(i, config) for i in inputs)
    report = ScoreReport(
        breakdowns,
        config,
        histogram([b.ps_total for b in breakdowns], config.hist_bin_width),
    )
    counts = report.class_counts()
    lgr.info(
        "Scored %d features: %d Low, %d Medium, %d High",
        len(breakdowns),
        counts[PsClass.LOW],
        counts[PsClass.MEDIUM],
        counts[PsClass.HIGH],
    )
    return report


def load_fixture(path, catalog):
    """Pinned PS inputs for a catalog

    The fixture is a JSON array of ``{"name", "pv", "cf",
    "forward_corr_count"}`` objects; entries are matched to the catalog by
    name and returned in fixture order.
    """
    path = Path(path)
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read fixture {path}: {e}", module="scoring") from e
    except json.JSONDecodeError as e:
        raise DataError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}", module="scoring"
        ) from e
    names = [r.get("name") for r in records]
    metas = catalog.align(names)
    out = []
    for meta, rec in zip(metas, records):
        try:
            out.append(
                PsInputs(
                    meta, int(rec["pv"]), int(rec["cf"]), int(rec["forward_corr_count"])
                )
            )
        except KeyError as e:
            raise DataError(
                f"fixture entry {meta.name!r} lacks {e.args[0]!r}", module="scoring"
            ) from e
        if out[-1].forward_corr_count > out[-1].cf:
            raise DataError(
                f"fixture entry {meta.name!r}: forward_corr_count exceeds cf",
                module="scoring",
            )
    return out
