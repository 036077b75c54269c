"""PS-guided feature selection and feature masking defenses"""

__docformat__ = "restructuredtext"

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import (
    DataError,
    UsageError,
)
from .scoring import PsClass

lgr = logging.getLogger("datalad.perturb.defense")


class SelectionPolicy(str, Enum):
    GREEN_ONLY = "green-only"
    GREEN_YELLOW = "green-yellow"

    @property
    def kept_classes(self):
        if self is SelectionPolicy.GREEN_ONLY:
            return (PsClass.LOW,)
        return (PsClass.LOW, PsClass.MEDIUM)


class MaskScope(str, Enum):
    HIGH_ONLY = "high"
    HIGH_AND_MEDIUM = "high-medium"

    @property
    def masked_classes(self):
        if self is MaskScope.HIGH_ONLY:
            return (PsClass.HIGH,)
        return (PsClass.HIGH, PsClass.MEDIUM)


class MaskPhase(str, Enum):
    TRAIN_AND_INFERENCE = "train-inference"
    INFERENCE_ONLY = "inference-only"


@dataclass(frozen=True)
class NeutralStrategy:
    """How masked positions are filled: train mean, train median or a constant"""

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("mean", "median", "const"):
            raise UsageError(f"unknown neutral value strategy {self.kind!r}")
        if (self.kind == "const") != (self.value is not None):
            raise UsageError("a constant neutral value needs exactly one value")
        if self.value is not None and not np.isfinite(self.value):
            raise UsageError(f"neutral constant must be finite, got {self.value}")

    @classmethod
    def parse(cls, spec):
        """Parse ``mean``, ``median`` or ``const:<v>``

        Examples
        --------
        >>> NeutralStrategy.parse("const:0.5")
        NeutralStrategy(kind='const', value=0.5)
        """
        if isinstance(spec, cls):
            return spec
        kind, sep, value = str(spec).partition(":")
        if kind == "const":
            try:
                return cls("const", float(value))
            except ValueError:
                raise UsageError(
                    f"invalid neutral constant {value!r}, expected const:<number>"
                ) from None
        if sep:
            raise UsageError(f"neutral strategy {kind!r} takes no value")
        return cls(kind)

    def __str__(self):
        return f"const:{self.value:g}" if self.kind == "const" else self.kind


@dataclass(frozen=True)
class SelectionPlan:
    """Option A: keep a subset of the columns"""

    policy: SelectionPolicy
    feature_names: tuple
    keep_indices: tuple
    dropped: tuple

    @property
    def keep_names(self):
        return [self.feature_names[i] for i in self.keep_indices]

    @property
    def dropped_indices(self):
        keep = set(self.keep_indices)
        return tuple(i for i in range(len(self.feature_names)) if i not in keep)

    def to_dict(self):
        return {
            "policy": self.policy.value,
            "features": list(self.feature_names),
            "keep": self.keep_names,
            "dropped": [{"name": n, "class": c.value} for n, c in self.dropped],
        }

    @classmethod
    def from_dict(cls, rec, feature_names=None):
        names = tuple(rec["features"] if feature_names is None else feature_names)
        unknown = [n for n in rec["keep"] if n not in names]
        if unknown:
            raise DataError(f"selection plan keeps unknown features: {unknown}")
        return cls(
            SelectionPolicy(rec["policy"]),
            names,
            tuple(names.index(n) for n in rec["keep"]),
            tuple((d["name"], PsClass(d["class"])) for d in rec["dropped"]),
        )


@dataclass(frozen=True, eq=False)
class MaskPlan:
    """Option B: replace masked columns by neutral values"""

    scope: MaskScope
    phase: MaskPhase
    strategy: NeutralStrategy
    feature_names: tuple
    mask: np.ndarray
    neutral: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=np.int8)
        neutral = np.array(self.neutral, dtype=np.float64)
        if mask.shape != neutral.shape or mask.size != len(self.feature_names):
            raise DataError("mask and neutral vectors must match the feature count")
        if not np.all(np.isfinite(neutral)):
            raise DataError("neutral values must be finite")
        mask.setflags(write=False)
        neutral.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "neutral", neutral)

    @property
    def masked_indices(self):
        return tuple(int(i) for i in np.flatnonzero(self.mask == 0))

    def apply(self, x):
        return apply_mask(self.mask, self.neutral, x)

    def to_dict(self):
        return {
            "scope": self.scope.value,
            "phase": self.phase.value,
            "strategy": str(self.strategy),
            "features": list(self.feature_names),
            "mask": self.mask.tolist(),
            "neutral": self.neutral.tolist(),
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(
            MaskScope(rec["scope"]),
            MaskPhase(rec["phase"]),
            NeutralStrategy.parse(rec["strategy"]),
            tuple(rec["features"]),
            rec["mask"],
            rec["neutral"],
        )


def selection_plan(report, policy):
    """Option A keep-set for a score report

    Raises
    ------
    DataError
        If no feature survives the policy.
    """
    policy = SelectionPolicy(policy)
    if not report.breakdowns:
        raise DataError("cannot plan a selection from an empty score report")
    keep = tuple(
        i
        for i, b in enumerate(report.breakdowns)
        if b.class_label in policy.kept_classes
    )
    if not keep:
        raise DataError(
            f"selection policy {policy.value} keeps no feature", module="defense"
        )
    dropped = tuple(
        (b.feature, b.class_label)
        for b in report.breakdowns
        if b.class_label not in policy.kept_classes
    )
    lgr.debug("%s keeps %d of %d features", policy.value, len(keep), len(report.breakdowns))
    return SelectionPlan(policy, tuple(report.feature_names), keep, dropped)


def mask_vector(report, scope):
    """m_i = 0 for features whose class falls under the masking scope"""
    scope = MaskScope(scope)
    return np.array(
        [0 if c in scope.masked_classes else 1 for c in report.classes], dtype=np.int8
    )


def neutral_values(train, strategy, n_features=None):
    """Per-feature replacement values computed on the (scaled) training split

    Constant strategies need no data; ``n_features`` then gives the length
    when ``train`` is None.
    """
    strategy = NeutralStrategy.parse(strategy)
    if strategy.kind == "const" and train is None:
        return np.full(n_features, strategy.value, dtype=np.float64)
    if train is None or not train.n_rows:
        raise DataError(
            f"{strategy.kind} neutral values need a non-empty training split",
            module="defense",
        )
    if strategy.kind == "mean":
        return train.x.mean(axis=0)
    if strategy.kind == "median":
        # lower-middle element for even counts
        return np.sort(train.x, axis=0)[(train.n_rows - 1) // 2]
    return np.full(train.n_features, strategy.value, dtype=np.float64)


def apply_mask(mask, neutral, x):
    mask = np.asarray(mask)
    neutral = np.asarray(neutral, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or mask.shape != (x.shape[1],) or neutral.shape != mask.shape:
        raise DataError(
            f"mask of length {mask.size} and {neutral.size} neutral values do not "
            f"fit a matrix of shape {x.shape}",
            module="defense",
        )
    out = x.copy()
    masked = mask == 0
    out[:, masked] = neutral[masked]
    return out


def apply_selection(plan, dataset):
    keep = list(plan.keep_indices)
    if any(i < 0 or i >= dataset.n_features for i in keep):
        raise DataError(
            f"selection plan indices {keep} out of range for "
            f"{dataset.n_features} features",
            module="defense",
        )
    return dataset.with_x(
        dataset.x[:, keep], [dataset.feature_names[i] for i in keep]
    )


def mask_plan(report, train, scope, phase, strategy):
    """Build a complete Option B plan"""
    strategy = NeutralStrategy.parse(strategy)
    mask = mask_vector(report, scope)
    plan = MaskPlan(
        MaskScope(scope),
        MaskPhase(phase),
        strategy,
        tuple(report.feature_names),
        mask,
        neutral_values(train, strategy, mask.size),
    )
    lgr.debug(
        "Masking %d of %d features (%s, %s)",
        len(plan.masked_indices),
        mask.size,
        plan.scope.value,
        plan.phase.value,
    )
    return plan


DEFENSE_CHOICES = ("a-green", "a-green-yellow", "b-high", "b-high-medium")


@dataclass(frozen=True)
class DefenseSpec:
    """One defense configuration of an experiment grid

    ``option`` is ``A`` (selection), ``B1`` (masking at training and
    inference) or ``B2`` (masking at inference only).
    """

    option: str
    policy: SelectionPolicy = None
    scope: MaskScope = None
    strategy: NeutralStrategy = None

    @property
    def phase(self):
        if self.option == "B1":
            return MaskPhase.TRAIN_AND_INFERENCE
        return MaskPhase.INFERENCE_ONLY

    @property
    def name(self):
        if self.option == "A":
            return f"A/{self.policy.value}"
        return f"{self.option}/{self.scope.value}"


def parse_defenses(choices, phase=None, strategy="mean"):
    """Expand command line defense choices into `DefenseSpec` s

    ``b-*`` choices expand into both masking phases unless ``phase`` pins
    one.

    Examples
    --------
    >>> [d.name for d in parse_defenses(["a-green", "b-high"])]
    ['A/green-only', 'B1/high', 'B2/high']
    """
    strategy = NeutralStrategy.parse(strategy)
    phases = (
        (MaskPhase.TRAIN_AND_INFERENCE, MaskPhase.INFERENCE_ONLY)
        if phase is None
        else (MaskPhase(phase),)
    )
    specs = []
    for choice in choices:
        if choice not in DEFENSE_CHOICES:
            raise UsageError(
                f"unknown defense {choice!r}, expected one of {', '.join(DEFENSE_CHOICES)}"
            )
        if choice.startswith("a-"):
            policy = (
                SelectionPolicy.GREEN_ONLY
                if choice == "a-green"
                else SelectionPolicy.GREEN_YELLOW
            )
            specs.append(DefenseSpec("A", policy=policy))
            continue
        scope = MaskScope.HIGH_ONLY if choice == "b-high" else MaskScope.HIGH_AND_MEDIUM
        for p in phases:
            option = "B1" if p is MaskPhase.TRAIN_AND_INFERENCE else "B2"
            specs.append(DefenseSpec(option, scope=scope, strategy=strategy))
    return specs
