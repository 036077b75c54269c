"""Run configuration and shipped resources"""

__docformat__ = "restructuredtext"

from dataclasses import (
    dataclass,
    field,
)
from importlib import resources
from pathlib import Path

from .attacks import (
    AttackKind,
    PerturbationLevel,
)
from .dataset_io import ScalerMethod
from .defense import (
    MaskPhase,
    NeutralStrategy,
)
from .exceptions import UsageError
from .metadata import ThresholdConfig
from .models import (
    ModelKind,
    TrainingConfig,
)

BUILTIN_PREFIX = "builtin:"
BUILTIN_DATASETS = ("unsw-nb15", "cse-cic-ids2018")
RESOURCE_KINDS = ("catalog", "fixture", "morphs")
ATTACK_FEATURE_RULES = ("high", "high-medium", "all")


def resolve_resource(value, kind):
    """Path of a user file or of a shipped ``builtin:<dataset>`` resource

    Examples
    --------
    >>> resolve_resource("builtin:unsw-nb15", "catalog").name
    'catalog.json'
    """
    if kind not in RESOURCE_KINDS:
        raise ValueError(f"unknown resource kind {kind!r}")
    value = str(value)
    if not value.startswith(BUILTIN_PREFIX):
        return Path(value)
    name = value[len(BUILTIN_PREFIX):]
    if name not in BUILTIN_DATASETS:
        raise UsageError(
            f"unknown builtin {name!r}, expected one of {', '.join(BUILTIN_DATASETS)}"
        )
    return Path(
        str(resources.files("datalad_perturb") / "resources" / name / f"{kind}.json")
    )


@dataclass(frozen=True)
class Seeds:
    split: int = 0
    undersample: int = 1
    train: int = 2
    attack: int = 3

    def to_dict(self):
        return {
            "split": self.split,
            "undersample": self.undersample,
            "train": self.train,
            "attack": self.attack,
        }


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run depends on

    All randomness is driven by `Seeds`; two runs with equal configs write
    equal files.
    """

    dataset: str = None
    catalog: str = None
    fixture: str = None
    morph_map: str = None
    label_column: str = "label"
    benign_label: str = None
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    scaler: ScalerMethod = ScalerMethod.STANDARDIZE
    test_fraction: float = 0.2
    undersample: bool = True
    seeds: Seeds = field(default_factory=Seeds)
    model: ModelKind = ModelKind.LOGREG
    training: TrainingConfig = field(default_factory=TrainingConfig)
    defenses: tuple = ("a-green", "b-high")
    phase: MaskPhase = None
    neutral: str = None
    attack: AttackKind = AttackKind.GRADSIGN
    attack_features: str = "high"
    level: PerturbationLevel = PerturbationLevel.CONSTRAINED
    epsilon: float = 1.0
    budget: int = 50
    magnitude: float = 1.0

    def __post_init__(self):
        for name, cast in (
            ("scaler", ScalerMethod),
            ("model", ModelKind),
            ("attack", AttackKind),
            ("level", PerturbationLevel),
        ):
            try:
                object.__setattr__(self, name, cast(getattr(self, name)))
            except ValueError:
                raise UsageError(f"invalid {name}: {getattr(self, name)!r}") from None
        if self.phase is not None:
            object.__setattr__(self, "phase", MaskPhase(self.phase))
        object.__setattr__(self, "defenses", tuple(self.defenses))
        if self.attack_features not in ATTACK_FEATURE_RULES:
            raise UsageError(
                f"invalid attack feature rule {self.attack_features!r}, expected one "
                f"of {', '.join(ATTACK_FEATURE_RULES)}"
            )
        if not 0 < self.test_fraction < 1:
            raise UsageError(f"test fraction must lie in (0, 1), got {self.test_fraction}")
        if self.epsilon < 0:
            raise UsageError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.budget < 1:
            raise UsageError(f"budget must be >= 1, got {self.budget}")
        # fail early on malformed strategies
        self.neutral_strategy()

    def neutral_strategy(self):
        """Configured neutral values, or the scaler's natural center"""
        if self.neutral is not None:
            return NeutralStrategy.parse(self.neutral)
        if self.scaler is ScalerMethod.MINMAX:
            return NeutralStrategy("const", 0.5)
        return NeutralStrategy("const", 0.0)

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "catalog": self.catalog,
            "fixture": self.fixture,
            "morph_map": self.morph_map,
            "label_column": self.label_column,
            "benign_label": self.benign_label,
            "thresholds": self.thresholds.to_dict(),
            "scaler": self.scaler.value,
            "test_fraction": self.test_fraction,
            "undersample": self.undersample,
            "seeds": self.seeds.to_dict(),
            "model": self.model.value,
            "training": self.training.to_dict(),
            "defenses": list(self.defenses),
            "phase": None if self.phase is None else self.phase.value,
            "neutral": str(self.neutral_strategy()),
            "attack": self.attack.value,
            "attack_features": self.attack_features,
            "level": int(self.level),
            "epsilon": self.epsilon,
            "budget": self.budget,
            "magnitude": self.magnitude,
        }
