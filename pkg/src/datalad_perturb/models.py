"""Minimal differentiable classifiers: logistic regression and a one-hidden-layer MLP"""

__docformat__ = "restructuredtext"

import logging
from dataclasses import (
    asdict,
    dataclass,
    field,
)
from enum import Enum

import numpy as np

from .exceptions import (
    DataError,
    InvariantError,
    UsageError,
)

lgr = logging.getLogger("datalad.perturb.models")

# keeps returned scores strictly inside (0, 1)
SCORE_EPS = 1e-15


class ModelKind(str, Enum):
    LOGREG = "logreg"
    MLP = "mlp"


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 64
    hidden_width: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise UsageError(f"learning rate must be > 0, got {self.learning_rate}")
        for name in ("epochs", "batch_size", "hidden_width"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1, got {getattr(self, name)}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_confusion(cls, tp, fp, tn, fn):
        n = tp + fp + tn + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
        return cls((tp + tn) / n, precision, recall, f1, tp, fp, tn, fn)

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
        }


def _sigmoid(z):
    # numerically stable for large |z|
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def _bce(z, y):
    """Mean binary cross-entropy computed from logits"""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


@dataclass(eq=False)
class Model:
    """A trained classifier

    ``params`` holds ``w``/``b`` for logistic regression and
    ``W1``/``b1``/``W2``/``b2`` for the MLP.
    """

    kind: ModelKind
    input_dim: int
    params: dict
    config: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in self.params.items()}
        expected = {
            ModelKind.LOGREG: {"w": (self.input_dim,), "b": ()},
            ModelKind.MLP: {
                "W1": (self.input_dim, self.config.hidden_width),
                "b1": (self.config.hidden_width,),
                "W2": (self.config.hidden_width,),
                "b2": (),
            },
        }[self.kind]
        if set(self.params) != set(expected):
            raise DataError(
                f"{self.kind.value} model needs parameters {sorted(expected)}, "
                f"got {sorted(self.params)}"
            )
        for k, shape in expected.items():
            if self.params[k].shape != shape:
                raise DataError(
                    f"parameter {k} has shape {self.params[k].shape}, expected {shape}"
                )
            if not np.all(np.isfinite(self.params[k])):
                raise InvariantError(f"parameter {k} is not finite", module="models")

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DataError(
                f"model expects {self.input_dim} input columns, got shape {x.shape}",
                module="models",
            )
        return x

    def _forward(self, x):
        p = self.params
        if self.kind is ModelKind.LOGREG:
            return x @ p["w"] + p["b"], None
        z1 = x @ p["W1"] + p["b1"]
        return np.maximum(z1, 0.0) @ p["W2"] + p["b2"], z1

    def logits(self, x):
        return self._forward(self._check(x))[0]

    def scores(self, x):
        return np.clip(_sigmoid(self.logits(x)), SCORE_EPS, 1.0 - SCORE_EPS)

    def loss(self, x, y):
        return _bce(self.logits(x), np.asarray(y, dtype=np.float64))

    def _gradients(self, x, y):
        """Parameter and input gradients of the mean loss"""
        z, z1 = self._forward(x)
        dz = (_sigmoid(z) - y) / x.shape[0]
        p = self.params
        if self.kind is ModelKind.LOGREG:
            return {"w": x.T @ dz, "b": dz.sum()}, np.outer(dz, p["w"])
        a1 = np.maximum(z1, 0.0)
        dz1 = np.outer(dz, p["W2"]) * (z1 > 0)
        grads = {
            "W2": a1.T @ dz,
            "b2": dz.sum(),
            "W1": x.T @ dz1,
            "b1": dz1.sum(axis=0),
        }
        return grads, dz1 @ p["W1"].T

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "input_dim": self.input_dim,
            "training_config": self.config.to_dict(),
            "seed": self.seed,
            "params": {
                k: {"shape": list(v.shape), "values": v.ravel().tolist()}
                for k, v in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, rec):
        params = {
            k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"])
            for k, v in rec["params"].items()
        }
        return cls(
            rec["kind"],
            int(rec["input_dim"]),
            params,
            TrainingConfig(**rec["training_config"]),
            seed=int(rec.get("seed", 0)),
        )


def _init_params(kind, input_dim, config, rng):
    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    if kind is ModelKind.LOGREG:
        return {"w": uniform(input_dim, (input_dim,)), "b": np.zeros(())}
    h = config.hidden_width
    return {
        "W1": uniform(input_dim, (input_dim, h)),
        "b1": np.zeros(h),
        "W2": uniform(h, (h,)),
        "b2": np.zeros(()),
    }


def train(kind, train, config=None, seed=0):
    """Fit a model with mini-batch gradient descent on cross-entropy

    Parameters
    ----------
    kind : ModelKind or str
    train : Dataset
    config : TrainingConfig, optional
    seed : int
        Drives weight initialization and the per-epoch batch order.

    Returns
    -------
    Model
        With ``history`` holding the full training loss after each epoch.
    """
    kind = ModelKind(kind)
    config = config or TrainingConfig()
    if not train.n_rows:
        raise DataError("cannot train on an empty dataset", module="models")
    if not np.isin(train.y, (0, 1)).all():
        raise DataError("training labels must be binary", module="models")
    rng = np.random.default_rng(seed)
    x = train.x
    y = train.y.astype(np.float64)
    model = Model(
        kind, train.n_features, _init_params(kind, train.n_features, config, rng),
        config, seed,
    )
    lgr.debug(
        "Training %s on %d x %d (seed %d, %s)",
        kind.value,
        *x.shape,
        seed,
        config,
    )
    for epoch in range(config.epochs):
        order = rng.permutation(train.n_rows)
        for start in range(0, train.n_rows, config.batch_size):
            batch = order[start:start + config.batch_size]
            grads, _ = model._gradients(x[batch], y[batch])
            for k, g in grads.items():
                model.params[k] = model.params[k] - config.learning_rate * g
        loss = model.loss(x, y)
        if not np.isfinite(loss):
            raise InvariantError(
                f"training diverged in epoch {epoch} (loss {loss})", module="models"
            )
        model.history.append(loss)
    lgr.debug("Final training loss %.6f", model.history[-1] if model.history else np.nan)
    return model


def predict(model, x):
    """Labels (score >= 0.5) and sigmoid scores"""
    scores = model.scores(x)
    return (scores >= 0.5).astype(np.int64), scores


def input_gradient(model, x, target):
    """Gradient of the cross-entropy loss at (x, target) w.r.t. the input row"""
    row = model._check(np.atleast_2d(x))
    if row.shape[0] != 1:
        raise DataError("input_gradient expects a single row", module="models")
    _, dx = model._gradients(row, np.array([float(target)]))
    return dx[0]


def input_gradients(model, x, y):
    """Row-wise input gradients for a whole matrix"""
    x = model._check(x)
    _, dx = model._gradients(x, np.asarray(y, dtype=np.float64))
    # _gradients averages over rows
    return dx * x.shape[0]


def evaluate(model, test):
    if not test.n_rows:
        raise DataError("cannot evaluate on an empty test set", module="models")
    labels, _ = predict(model, test.x)
    return metrics_from_labels(test.y, labels)


def metrics_from_labels(y, labels):
    y = np.asarray(y)
    labels = np.asarray(labels)
    return Metrics.from_confusion(
        tp=int(np.sum((labels == 1) & (y == 1))),
        fp=int(np.sum((labels == 1) & (y == 0))),
        tn=int(np.sum((labels == 0) & (y == 0))),
        fn=int(np.sum((labels == 0) & (y == 1))),
    )
