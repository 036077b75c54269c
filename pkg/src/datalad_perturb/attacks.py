"""Constrained evasion attacks and revised attack success rate"""

__docformat__ = "restructuredtext"

import json
import logging
from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from pathlib import Path

import numpy as np
from tqdm import tqdm

from .dataset_io import ScalerMethod
from .defense import (
    MaskPhase,
    apply_selection,
    mask_plan,
    selection_plan,
)
from .exceptions import (
    DataError,
    PerturbError,
    UsageError,
)
from .models import (
    input_gradients,
    metrics_from_labels,
    predict,
    train as train_model,
)
from .scoring import PsClass

lgr = logging.getLogger("datalad.perturb.attacks")

# absolute slack when checking snapped values against their bounds
BOUND_TOL = 1e-12


class AttackKind(str, Enum):
    GRADSIGN = "gradsign"
    QUERY = "query"
    MORPH = "morph"


class PerturbationLevel(int, Enum):
    """Constraint levels, from free feature edits to traffic-level morphs"""

    UNCONSTRAINED = 1
    CONSTRAINED = 2
    ACCESSIBLE = 3
    MORPH = 4


class MorphDirection(str, Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    EITHER = "either"


@dataclass(frozen=True, eq=False)
class AttackConstraints:
    """Allowed columns, box, integer grid and L-inf budget in model-input space"""

    allowed: tuple
    lower: np.ndarray
    upper: np.ndarray
    epsilon: float
    integer_snap: np.ndarray = None
    grid_origin: np.ndarray = None
    grid_step: np.ndarray = None

    def __post_init__(self):
        n = len(self.lower)
        object.__setattr__(self, "allowed", tuple(sorted({int(i) for i in self.allowed})))
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise DataError("box bounds must satisfy lower <= upper per feature")
        if any(i < 0 or i >= n for i in self.allowed):
            raise DataError(f"allowed feature indices {self.allowed} out of range [0, {n})")
        if not self.epsilon >= 0:
            raise UsageError(f"epsilon must be >= 0, got {self.epsilon}")
        snap = (
            np.zeros(n, dtype=bool)
            if self.integer_snap is None
            else np.asarray(self.integer_snap, dtype=bool)
        )
        origin = np.zeros(n) if self.grid_origin is None else np.asarray(self.grid_origin, float)
        step = np.ones(n) if self.grid_step is None else np.asarray(self.grid_step, float)
        if np.any(step[snap] <= 0):
            raise DataError("grid steps must be positive for snapped features")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "integer_snap", snap)
        object.__setattr__(self, "grid_origin", origin)
        object.__setattr__(self, "grid_step", step)

    @property
    def n_features(self):
        return self.lower.size

    def with_allowed(self, allowed):
        return AttackConstraints(
            allowed,
            self.lower,
            self.upper,
            self.epsilon,
            self.integer_snap,
            self.grid_origin,
            self.grid_step,
        )

    def project(self, x, candidate):
        """Pull ``candidate`` rows back into the feasible set around ``x``

        Columns outside ``allowed`` and coordinates that were not moved are
        returned bit-identical to ``x``. Moved coordinates are clipped to the
        intersection of the box and the epsilon ball, then snapped to the
        grid (half away from zero); a snap that leaves the feasible interval
        steps one grid point back towards the original value, or reverts.
        """
        x = np.asarray(x, dtype=np.float64)
        out = x.copy()
        if not self.allowed:
            return out
        cols = list(self.allowed)
        xo = x[:, cols]
        c = np.asarray(candidate, dtype=np.float64)[:, cols]
        lo = np.maximum(self.lower[cols], xo - self.epsilon)
        hi = np.minimum(self.upper[cols], xo + self.epsilon)
        infeasible = lo > hi
        c = np.where(infeasible, xo, np.clip(c, lo, np.maximum(lo, hi)))
        snap = self.integer_snap[cols]
        if snap.any():
            origin = self.grid_origin[cols]
            step = self.grid_step[cols]
            k = (c - origin) / step
            snapped = origin + np.sign(k) * np.floor(np.abs(k) + 0.5) * step
            inside = (snapped >= lo - BOUND_TOL) & (snapped <= hi + BOUND_TOL)
            back = snapped - np.sign(snapped - xo) * step
            back_inside = (back >= lo - BOUND_TOL) & (back <= hi + BOUND_TOL)
            snapped = np.where(inside, snapped, np.where(back_inside, back, xo))
            c = np.where(snap[None, :] & (c != xo), snapped, c)
        out[:, cols] = c
        return out


def build_constraints(
    train_x,
    allowed,
    epsilon,
    level=PerturbationLevel.CONSTRAINED,
    scaler=None,
    raw_train_x=None,
    accessible=None,
):
    """Derive attack constraints from the (scaled) training matrix

    Parameters
    ----------
    train_x : ndarray
        Training matrix in model-input space; its per-feature range is the
        box.
    allowed : iterable of int
        Columns the attacker may touch.
    epsilon : float
    level : PerturbationLevel
        ``UNCONSTRAINED`` drops box and grid; ``ACCESSIBLE`` additionally
        restricts ``allowed`` to the ``accessible`` columns.
    scaler : ScalerParams, optional
        Maps the raw integer grid into model-input space.
    raw_train_x : ndarray, optional
        Unscaled training matrix; features with integral values there are
        snapped to their grid.
    accessible : iterable of int, optional
        Columns not out of the attacker's reach (required for level 3).
    """
    level = PerturbationLevel(level)
    train_x = np.asarray(train_x, dtype=np.float64)
    n = train_x.shape[1]
    if level is PerturbationLevel.UNCONSTRAINED:
        return AttackConstraints(
            range(n), np.full(n, -np.inf), np.full(n, np.inf), epsilon
        )
    allowed = set(allowed)
    if level is PerturbationLevel.ACCESSIBLE:
        if accessible is None:
            raise UsageError("level 3 constraints need the attacker-accessible columns")
        allowed &= set(accessible)
    snap = origin = step = None
    if scaler is not None and raw_train_x is not None:
        raw = np.asarray(raw_train_x, dtype=np.float64)
        snap = np.all(raw == np.round(raw), axis=0)
        a, b = scaler.per_feature_a, scaler.per_feature_b
        if scaler.method is ScalerMethod.STANDARDIZE:
            origin, step = -a / b, 1.0 / b
        else:
            span = np.where(b - a == 0, 1.0, b - a)
            origin, step = -a / span, 1.0 / span
            snap &= (b - a) != 0
    return AttackConstraints(
        allowed,
        train_x.min(axis=0),
        train_x.max(axis=0),
        epsilon,
        snap,
        origin,
        step,
    )


@dataclass(frozen=True)
class MorphEntry:
    morph: str
    features: tuple
    direction: MorphDirection

    def to_dict(self):
        return {
            "morph": self.morph,
            "features": list(self.features),
            "direction": self.direction.value,
        }


@dataclass(frozen=True)
class MorphMap:
    """Traffic morphing techniques and the flow features each one moves"""

    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise DataError("morph map is empty")

    def resolve(self, feature_names):
        """Column indices per morph

        Raises
        ------
        DataError
            Naming every feature that has no column.
        """
        position = {n: i for i, n in enumerate(feature_names)}
        missing = sorted(
            {f for e in self.entries for f in e.features if f not in position}
        )
        if missing:
            raise DataError(
                f"morph map features without a column: {', '.join(missing)}",
                module="attacks",
            )
        return [
            (e, np.array([position[f] for f in e.features], dtype=np.int64))
            for e in self.entries
        ]

    def allowed_indices(self, feature_names):
        return sorted({int(i) for _, idx in self.resolve(feature_names) for i in idx})

    def select(self, names):
        """Restrict to the named morphs"""
        if not names:
            return self
        unknown = set(names) - {e.morph for e in self.entries}
        if unknown:
            raise UsageError(f"unknown morph(s): {', '.join(sorted(unknown))}")
        return MorphMap(tuple(e for e in self.entries if e.morph in names))

    def to_list(self):
        return [e.to_dict() for e in self.entries]


def load_morph_map(path):
    path = Path(path)
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read morph map {path}: {e}", module="attacks") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}:{e.colno}: {e.msg}", module="attacks") from e
    if not isinstance(records, list):
        raise DataError(f"{path}: top level must be an array", module="attacks")
    entries = []
    for i, rec in enumerate(records):
        keys = set(rec) if isinstance(rec, dict) else set()
        if keys != {"morph", "features", "direction"}:
            raise DataError(
                f"{path}: morph entry {i} must have exactly the keys "
                "morph, features, direction",
                module="attacks",
            )
        try:
            direction = MorphDirection(rec["direction"])
        except ValueError:
            raise DataError(
                f"{path}: morph {rec['morph']!r} has unknown direction "
                f"{rec['direction']!r}",
                module="attacks",
            ) from None
        entries.append(MorphEntry(rec["morph"], tuple(rec["features"]), direction))
    return MorphMap(tuple(entries))


ALLOWED_RULES = {
    "high": (PsClass.HIGH,),
    "high-medium": (PsClass.HIGH, PsClass.MEDIUM),
    "all": tuple(PsClass),
}


def allowed_from_report(report, rule="high"):
    """Column indices an attacker may touch, by PS class"""
    try:
        classes = ALLOWED_RULES[rule]
    except KeyError:
        raise UsageError(
            f"unknown allowed-set rule {rule!r}, expected one of "
            f"{', '.join(ALLOWED_RULES)}"
        ) from None
    return [i for i, c in enumerate(report.classes) if c in classes]


def _require_allowed(constraints):
    if not constraints.allowed:
        raise UsageError("the attack may not touch any feature (empty allowed set)")


def gradient_sign_attack(model, x, y, constraints):
    """One signed-gradient step of size epsilon on the allowed columns"""
    _require_allowed(constraints)
    x = np.asarray(x, dtype=np.float64)
    grads = input_gradients(model, x, y)
    cols = list(constraints.allowed)
    candidate = x.copy()
    candidate[:, cols] = x[:, cols] + constraints.epsilon * np.sign(grads[:, cols])
    return constraints.project(x, candidate)


def query_attack(oracle, x, y, constraints, budget, seed, progress=False):
    """Black-box coordinate search on a score oracle

    Each row starts from its original values. Coordinates of the allowed
    set are visited in a seeded order; both ends of the epsilon interval
    are probed, the finite-difference slope picks the downhill end, and the
    move is kept if it lowers the true-class probability. Search stops on a
    label flip, after a pass without improvement, or when the next probe
    would exceed ``budget`` oracle queries (one query per evaluated row).

    Parameters
    ----------
    oracle : callable
        Maps a matrix to malicious-class scores in [0, 1].
    x, y : ndarray
    constraints : AttackConstraints
    budget : int
        Maximum number of oracle queries per row.
    seed : int
        Row ``i`` uses seed ``seed + i``.
    progress : bool
        Show a progress bar over rows.
    """
    _require_allowed(constraints)
    if budget < 1:
        raise UsageError(f"query budget must be >= 1, got {budget}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    out = x.copy()
    eps = constraints.epsilon
    n_queries = 0
    for i in tqdm(range(x.shape[0]), desc="query attack", disable=not progress):
        orig = x[i:i + 1]
        cur = orig.copy()
        target = int(y[i])

        def true_prob(m):
            s = np.asarray(oracle(m), dtype=np.float64)
            return s if target == 1 else 1.0 - s

        f = true_prob(cur)[0]
        calls = 1
        order = np.random.default_rng(seed + i).permutation(list(constraints.allowed))
        improved = True
        flipped = False
        while improved and not flipped and calls + 2 <= budget:
            improved = False
            for j in order:
                if calls + 2 > budget:
                    break
                cand = np.repeat(cur, 2, axis=0)
                cand[0, j] = orig[0, j] + eps
                cand[1, j] = orig[0, j] - eps
                cand = constraints.project(np.repeat(orig, 2, axis=0), cand)
                f_up, f_down = true_prob(cand)
                calls += 2
                width = cand[0, j] - cand[1, j]
                slope = (f_up - f_down) / width if width else 0.0
                pick, f_new = (1, f_down) if slope > 0 else (0, f_up)
                if f_new < f:
                    cur, f = cand[pick:pick + 1], f_new
                    improved = True
                    if (target == 1 and f < 0.5) or (target == 0 and f <= 0.5):
                        flipped = True
                        break
        out[i] = cur[0]
        n_queries += calls
    lgr.debug("Query attack used %d oracle queries for %d rows", n_queries, x.shape[0])
    return out


def morph_attack(
    x, morph_map, feature_names, magnitude, seed, lower=None, upper=None
):
    """Shift all features of every morph together, per row

    Features of one morph move by ``magnitude`` in the hinted direction;
    ``either`` draws a sign per row and morph (row ``i`` uses seed
    ``seed + i``). Results are clipped to the bounds, never beyond a
    coordinate's original value.
    """
    x = np.asarray(x, dtype=np.float64)
    resolved = morph_map.resolve(feature_names)
    n_rows = x.shape[0]
    signs = np.empty((n_rows, len(resolved)))
    for k, (entry, _) in enumerate(resolved):
        if entry.direction is MorphDirection.INCREASE:
            signs[:, k] = 1.0
        elif entry.direction is MorphDirection.DECREASE:
            signs[:, k] = -1.0
    either = [k for k, (e, _) in enumerate(resolved) if e.direction is MorphDirection.EITHER]
    if either:
        for i in range(n_rows):
            signs[i, either] = np.random.default_rng(seed + i).choice(
                (-1.0, 1.0), size=len(either)
            )
    shift = np.zeros_like(x)
    for k, (_, idx) in enumerate(resolved):
        shift[:, idx] += magnitude * signs[:, k:k + 1]
    out = x + shift
    touched = sorted({int(i) for _, idx in resolved for i in idx})
    if lower is not None or upper is not None:
        lo = np.full(x.shape[1], -np.inf) if lower is None else np.asarray(lower, float)
        hi = np.full(x.shape[1], np.inf) if upper is None else np.asarray(upper, float)
        out[:, touched] = np.clip(
            out[:, touched],
            np.minimum(lo[touched], x[:, touched]),
            np.maximum(hi[touched], x[:, touched]),
        )
    untouched = np.setdiff1d(np.arange(x.shape[1]), touched)
    out[:, untouched] = x[:, untouched]
    return out


def asr(pred_orig, pred_adv, y):
    """Revised attack success rate

    Fraction of all attempts whose original prediction was correct and
    whose adversarial prediction differs from it.

    Examples
    --------
    >>> asr([1, 1, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0])
    0.25
    """
    pred_orig = np.asarray(pred_orig)
    pred_adv = np.asarray(pred_adv)
    y = np.asarray(y)
    if not (pred_orig.shape == pred_adv.shape == y.shape):
        raise DataError("prediction and label vectors differ in length", module="attacks")
    if not y.size:
        raise DataError("ASR of zero attempts is undefined", module="attacks")
    hits = (pred_orig == y) & (pred_orig != pred_adv)
    return float(np.sum(hits)) / y.size


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    seed: int = 0
    epsilon: float = 1.0
    budget: int = 50
    magnitude: float = 1.0
    level: PerturbationLevel = PerturbationLevel.CONSTRAINED

    def to_dict(self):
        rec = {"attack": self.kind.value, "seed": self.seed, "level": int(self.level)}
        if self.kind is AttackKind.MORPH:
            rec["magnitude"] = self.magnitude
        else:
            rec["epsilon"] = self.epsilon
        if self.kind is AttackKind.QUERY:
            rec["budget"] = self.budget
        return rec


@dataclass(eq=False)
class AttackRun:
    spec: AttackSpec
    feature_names: tuple
    allowed: tuple
    x_orig: np.ndarray
    x_adv: np.ndarray
    y: np.ndarray
    pred_orig: np.ndarray
    pred_adv: np.ndarray
    asr: float = field(init=False)

    def __post_init__(self):
        self.asr = asr(self.pred_orig, self.pred_adv, self.y)

    @property
    def allowed_names(self):
        return [self.feature_names[i] for i in self.allowed]

    def to_dict(self):
        return {
            **self.spec.to_dict(),
            "allowed": self.allowed_names,
            "rows": int(self.y.size),
            "asr": self.asr,
        }


def run_attack(spec, model, test, constraints=None, morph_map=None):
    """Craft adversarial test rows against ``model`` and measure the ASR"""
    if spec.kind is AttackKind.MORPH:
        if morph_map is None:
            raise UsageError("the morph attack needs a morph map")
        x_adv = morph_attack(
            test.x,
            morph_map,
            test.feature_names,
            spec.magnitude,
            spec.seed,
            None if constraints is None else constraints.lower,
            None if constraints is None else constraints.upper,
        )
        allowed = tuple(morph_map.allowed_indices(test.feature_names))
    elif constraints is None:
        raise UsageError(f"the {spec.kind.value} attack needs constraints")
    elif spec.kind is AttackKind.GRADSIGN:
        x_adv = gradient_sign_attack(model, test.x, test.y, constraints)
        allowed = constraints.allowed
    else:
        x_adv = query_attack(
            model.scores, test.x, test.y, constraints, spec.budget, spec.seed
        )
        allowed = constraints.allowed
    pred_orig, _ = predict(model, test.x)
    pred_adv, _ = predict(model, x_adv)
    run = AttackRun(
        spec, test.feature_names, tuple(allowed), test.x, x_adv, test.y,
        pred_orig, pred_adv,
    )
    lgr.info(
        "%s attack on %d rows touching %d feature(s): ASR %.2f%%",
        spec.kind.value,
        test.n_rows,
        len(allowed),
        100 * run.asr,
    )
    return run


def _cell(model, transform, run):
    po, _ = predict(model, transform(run.x_orig))
    pa, _ = predict(model, transform(run.x_adv))
    return {
        "status": "ok",
        "asr": asr(po, pa, run.y),
        "metrics": metrics_from_labels(run.y, po).to_dict(),
        "adversarial_metrics": metrics_from_labels(run.y, pa).to_dict(),
    }


def evaluate_defense(baseline, train, run, report, defenses, model_kind, config, seed):
    """Replay one attack through every defense configuration

    Parameters
    ----------
    baseline : Model
        Model the attack was crafted against.
    train : Dataset
        Training split the baseline was fitted on (model-input space).
    run : AttackRun
    report : ScoreReport
    defenses : sequence of DefenseSpec
    model_kind, config, seed
        Used to retrain Option A and B1 models.

    Returns
    -------
    dict
        Cell name -> result. ``baseline`` is always present; failing
        defense cells carry ``status: error`` and a message.
    """
    cells = {"baseline": _cell(baseline, lambda m: m, run)}
    for d in defenses:
        try:
            if d.option == "A":
                plan = selection_plan(report, d.policy)
                keep = list(plan.keep_indices)
                model = train_model(
                    model_kind, apply_selection(plan, train), config, seed
                )
                cell = _cell(model, lambda m, keep=keep: m[:, keep], run)
                cell["kept"] = plan.keep_names
            else:
                plan = mask_plan(report, train, d.scope, d.phase, d.strategy)
                if plan.phase is MaskPhase.TRAIN_AND_INFERENCE:
                    model = train_model(
                        model_kind, train.with_x(plan.apply(train.x)), config, seed
                    )
                else:
                    model = baseline
                cell = _cell(model, plan.apply, run)
                cell["masked"] = [plan.feature_names[i] for i in plan.masked_indices]
                cell["strategy"] = str(plan.strategy)
        except PerturbError as e:
            lgr.warning("Defense %s failed: %s", d.name, e)
            cell = {"status": "error", "message": str(e)}
        cells[d.name] = cell
    return cells
