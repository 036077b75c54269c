"""Run a baseline, attack and defense experiment"""

__docformat__ = "restructuredtext"

import logging
from pathlib import Path

from datalad.interface.base import (
    Interface,
    build_doc,
    eval_results,
)
from datalad.interface.results import get_status_dict
from datalad.interface.utils import generic_result_renderer
from datalad.support.constraints import (
    EnsureChoice,
    EnsureFloat,
    EnsureInt,
    EnsureNone,
    EnsureRange,
    EnsureStr,
)
from datalad.support.param import Parameter
from datalad.ui import ui

from .attacks import (
    AttackKind,
    AttackSpec,
    PerturbationLevel,
    allowed_from_report,
    build_constraints,
    evaluate_defense,
    load_morph_map,
    run_attack,
)
from .common import (
    batch_size_opt,
    build_config,
    data_params,
    defense_opt,
    epochs_opt,
    file_result,
    hidden_width_opt,
    learning_rate_opt,
    model_opt,
    neutral_opt,
    phase_opt,
    run_guarded,
    seed_attack_opt,
    seed_train_opt,
)
from .config import resolve_resource
from .defense import parse_defenses
from .exceptions import UsageError
from .models import train as train_model
from .pipeline import score_config
from .report import (
    emit,
    render_experiment_table,
)

lgr = logging.getLogger("datalad.perturb.experiment")


@build_doc
class Experiment(Interface):
    """Train, attack and defend a flow classifier in one reproducible run

    The dataset is split, scaled and scored as in [CMD: perturb-score
    CMD][PY: `perturb_score` PY]. A baseline model is trained on all
    features, one evasion attack is crafted against it on the test split,
    and the same adversarial rows are replayed against every configured
    defense. The resulting grid (baseline, Option A, B1, B2) records the
    clean and adversarial metrics and the attack success rate of each cell
    in ``experiment.json``. A defense that cannot be built is recorded as
    an errored cell; the baseline cell is always present.

    Attacks: ``gradsign`` takes one signed-gradient step of size epsilon,
    ``query`` searches coordinate-wise using only model scores, ``morph``
    shifts the feature groups of a morph map together. The features an
    attacker may touch follow [CMD: --attack-features CMD][PY:
    `attack_features` PY], or the morph map.

    All randomness is seeded; repeating a run with the same parameters
    writes identical files.
    """

    _params_ = dict(
        **data_params,
        seed_train=seed_train_opt,
        seed_attack=seed_attack_opt,
        model=model_opt,
        epochs=epochs_opt,
        learning_rate=learning_rate_opt,
        batch_size=batch_size_opt,
        hidden_width=hidden_width_opt,
        defense=defense_opt,
        phase=phase_opt,
        neutral=neutral_opt,
        attack=Parameter(
            args=("--attack",),
            doc="""evasion attack.""",
            constraints=EnsureChoice(*[k.value for k in AttackKind]),
        ),
        attack_features=Parameter(
            args=("--attack-features",),
            doc="""PS classes the gradsign and query attacks may touch.""",
            constraints=EnsureChoice("high", "high-medium", "all"),
        ),
        level=Parameter(
            args=("--level",),
            doc="""constraint level of the gradsign and query attacks: 1 edits
            any feature without bounds, 2 respects the training range and
            integer grid, 3 additionally leaves backward and interflow
            features alone.""",
            constraints=EnsureInt() & EnsureRange(min=1, max=3) | EnsureNone(),
        ),
        epsilon=Parameter(
            args=("--epsilon",),
            doc="""L-infinity budget in scaled feature units.""",
            constraints=EnsureFloat(),
        ),
        budget=Parameter(
            args=("--budget",),
            doc="""oracle queries per row for the query attack.""",
            constraints=EnsureInt(),
        ),
        magnitude=Parameter(
            args=("--magnitude",),
            doc="""shift, in scaled units, applied by every morph.""",
            constraints=EnsureFloat(),
        ),
        morph_map=Parameter(
            args=("--morph-map",),
            metavar="PATH",
            doc="""morph-to-feature map (JSON) for the morph attack, or
            builtin:<name>.""",
            constraints=EnsureStr() | EnsureNone(),
        ),
    )

    result_renderer = "tailored"

    @staticmethod
    @eval_results
    def __call__(
        *,
        flows=None,
        catalog=None,
        fixture=None,
        label_column=None,
        benign_label=None,
        scaler=None,
        test_fraction=0.2,
        undersample=True,
        seed_split=None,
        seed_undersample=None,
        seed_train=None,
        seed_attack=None,
        tau=None,
        corr_threshold=None,
        min_r=None,
        max_r=None,
        histogram_bin_width=None,
        out_dir=None,
        model=None,
        epochs=None,
        learning_rate=None,
        batch_size=None,
        hidden_width=None,
        defense=None,
        phase=None,
        neutral=None,
        attack="gradsign",
        attack_features="high",
        level=None,
        epsilon=1.0,
        budget=50,
        magnitude=1.0,
        morph_map=None,
    ):
        yield from run_guarded(
            "perturb-experiment",
            experiment_cmd(
                out_dir,
                flows=flows,
                catalog=catalog,
                fixture=fixture,
                label_column=label_column,
                benign_label=benign_label,
                scaler=scaler,
                test_fraction=test_fraction,
                undersample=undersample,
                seed_split=seed_split,
                seed_undersample=seed_undersample,
                seed_train=seed_train,
                seed_attack=seed_attack,
                tau=tau,
                corr_threshold=corr_threshold,
                min_r=min_r,
                max_r=max_r,
                histogram_bin_width=histogram_bin_width,
                model=model,
                epochs=epochs,
                learning_rate=learning_rate,
                batch_size=batch_size,
                hidden_width=hidden_width,
                defenses=defense,
                phase=phase,
                neutral=neutral,
                attack=attack,
                attack_features=attack_features,
                level=level,
                epsilon=epsilon,
                budget=budget,
                magnitude=magnitude,
                morph_map=morph_map,
            ),
        )

    @staticmethod
    def custom_result_renderer(res, **kwargs):
        if res.get("action") == "perturb-experiment" and "table" in res:
            ui.message(res["table"])
        else:
            generic_result_renderer(res)


def attack_setup(config, report, prepared):
    """Attack spec, constraints and morph map for a prepared run"""
    train = prepared.train
    if config.attack is AttackKind.MORPH:
        if not config.morph_map:
            raise UsageError("the morph attack needs a morph map (--morph-map)")
        morph_map = load_morph_map(resolve_resource(config.morph_map, "morphs"))
        spec = AttackSpec(
            config.attack,
            seed=config.seeds.attack,
            magnitude=config.magnitude,
            level=PerturbationLevel.MORPH,
        )
        # bounds only, the morph map decides the touched columns
        constraints = build_constraints(train.x, range(train.n_features), 0.0)
        return spec, constraints, morph_map
    if config.level is PerturbationLevel.MORPH:
        raise UsageError("level 4 is the morph attack (--attack morph)")
    accessible = [
        i for i, m in enumerate(prepared.catalog) if not m.direction.attacker_inaccessible
    ]
    constraints = build_constraints(
        train.x,
        allowed_from_report(report, config.attack_features),
        config.epsilon,
        level=config.level,
        scaler=prepared.scaler,
        raw_train_x=prepared.raw_train.x,
        accessible=accessible,
    )
    spec = AttackSpec(
        config.attack,
        seed=config.seeds.attack,
        epsilon=config.epsilon,
        budget=config.budget,
        level=config.level,
    )
    return spec, constraints, None


def experiment_cmd(out_dir, **params):
    """Baseline, attack and defense grid

    Yields
    ------
    dict
        Results for the written score report, baseline model and
        experiment report, then a summary carrying the rendered grid.
    """
    if not out_dir:
        raise UsageError("no output directory given (--out-dir)")
    config = build_config(**params)
    if config.fixture:
        raise UsageError("experiments train models and need --dataset, not --fixture")
    report, _, prepared = score_config(config)
    out_dir = Path(out_dir)

    baseline = train_model(
        config.model, prepared.train, config.training, config.seeds.train
    )
    spec, constraints, morph_map = attack_setup(config, report, prepared)
    run = run_attack(spec, baseline, prepared.test, constraints, morph_map)
    defenses = parse_defenses(config.defenses, config.phase, config.neutral_strategy())
    cells = evaluate_defense(
        baseline,
        prepared.train,
        run,
        report,
        defenses,
        config.model,
        config.training,
        config.seeds.train,
    )

    n_train_benign, n_train_malicious = prepared.train.class_counts()
    n_test_benign, n_test_malicious = prepared.test.class_counts()
    experiment = {
        "config": config.to_dict(),
        "data": {
            "features": list(prepared.train.feature_names),
            "train": {"benign": n_train_benign, "malicious": n_train_malicious},
            "test": {"benign": n_test_benign, "malicious": n_test_malicious},
            "drop_report": prepared.drop_report.to_dict(),
        },
        "class_counts": {c.value: n for c, n in report.class_counts().items()},
        "model": config.model.value,
        "attack": run.to_dict(),
        "cells": cells,
    }
    yield file_result(
        "perturb-experiment",
        emit(
            {**report.to_dict(), "config": config.to_dict()},
            "json",
            out_dir / "score.json",
            kind="score-report",
        ),
        "score-report",
    )
    yield file_result(
        "perturb-experiment",
        emit(baseline, "json", out_dir / "model.json"),
        "model",
    )
    yield file_result(
        "perturb-experiment",
        emit(experiment, "json", out_dir / "experiment.json", kind="experiment"),
        "experiment",
    )
    failed = [name for name, cell in cells.items() if cell["status"] != "ok"]
    yield get_status_dict(
        "perturb-experiment",
        status="ok",
        message=(
            f"{spec.kind.value} attack ASR {100 * run.asr:.2f}% on the baseline"
            + (f", {len(failed)} defense cell(s) failed" if failed else "")
        ),
        cells=cells,
        table=render_experiment_table(cells),
    )
