"""Plan PS-guided feature selection and masking defenses"""

__docformat__ = "restructuredtext"

import logging
from pathlib import Path

from datalad.interface.base import (
    Interface,
    build_doc,
    eval_results,
)
from datalad.interface.results import get_status_dict
from datalad.support.constraints import (
    EnsureNone,
    EnsureStr,
)
from datalad.support.param import Parameter

from .common import (
    build_config,
    data_params,
    defense_opt,
    file_result,
    neutral_opt,
    phase_opt,
    run_guarded,
)
from .defense import (
    mask_plan,
    parse_defenses,
    selection_plan,
)
from .exceptions import (
    DataError,
    UsageError,
)
from .pipeline import (
    prepare,
    score_config,
)
from .report import (
    emit,
    load,
)

lgr = logging.getLogger("datalad.perturb.defend")


@build_doc
class Defend(Interface):
    """Derive defense plans from a perturb-ability score report

    Option A (``a-green``, ``a-green-yellow``) keeps only Low, or Low and
    Medium, features. Option B (``b-high``, ``b-high-medium``) keeps all
    features but replaces the High, or High and Medium, ones by neutral
    values, either at training and inference (B1) or at inference only
    (B2). One JSON plan is written per resulting configuration.

    The score report is computed like [CMD: perturb-score CMD][PY:
    `perturb_score` PY] does, or read from [CMD: --score-report CMD][PY:
    `score_report` PY]. Mean and median neutral values are taken from the
    scaled training split and therefore need the dataset.
    """

    _params_ = dict(
        **data_params,
        score_report=Parameter(
            args=("--score-report",),
            metavar="PATH",
            doc="""score report (score.json) written by perturb-score.""",
            constraints=EnsureStr() | EnsureNone(),
        ),
        defense=defense_opt,
        phase=phase_opt,
        neutral=neutral_opt,
    )

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
        tau=None,
        corr_threshold=None,
        min_r=None,
        max_r=None,
        histogram_bin_width=None,
        out_dir=None,
        score_report=None,
        defense=None,
        phase=None,
        neutral=None,
    ):
        yield from run_guarded(
            "perturb-defend",
            defend_cmd(
                out_dir,
                score_report,
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
                tau=tau,
                corr_threshold=corr_threshold,
                min_r=min_r,
                max_r=max_r,
                histogram_bin_width=histogram_bin_width,
                defenses=defense,
                phase=phase,
                neutral=neutral,
            ),
        )


def plan_filename(spec):
    return "plan-" + spec.name.replace("/", "-") + ".json"


def defend_cmd(out_dir, score_report=None, **params):
    if not out_dir:
        raise UsageError("no output directory given (--out-dir)")
    config = build_config(**params)
    specs = parse_defenses(config.defenses, config.phase, config.neutral_strategy())
    needs_train = any(
        s.option != "A" and s.strategy.kind != "const" for s in specs
    )

    prepared = None
    if score_report:
        report = load(score_report, kind="score-report")
        if needs_train:
            prepared = prepare(config)
            if list(prepared.train.feature_names) != report.feature_names:
                raise DataError(
                    f"score report {score_report} does not describe the columns "
                    f"of {config.dataset}",
                    module="defense",
                )
    else:
        report, _, prepared = score_config(config)
    if needs_train and prepared is None:
        raise UsageError(
            f"{config.neutral_strategy()} neutral values need the dataset (--dataset)"
        )

    out_dir = Path(out_dir)
    plans = {}
    for spec in specs:
        if spec.option == "A":
            plan = selection_plan(report, spec.policy)
            summary = f"keeps {len(plan.keep_indices)} of {len(report.breakdowns)}"
        else:
            plan = mask_plan(
                report,
                None if prepared is None else prepared.train,
                spec.scope,
                spec.phase,
                spec.strategy,
            )
            summary = f"masks {len(plan.masked_indices)} of {len(report.breakdowns)}"
        plans[spec.name] = summary
        yield file_result(
            "perturb-defend",
            emit(plan, "json", out_dir / plan_filename(spec)),
            "selection-plan" if spec.option == "A" else "mask-plan",
        )
    yield get_status_dict(
        "perturb-defend",
        status="ok",
        message="; ".join(f"{k} {v} features" for k, v in plans.items()),
        plans=plans,
    )
