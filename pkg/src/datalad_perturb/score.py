# ## ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ##
#
#   See COPYING file distributed along with the datalad package for the
#   copyright and license terms.
#
# ## ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ### ##
"""Score the perturb-ability of flow features"""

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
from datalad.ui import ui

from .common import (
    build_config,
    data_params,
    file_result,
    run_guarded,
)
from .correlation import export_graph
from .exceptions import UsageError
from .pipeline import score_config
from .report import (
    emit,
    render_class_table,
)

lgr = logging.getLogger("datalad.perturb.score")


@build_doc
class Score(Interface):
    """Compute the Perturb-ability Score (PS) of every feature of a flow dataset

    Each feature gets five PS fields from its annotations (protocol,
    identifier and integrity fields, direction, flow-wide aggregation), its
    number of possible values and the features it is highly correlated
    with. Their geometric mean classifies the feature as Low, Medium or
    High perturb-ability.

    Scoring inputs are derived from the training split of [CMD: --dataset
    CMD][PY: `flows` PY]. With [CMD: --fixture CMD][PY: `fixture` PY] they
    are pinned instead and no dataset is read, which reproduces the class
    tables of the shipped catalogs::

        datalad perturb-score --catalog builtin:unsw-nb15 \\
            --fixture builtin:unsw-nb15 --out-dir scores

    The report is written as JSON and CSV; with a dataset, the correlation
    graph (DOT and JSON) and the ingestion drop report are written too.
    """

    _params_ = dict(**data_params)

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
        tau=None,
        corr_threshold=None,
        min_r=None,
        max_r=None,
        histogram_bin_width=None,
        out_dir=None,
    ):
        yield from run_guarded(
            "perturb-score",
            score_cmd(
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
                tau=tau,
                corr_threshold=corr_threshold,
                min_r=min_r,
                max_r=max_r,
                histogram_bin_width=histogram_bin_width,
            ),
        )

    @staticmethod
    def custom_result_renderer(res, **kwargs):
        if res.get("action") == "perturb-score" and "class_table" in res:
            ui.message(res["class_table"])
        else:
            generic_result_renderer(res)


def dataset_label(config):
    source = config.dataset or config.fixture or config.catalog
    name = str(source)
    if name.startswith("builtin:"):
        return name[len("builtin:"):]
    return Path(name).stem


def score_cmd(out_dir, **params):
    """Score all features and write the score artifacts

    Yields
    ------
    dict
        One result per written file, then a summary carrying the class
        counts and the rendered class table.
    """
    if not out_dir:
        raise UsageError("no output directory given (--out-dir)")
    config = build_config(**params)
    report, matrix, prepared = score_config(config)
    out_dir = Path(out_dir)

    payload = {**report.to_dict(), "config": config.to_dict()}
    yield file_result(
        "perturb-score",
        emit(payload, "json", out_dir / "score.json", kind="score-report"),
        "score-report",
    )
    yield file_result(
        "perturb-score", emit(report, "csv", out_dir / "score.csv"), "score-table"
    )
    if matrix is not None:
        graph = export_graph(matrix, config.thresholds.corr_threshold)
        yield file_result(
            "perturb-score",
            emit(graph, "dot", out_dir / "correlation.dot"),
            "correlation-graph",
        )
        yield file_result(
            "perturb-score",
            emit(graph, "json", out_dir / "correlation.json"),
            "correlation-graph",
        )
        yield file_result(
            "perturb-score",
            emit(prepared.drop_report, "json", out_dir / "drop_report.json"),
            "drop-report",
        )
    name = dataset_label(config)
    yield get_status_dict(
        "perturb-score",
        status="ok",
        message=f"scored {len(report.breakdowns)} features of {name}",
        class_counts={c.value: n for c, n in report.class_counts().items()},
        class_table=render_class_table({name: report}),
    )
