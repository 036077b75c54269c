"""Ingestion to score report, shared by the commands"""

__docformat__ = "restructuredtext"

import logging
from dataclasses import dataclass

from .config import resolve_resource
from .correlation import (
    build_profile,
    pearson_matrix,
)
from .dataset_io import (
    apply_scaler,
    fit_scaler,
    load_csv,
    split,
    undersample,
)
from .exceptions import (
    DataError,
    UsageError,
)
from .metadata import (
    MetadataCatalog,
    effective_cardinality,
    load_catalog,
    validate_catalog,
)
from .scoring import (
    PsInputs,
    load_fixture,
    score_all,
)

lgr = logging.getLogger("datalad.perturb.pipeline")


@dataclass
class Prepared:
    """A dataset split, scaled and ready for scoring and training

    ``raw_train`` is the unscaled training split, ``train`` its scaled and
    (optionally) undersampled counterpart, ``scored_train`` the scaled
    split before undersampling, on which correlations are computed.
    """

    catalog: MetadataCatalog
    raw_train: object
    scored_train: object
    train: object
    test: object
    scaler: object
    drop_report: object


def catalog_for(config, feature_names=None):
    """Load the configured catalog, aligned to ``feature_names`` if given

    Annotations without a column are ignored with a warning; columns
    without an annotation are an error.
    """
    if not config.catalog:
        raise UsageError("no feature catalog given (--catalog)")
    catalog = load_catalog(resolve_resource(config.catalog, "catalog"))
    if feature_names is None:
        return catalog
    issues = validate_catalog(catalog, feature_names)
    for issue in issues:
        lgr.warning("Catalog: %s", issue.message)
    unannotated = [i.feature for i in issues if i.kind == "unannotated"]
    if unannotated:
        raise DataError(
            f"{len(unannotated)} column(s) without annotation: {', '.join(unannotated)}",
            module="metadata",
        )
    return MetadataCatalog(catalog.align(feature_names))


def prepare(config):
    if not config.dataset:
        raise UsageError("no dataset given (--dataset)")
    dataset, drop_report = load_csv(
        config.dataset, config.label_column, config.benign_label
    )
    catalog = catalog_for(config, dataset.feature_names)
    raw_train, raw_test = split(dataset, config.test_fraction, config.seeds.split)
    scaler = fit_scaler(raw_train, config.scaler)
    scored_train = apply_scaler(scaler, raw_train)
    test = apply_scaler(scaler, raw_test)
    train = (
        undersample(scored_train, config.seeds.undersample)
        if config.undersample
        else scored_train
    )
    lgr.info(
        "Prepared %d training rows (%d/%d benign/malicious) and %d test rows",
        train.n_rows,
        *train.class_counts(),
        test.n_rows,
    )
    return Prepared(catalog, raw_train, scored_train, train, test, scaler, drop_report)


def derive_inputs(prepared, thresholds):
    """PS inputs from the training split: PV per column, CF from correlations"""
    matrix = pearson_matrix(prepared.scored_train)
    profile = build_profile(matrix, prepared.catalog, thresholds.corr_threshold)
    inputs = [
        PsInputs(
            meta,
            effective_cardinality(prepared.raw_train.x[:, i], meta.declared_cardinality),
            int(profile.cf[i]),
            int(profile.forward_corr_count[i]),
        )
        for i, meta in enumerate(prepared.catalog)
    ]
    return inputs, matrix


def score_config(config):
    """Score report for a run configuration

    Returns
    -------
    tuple
        (ScoreReport, CorrMatrix or None, Prepared or None). With a fixture
        the report is computed from the pinned inputs alone and no dataset
        is read.
    """
    if config.fixture:
        catalog = catalog_for(config)
        inputs = load_fixture(resolve_resource(config.fixture, "fixture"), catalog)
        return score_all(inputs, config.thresholds), None, None
    prepared = prepare(config)
    inputs, matrix = derive_inputs(prepared, config.thresholds)
    return score_all(inputs, config.thresholds), matrix, prepared
