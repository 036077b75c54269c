"""Parameters and helpers shared by the perturb commands"""

__docformat__ = "restructuredtext"

import logging
import sys

from datalad import cfg
from datalad.interface.results import get_status_dict
from datalad.support.constraints import (
    EnsureBool,
    EnsureChoice,
    EnsureFloat,
    EnsureInt,
    EnsureNone,
    EnsureRange,
    EnsureStr,
)
from datalad.support.param import Parameter

from .config import (
    RunConfig,
    Seeds,
)
from .defense import DEFENSE_CHOICES
from .exceptions import (
    InvariantError,
    PerturbError,
    UsageError,
)
from .metadata import ThresholdConfig
from .models import TrainingConfig

lgr = logging.getLogger("datalad.perturb.common")

CFG_PREFIX = "datalad.perturb."


def cfg_value(value, key, default, cast=str):
    """Parameter value, else ``datalad.perturb.<key>`` configuration, else default"""
    if value is not None:
        return value
    configured = cfg.get(CFG_PREFIX + key, None)
    if configured is None:
        return default
    try:
        return cast(configured)
    except ValueError:
        raise UsageError(
            f"invalid configuration {CFG_PREFIX}{key}={configured!r}"
        ) from None


def error_result(action, exc, **kwargs):
    """Result record for a failed command

    Usage and data errors are ``impossible``, invariant breaches ``error``.
    """
    lgr.debug("%s failed: %r", action, exc)
    return get_status_dict(
        action,
        status="error" if isinstance(exc, InvariantError) else "impossible",
        message=str(exc),
        exit_code=exc.exit_code,
        module=exc.module,
        **kwargs,
    )


def file_result(action, path, kind):
    return get_status_dict(
        action,
        status="ok",
        path=str(path),
        type="file",
        message=f"wrote {kind}",
        artifact=kind,
    )


def _given(value, default):
    return default if value is None else value


def build_config(flows=None, **kw):
    """`RunConfig` from command parameters and DataLad configuration

    ``flows`` is the dataset path (``--dataset``); every other keyword is a
    command parameter of the same name.
    """
    defaults = ThresholdConfig()
    thresholds = ThresholdConfig(
        min_r=cfg_value(kw.pop("min_r", None), "min-r", defaults.min_r, int),
        max_r=cfg_value(kw.pop("max_r", None), "max-r", defaults.max_r, int),
        tau=cfg_value(kw.pop("tau", None), "tau", defaults.tau, float),
        corr_threshold=cfg_value(
            kw.pop("corr_threshold", None),
            "corr-threshold",
            defaults.corr_threshold,
            float,
        ),
        hist_bin_width=cfg_value(
            kw.pop("histogram_bin_width", None),
            "histogram-bin-width",
            defaults.hist_bin_width,
            float,
        ),
    )
    seed_defaults = Seeds()
    seeds = Seeds(
        **{
            name: _given(kw.pop(f"seed_{name}", None), getattr(seed_defaults, name))
            for name in ("split", "undersample", "train", "attack")
        }
    )
    training = TrainingConfig(
        **{
            name: kw.pop(name)
            for name in ("learning_rate", "epochs", "batch_size", "hidden_width")
            if kw.get(name) is not None
        }
    )
    kw["dataset"] = flows
    kw["label_column"] = cfg_value(kw.get("label_column"), "label-column", "label")
    kw["scaler"] = cfg_value(kw.get("scaler"), "scaler", "standardize")
    kw["model"] = cfg_value(kw.get("model"), "model", "logreg")
    kw = {k: v for k, v in kw.items() if v is not None}
    return RunConfig(thresholds=thresholds, seeds=seeds, training=training, **kw)


def _from_cmdline():
    """Whether we run inside the ``datalad`` command line entry point"""
    main = sys.modules.get("datalad.cli.main")
    if main is None:
        return False
    entry = getattr(sys.modules.get("__main__"), "main", None)
    return entry is not None and entry is getattr(main, "main", None)


def run_guarded(action, gen):
    """Yield from a command generator, turning `PerturbError` into a result

    On the command line the process then exits with the error's exit code,
    after the result record has been rendered. Python API callers get the
    record only.
    """
    try:
        yield from gen
    except PerturbError as e:
        yield error_result(action, e)
        if _from_cmdline():
            raise SystemExit(e.exit_code)


dataset_opt = Parameter(
    args=("--dataset",),
    dest="flows",
    metavar="CSV",
    doc="""labeled flow feature table (CSV with a header row).""",
    constraints=EnsureStr() | EnsureNone(),
)

catalog_opt = Parameter(
    args=("--catalog",),
    metavar="PATH",
    doc="""feature annotation catalog (JSON), or builtin:<name> for a shipped
    catalog (unsw-nb15, cse-cic-ids2018).""",
    constraints=EnsureStr() | EnsureNone(),
)

fixture_opt = Parameter(
    args=("--fixture",),
    metavar="PATH",
    doc="""pinned per-feature scoring inputs (JSON array of name, pv, cf,
    forward_corr_count), or builtin:<name>. When given, no dataset is read.""",
    constraints=EnsureStr() | EnsureNone(),
)

label_column_opt = Parameter(
    args=("--label-column",),
    metavar="NAME",
    doc="""name of the label column. [Default: 'label', or the
    datalad.perturb.label-column setting]""",
    constraints=EnsureStr() | EnsureNone(),
)

benign_label_opt = Parameter(
    args=("--benign-label",),
    metavar="VALUE",
    doc="""label value that denotes benign traffic; every other value is
    malicious.""",
    constraints=EnsureStr() | EnsureNone(),
)

scaler_opt = Parameter(
    args=("--scaler",),
    doc="""input normalization, fitted on the training split.""",
    constraints=EnsureChoice("standardize", "minmax") | EnsureNone(),
)

test_fraction_opt = Parameter(
    args=("--test-fraction",),
    doc="""share of rows held out for testing.""",
    constraints=EnsureFloat() & EnsureRange(min=0.0, max=1.0),
)

no_undersample_opt = Parameter(
    args=("--no-undersample",),
    dest="undersample",
    action="store_false",
    doc="""keep the training split unbalanced.""",
)


def _seed_opt(name):
    return Parameter(
        args=(f"--seed-{name}",),
        doc=f"""seed of the {name} step.""",
        constraints=EnsureInt() | EnsureNone(),
    )


seed_split_opt = _seed_opt("split")
seed_undersample_opt = _seed_opt("undersample")
seed_train_opt = _seed_opt("train")
seed_attack_opt = _seed_opt("attack")

tau_opt = Parameter(
    args=("--tau",),
    doc="""PS total at or above which a feature is High.""",
    constraints=EnsureFloat() | EnsureNone(),
)

corr_threshold_opt = Parameter(
    args=("--corr-threshold",),
    doc="""absolute Pearson correlation counted as high.""",
    constraints=EnsureFloat() | EnsureNone(),
)

min_r_opt = Parameter(
    args=("--min-r",),
    doc="""cardinality below which a feature cannot be perturbed.""",
    constraints=EnsureInt() | EnsureNone(),
)

max_r_opt = Parameter(
    args=("--max-r",),
    doc="""cardinality above which perturbation is unrestricted.""",
    constraints=EnsureInt() | EnsureNone(),
)

bin_width_opt = Parameter(
    args=("--histogram-bin-width",),
    doc="""width of the PS total histogram bins.""",
    constraints=EnsureFloat() | EnsureNone(),
)

out_dir_opt = Parameter(
    args=("--out-dir",),
    metavar="PATH",
    doc="""directory the reports are written to.""",
    constraints=EnsureStr() | EnsureNone(),
)

neutral_opt = Parameter(
    args=("--neutral",),
    metavar="STRATEGY",
    doc="""neutral value for masked features: mean, median or const:<v>.
    [Default: const:0 for standardized, const:0.5 for min-max inputs]""",
    constraints=EnsureStr() | EnsureNone(),
)

defense_opt = Parameter(
    args=("--defense",),
    action="append",
    doc="""defense configuration: a-green and a-green-yellow select Low (and
    Medium) features, b-high and b-high-medium mask High (and Medium)
    features. [Default: a-green and b-high] [CMD: This option can be given
    more than once. CMD]""",
    constraints=EnsureChoice(*DEFENSE_CHOICES) | EnsureNone(),
)

phase_opt = Parameter(
    args=("--phase",),
    doc="""masking phase; both are evaluated if not given.""",
    constraints=EnsureChoice("train-inference", "inference-only") | EnsureNone(),
)

model_opt = Parameter(
    args=("--model",),
    doc="""classifier kind.""",
    constraints=EnsureChoice("logreg", "mlp") | EnsureNone(),
)


def _training_opt(flag, doc, constraint):
    return Parameter(args=(flag,), doc=doc, constraints=constraint | EnsureNone())


epochs_opt = _training_opt("--epochs", """training epochs.""", EnsureInt())
learning_rate_opt = _training_opt(
    "--learning-rate", """gradient descent step size.""", EnsureFloat()
)
batch_size_opt = _training_opt("--batch-size", """mini-batch size.""", EnsureInt())
hidden_width_opt = _training_opt(
    "--hidden-width", """hidden units of the MLP.""", EnsureInt()
)

data_params = dict(
    flows=dataset_opt,
    catalog=catalog_opt,
    fixture=fixture_opt,
    label_column=label_column_opt,
    benign_label=benign_label_opt,
    scaler=scaler_opt,
    test_fraction=test_fraction_opt,
    undersample=no_undersample_opt,
    seed_split=seed_split_opt,
    seed_undersample=seed_undersample_opt,
    tau=tau_opt,
    corr_threshold=corr_threshold_opt,
    min_r=min_r_opt,
    max_r=max_r_opt,
    histogram_bin_width=bin_width_opt,
    out_dir=out_dir_opt,
)
