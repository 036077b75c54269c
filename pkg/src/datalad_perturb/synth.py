"""Generate a synthetic flow dataset"""

__docformat__ = "restructuredtext"

import logging

from datalad.interface.base import (
    Interface,
    build_doc,
    eval_results,
)
from datalad.interface.results import get_status_dict
from datalad.support.constraints import (
    EnsureInt,
)
from datalad.support.param import Parameter

from .common import (
    file_result,
    out_dir_opt,
    run_guarded,
)
from .exceptions import UsageError
from .synthetic import (
    DEFAULT_ROWS,
    write_synthetic,
)

lgr = logging.getLogger("datalad.perturb.synth")


@build_doc
class Synth(Interface):
    """Write a labeled synthetic flow dataset with its catalog and morph map

    The generated features span all perturb-ability classes, and most of
    the class signal lives in Low features, so models restricted to them
    stay accurate. ``flows.csv``, ``catalog.json`` and ``morphs.json`` are
    written to the output directory and can be fed straight into the
    other perturb commands.
    """

    _params_ = dict(
        n_rows=Parameter(
            args=("--n-rows",),
            doc="""number of flows to generate (at least 100).""",
            constraints=EnsureInt(),
        ),
        seed=Parameter(
            args=("--seed",),
            doc="""random seed.""",
            constraints=EnsureInt(),
        ),
        out_dir=out_dir_opt,
    )

    @staticmethod
    @eval_results
    def __call__(*, n_rows=DEFAULT_ROWS, seed=0, out_dir=None):
        yield from run_guarded("perturb-synth", synth_cmd(n_rows, seed, out_dir))


def synth_cmd(n_rows, seed, out_dir):
    if not out_dir:
        raise UsageError("no output directory given (--out-dir)")
    paths = write_synthetic(out_dir, n_rows, seed)
    for kind, path in paths.items():
        yield file_result("perturb-synth", path, kind)
    yield get_status_dict(
        "perturb-synth",
        status="ok",
        message=f"generated {n_rows} flows with seed {seed}",
        n_rows=n_rows,
        seed=seed,
    )
