"""Versioned JSON, CSV and DOT artifacts"""

__docformat__ = "restructuredtext"

import json
import logging
import os
import tempfile
from contextlib import suppress
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import pandas as pd

from .correlation import (
    CorrelationGraph,
    CorrMatrix,
    export_graph,
)
from .dataset_io import DropReport
from .defense import (
    MaskPlan,
    SelectionPlan,
)
from .exceptions import (
    DataError,
    UsageError,
)
from .metadata import MetadataCatalog
from .models import Model
from .scoring import (
    PsClass,
    ScoreReport,
)

lgr = logging.getLogger("datalad.perturb.report")

SCHEMA_VERSION = "1.0.0"
FLOAT_DECIMALS = 6
# payloads whose floats are written unrounded
FULL_PRECISION_KINDS = ("model",)


class Format(str, Enum):
    JSON = "json"
    CSV = "csv"
    DOT = "dot"


@dataclass(frozen=True)
class Envelope:
    schema_version: str
    produced_by: str
    kind: str
    payload: object

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "produced_by": self.produced_by,
            "kind": self.kind,
            "payload": self.payload,
        }


def produced_by():
    from . import __version__

    return f"datalad-perturb {__version__}"


def round_floats(obj, ndigits=FLOAT_DECIMALS):
    """Round every float in a JSON-like structure

    Examples
    --------
    >>> round_floats({"t": 0.5 ** 0.2, "n": [1, -1e-9]})
    {'t': 0.870551, 'n': [1, 0.0]}
    """
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        # + 0.0 turns -0.0 into 0.0
        return round(obj, ndigits) + 0.0
    if isinstance(obj, dict):
        return {k: round_floats(v, ndigits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, ndigits) for v in obj]
    return obj


def _graph_dict(graph):
    return {
        "threshold": graph.threshold,
        "nodes": list(graph.nodes),
        "edges": [{"a": e.a, "b": e.b, "abs_r": e.abs_r} for e in graph.edges],
        "clusters": graph.clusters(),
    }


def _matrix_dict(matrix):
    return {"features": list(matrix.feature_names), "r": matrix.r.tolist()}


_KINDS = (
    (ScoreReport, "score-report", lambda o: o.to_dict()),
    (CorrelationGraph, "correlation-graph", _graph_dict),
    (CorrMatrix, "correlation-matrix", _matrix_dict),
    (SelectionPlan, "selection-plan", lambda o: o.to_dict()),
    (MaskPlan, "mask-plan", lambda o: o.to_dict()),
    (DropReport, "drop-report", lambda o: o.to_dict()),
    (Model, "model", lambda o: o.to_dict()),
    (MetadataCatalog, "catalog", lambda o: o.to_list()),
)


def payload_of(obj, kind=None):
    """Kind name and JSON-ready payload of a report object

    Plain dicts pass through and need an explicit ``kind``.
    """
    for cls, name, convert in _KINDS:
        if isinstance(obj, cls):
            return name, convert(obj)
    if isinstance(obj, dict):
        if not kind:
            raise UsageError("a dict payload needs an explicit kind")
        return kind, obj
    raise UsageError(f"cannot serialize {type(obj).__name__} payloads")


def atomic_write(path, text):
    path = Path(path)
    if not text.endswith("\n"):
        text += "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(
            dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            with suppress(FileNotFoundError):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}", module="report") from e
    lgr.debug("Wrote %s", path)
    return path


def to_json(obj, kind=None):
    kind, payload = payload_of(obj, kind)
    if kind not in FULL_PRECISION_KINDS:
        payload = round_floats(payload)
    env = Envelope(SCHEMA_VERSION, produced_by(), kind, payload)
    try:
        return json.dumps(env.to_dict(), indent=2, allow_nan=False)
    except (TypeError, ValueError) as e:
        raise DataError(f"{kind} payload is not serializable: {e}", module="report") from e


def _score_csv(report):
    rows = [
        {
            "name": b.feature,
            "direction": b.inputs["flags"]["direction"],
            "pv": b.inputs["pv"],
            "cf": b.inputs["cf"],
            "forward_corr_count": b.inputs["forward_corr_count"],
            "ps1": b.ps1,
            "ps2": b.ps2,
            "ps3": b.ps3,
            "ps4": b.ps4,
            "ps5": b.ps5,
            "ps_total": b.ps_total,
            "class": b.class_label.value,
        }
        for b in report.breakdowns
    ]
    return pd.DataFrame(rows, columns=list(rows[0]) if rows else None)


def _matrix_csv(matrix):
    df = pd.DataFrame(matrix.r, columns=list(matrix.feature_names))
    df.insert(0, "feature", list(matrix.feature_names))
    return df


def to_csv(obj):
    if isinstance(obj, ScoreReport):
        df = _score_csv(obj)
    elif isinstance(obj, CorrMatrix):
        df = _matrix_csv(obj)
    else:
        raise UsageError(
            f"unsupported payload/format combination: {type(obj).__name__} -> csv"
        )
    return df.to_csv(
        index=False, float_format=f"%.{FLOAT_DECIMALS}f", lineterminator="\n"
    )


def _dot_id(name):
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(obj, threshold=None):
    """Undirected DOT graph, one edge per feature pair at or above the threshold"""
    if isinstance(obj, CorrMatrix):
        if threshold is None:
            raise UsageError("a correlation matrix needs a threshold for DOT export")
        obj = export_graph(obj, threshold)
    if not isinstance(obj, CorrelationGraph):
        raise UsageError(
            f"unsupported payload/format combination: {type(obj).__name__} -> dot"
        )
    lines = [f"// |r| >= {obj.threshold}", "graph correlation {"]
    lines.extend(f"  {_dot_id(n)};" for n in obj.nodes)
    lines.extend(
        f'  {_dot_id(e.a)} -- {_dot_id(e.b)} [weight="{e.abs_r:.4f}"];'
        for e in obj.edges
    )
    lines.append("}")
    return "\n".join(lines)


def emit(payload, fmt, path, kind=None, threshold=None):
    """Write one artifact

    Parameters
    ----------
    payload : object
        A report object, or a plain dict together with ``kind``.
    fmt : Format or str
    path : str or Path
    kind : str, optional
    threshold : float, optional
        Edge threshold when a `CorrMatrix` is written as DOT.

    Returns
    -------
    Path
    """
    try:
        fmt = fmt if isinstance(fmt, Format) else Format(str(fmt).lower())
    except ValueError:
        raise UsageError(f"unknown output format {fmt!r}") from None
    if fmt is Format.JSON:
        text = to_json(payload, kind)
    elif fmt is Format.CSV:
        text = to_csv(payload)
    else:
        text = to_dot(payload, threshold)
    return atomic_write(path, text)


def read(path):
    """Parse a JSON artifact into its `Envelope`

    Raises
    ------
    DataError
        If the file is unreadable, not an envelope, or written with an
        unknown schema major version.
    """
    path = Path(path)
    try:
        rec = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}", module="report") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}:{e.colno}: {e.msg}", module="report") from e
    missing = [
        k
        for k in ("schema_version", "produced_by", "kind", "payload")
        if not isinstance(rec, dict) or k not in rec
    ]
    if missing:
        raise DataError(
            f"{path} is not a report envelope (missing {', '.join(missing)})",
            module="report",
        )
    major = str(rec["schema_version"]).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise DataError(
            f"{path} has schema version {rec['schema_version']}, this version "
            f"reads {SCHEMA_VERSION.split('.')[0]}.x",
            module="report",
        )
    return Envelope(rec["schema_version"], rec["produced_by"], rec["kind"], rec["payload"])


_LOADERS = {
    "score-report": ScoreReport.from_dict,
    "selection-plan": SelectionPlan.from_dict,
    "mask-plan": MaskPlan.from_dict,
    "model": Model.from_dict,
    "correlation-matrix": lambda p: CorrMatrix(p["features"], p["r"]),
}


def load(path, kind=None):
    """Read an artifact and rebuild its report object where one exists

    Kinds without a rebuilt form (experiment, drop report, ...) come back
    as their payload dict.
    """
    env = read(path)
    if kind is not None and env.kind != kind:
        raise DataError(f"{path} holds a {env.kind}, expected a {kind}", module="report")
    loader = _LOADERS.get(env.kind)
    if loader is None:
        return env.payload
    try:
        return loader(env.payload)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{path}: malformed {env.kind} payload: {e}", module="report") from e


def render_class_table(reports):
    """Aligned plain-text class table, one row per named score report

    Parameters
    ----------
    reports : dict
        Dataset name -> ScoreReport (or class count mapping).

    Examples
    --------
    >>> from datalad_perturb.scoring import PsClass
    >>> print(render_class_table({"toy": {PsClass.LOW: 1, PsClass.MEDIUM: 0,
    ...                                   PsClass.HIGH: 3}}))
    Dataset   Low         Medium     High        Total
    toy       1 (25.0%)   0 (0.0%)   3 (75.0%)   4
    """
    header = ["Dataset"] + [c.value for c in PsClass] + ["Total"]
    rows = []
    for name, rep in reports.items():
        counts = rep.class_counts() if isinstance(rep, ScoreReport) else dict(rep)
        total = sum(counts.get(c, 0) for c in PsClass)
        cells = [str(name)]
        for c in PsClass:
            n = counts.get(c, 0)
            share = 100.0 * n / total if total else 0.0
            cells.append(f"{n} ({share:.1f}%)")
        cells.append(str(total))
        rows.append(cells)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = [
        "   ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
        for r in [header] + rows
    ]
    return "\n".join(lines)


def render_experiment_table(cells):
    """Plain-text view of an experiment grid: one row per defense cell"""
    header = ["Cell", "Accuracy", "F1", "F1 (adv)", "ASR"]
    rows = []
    for name, cell in cells.items():
        if cell.get("status") != "ok":
            rows.append([name, "error", "", "", cell.get("message", "")])
            continue
        rows.append(
            [
                name,
                f"{cell['metrics']['accuracy']:.4f}",
                f"{cell['metrics']['f1']:.4f}",
                f"{cell['adversarial_metrics']['f1']:.4f}",
                f"{100 * cell['asr']:.2f}%",
            ]
        )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    return "\n".join(
        "   ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
        for r in [header] + rows
    )
