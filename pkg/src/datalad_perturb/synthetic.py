"""Synthetic labeled flow features with planted perturb-ability structure

The generated columns cover every scoring case: identifier-like columns
(protocol, destination port, connection state), backward and interflow
statistics that carry most of the class signal, a tightly correlated
forward volume cluster, a low-cardinality forward counter and flow-wide
timing aggregates. With the default size the data-derived score report
yields 6 Low, 3 Medium and 6 High features.
"""

__docformat__ = "restructuredtext"

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .attacks import (
    MorphDirection,
    MorphEntry,
    MorphMap,
)
from .exceptions import UsageError
from .metadata import (
    Direction,
    FeatureMetadata,
    MetadataCatalog,
    dump_catalog,
)
from .report import atomic_write

lgr = logging.getLogger("datalad.perturb.synthetic")

MIN_ROWS = 100
DEFAULT_ROWS = 5000
MALICIOUS_SHARE = 0.4
LABEL_COLUMN = "label"

BENIGN_PORTS = (80, 443, 53, 22, 25)
BENIGN_PORT_WEIGHTS = (0.35, 0.35, 0.15, 0.1, 0.05)
MALICIOUS_PORTS = (80, 443, 4444, 6667, 8080)

# name, direction, c1, c2, c3, flow-wide, declared cardinality
_FEATURES = (
    ("dst_port", Direction.NONE, False, True, False, False, None),
    ("protocol", Direction.NONE, True, False, False, False, None),
    ("conn_state", Direction.NONE, False, False, True, False, None),
    ("bwd_pkt_len_mean", Direction.BACKWARD, False, False, False, True, None),
    ("bwd_iat_mean", Direction.BACKWARD, False, False, False, True, None),
    ("ct_srv_dst", Direction.INTERFLOW, False, False, False, False, None),
    ("fwd_pkts", Direction.FORWARD, False, False, False, False, None),
    ("fwd_bytes", Direction.FORWARD, False, False, False, False, None),
    ("fwd_payload", Direction.FORWARD, False, False, False, False, None),
    ("bwd_bytes", Direction.BACKWARD, False, False, False, False, None),
    ("bwd_pkts", Direction.BACKWARD, False, False, False, False, None),
    ("fwd_flag_count", Direction.FORWARD, False, False, False, True, None),
    ("fwd_iat_mean", Direction.FORWARD, False, False, False, True, None),
    ("duration", Direction.BIDIRECTIONAL, False, False, False, False, None),
    ("fwd_ttl", Direction.FORWARD, False, False, False, False, 256),
)

FEATURE_NAMES = tuple(f[0] for f in _FEATURES)


def synthetic_catalog():
    return MetadataCatalog(
        tuple(
            FeatureMetadata(
                name=name,
                direction=direction,
                is_protocol_id=c1,
                is_critical_identifier=c2,
                is_functional_integrity=c3,
                is_flow_wide_aggregate=flow_wide,
                declared_cardinality=declared,
            )
            for name, direction, c1, c2, c3, flow_wide, declared in _FEATURES
        )
    )


def synthetic_morph_map():
    """Traffic morphs and the generated columns they move"""
    return MorphMap(
        (
            MorphEntry(
                "payload-padding", ("fwd_bytes", "fwd_payload"), MorphDirection.INCREASE
            ),
            MorphEntry(
                "packet-duplication", ("fwd_pkts", "fwd_bytes"), MorphDirection.INCREASE
            ),
            MorphEntry(
                "inter-packet-delay",
                ("fwd_iat_mean", "duration"),
                MorphDirection.INCREASE,
            ),
            MorphEntry("ttl-rewrite", ("fwd_ttl",), MorphDirection.EITHER),
        )
    )


def generate_flows(n_rows=DEFAULT_ROWS, seed=0):
    """Labeled flow table, label 1 for malicious rows

    Raises
    ------
    UsageError
        For fewer than 100 rows.
    """
    if n_rows < MIN_ROWS:
        raise UsageError(f"need at least {MIN_ROWS} rows, got {n_rows}")
    rng = np.random.default_rng(seed)
    n = int(n_rows)
    y = (rng.random(n) < MALICIOUS_SHARE).astype(np.int64)
    mal = y == 1

    dst_port = np.where(
        mal,
        rng.choice(MALICIOUS_PORTS, n),
        rng.choice(BENIGN_PORTS, n, p=BENIGN_PORT_WEIGHTS),
    )
    protocol = np.where(rng.random(n) < 0.8, 6, 17)
    conn_state = rng.integers(0, 5, n)

    bwd_pkt_len_mean = rng.normal(np.where(mal, 300.0, 600.0), 100.0)
    bwd_iat_mean = rng.normal(np.where(mal, 25.0, 50.0), 10.0)
    ct_srv_dst = rng.poisson(np.where(mal, 15.0, 5.0))

    # forward volume cluster, backward volume echoes it loosely
    volume = rng.normal(np.where(mal, 0.8, 0.0), 1.0)
    fwd_pkts = np.maximum(1, np.round(500 + 150 * volume + rng.normal(0, 20, n)))
    fwd_bytes = np.maximum(0, np.round(400 * fwd_pkts + rng.normal(0, 8000, n)))
    fwd_payload = np.maximum(
        0, np.round(fwd_bytes - 40 * fwd_pkts + rng.normal(0, 4000, n))
    )
    bwd_bytes = np.maximum(0, np.round(0.5 * fwd_bytes + rng.normal(0, 5000, n)))
    bwd_pkts = np.maximum(1, np.round(0.8 * fwd_pkts + rng.normal(0, 15, n)))
    fwd_flag_count = rng.integers(0, 10, n)

    fwd_iat_mean = np.maximum(0.01, rng.normal(np.where(mal, 0.7, 1.0), 0.3))
    duration = np.maximum(0.01, rng.normal(np.where(mal, 8.0, 10.0), 3.0))
    fwd_ttl = 64 - np.where(mal, rng.integers(5, 26, n), rng.integers(0, 21, n))

    columns = {
        "dst_port": dst_port,
        "protocol": protocol,
        "conn_state": conn_state,
        "bwd_pkt_len_mean": bwd_pkt_len_mean,
        "bwd_iat_mean": bwd_iat_mean,
        "ct_srv_dst": ct_srv_dst,
        "fwd_pkts": fwd_pkts.astype(np.int64),
        "fwd_bytes": fwd_bytes.astype(np.int64),
        "fwd_payload": fwd_payload.astype(np.int64),
        "bwd_bytes": bwd_bytes.astype(np.int64),
        "bwd_pkts": bwd_pkts.astype(np.int64),
        "fwd_flag_count": fwd_flag_count,
        "fwd_iat_mean": fwd_iat_mean,
        "duration": duration,
        "fwd_ttl": fwd_ttl,
    }
    df = pd.DataFrame({name: columns[name] for name in FEATURE_NAMES})
    df[LABEL_COLUMN] = y
    lgr.debug(
        "Generated %d flows (%d malicious) with seed %d", n, int(y.sum()), seed
    )
    return df


def write_synthetic(out_dir, n_rows=DEFAULT_ROWS, seed=0):
    """Write ``flows.csv``, ``catalog.json`` and ``morphs.json``

    Returns
    -------
    dict
        Artifact name -> path.
    """
    out_dir = Path(out_dir)
    df = generate_flows(n_rows, seed)
    paths = {
        "flows": out_dir / "flows.csv",
        "catalog": out_dir / "catalog.json",
        "morphs": out_dir / "morphs.json",
    }
    atomic_write(
        paths["flows"],
        df.to_csv(index=False, float_format="%.6f", lineterminator="\n"),
    )
    dump_catalog(synthetic_catalog(), paths["catalog"])
    atomic_write(paths["morphs"], json.dumps(synthetic_morph_map().to_list(), indent=2))
    lgr.info("Wrote %d synthetic flows to %s", len(df), out_dir)
    return paths
