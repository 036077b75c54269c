import numpy as np
import pytest

from datalad_perturb.dataset_io import Dataset
from datalad_perturb.metadata import (
    FeatureMetadata,
    MetadataCatalog,
)
from datalad_perturb.synthetic import write_synthetic

SYNTH_ROWS = 2000
# size at which the defense grid is held to its accuracy and ASR targets
FULL_ROWS = 5000


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """flows.csv, catalog.json and morphs.json of a default-seed synthetic set"""
    out = tmp_path_factory.mktemp("synth")
    write_synthetic(out, SYNTH_ROWS, seed=0)
    return out


@pytest.fixture(scope="session")
def synth_full_dir(tmp_path_factory):
    """Like `synth_dir`, with FULL_ROWS rows"""
    out = tmp_path_factory.mktemp("synth-full")
    write_synthetic(out, FULL_ROWS, seed=0)
    return out


@pytest.fixture
def separable():
    """Two features, the first one separates the classes with a margin"""
    rng = np.random.default_rng(7)
    n = 200
    y = np.arange(n) % 2
    x0 = np.where(y == 1, 1.0, -1.0) * (1.0 + rng.random(n))
    x1 = rng.normal(0.0, 1.0, n)
    return Dataset(("signal", "noise"), np.column_stack([x0, x1]), y)


@pytest.fixture
def xor():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.0, 1.0, size=(2000, 2))
    pts = pts[np.all(np.abs(pts) > 0.2, axis=1)][:400]
    y = (pts[:, 0] * pts[:, 1] > 0).astype(np.int64)
    return Dataset(("u", "v"), pts, y)


@pytest.fixture
def tiny_catalog():
    """Pinned, flow-wide forward and plain forward feature"""
    return MetadataCatalog(
        (
            FeatureMetadata("proto", is_protocol_id=True),
            FeatureMetadata(
                "flags", direction="forward", is_flow_wide_aggregate=True
            ),
            FeatureMetadata("bytes", direction="forward"),
        )
    )
