import numpy as np
import pytest

from datalad_perturb.correlation import (
    CorrelationProfile,
    CorrMatrix,
    build_profile,
    export_graph,
    forward_corr_profile,
    high_corr_counts,
    pearson_matrix,
)
from datalad_perturb.dataset_io import Dataset
from datalad_perturb.exceptions import DataError
from datalad_perturb.metadata import (
    FeatureMetadata,
    MetadataCatalog,
)


def _dataset():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    return Dataset(
        ("a", "twice_a", "neg_a", "flat", "wiggle"),
        np.column_stack(
            [a, 2 * a + 1, -a, np.full(6, 3.0), [1.0, -1.0, 1.0, -1.0, 1.0, -1.0]]
        ),
        np.zeros(6, dtype=int),
    )


def test_pearson_matrix():
    m = pearson_matrix(_dataset())
    r = m.r
    assert r.shape == (5, 5)
    np.testing.assert_array_equal(r, r.T)
    np.testing.assert_array_equal(np.diag(r), 1.0)
    assert r[0, 1] == pytest.approx(1.0)
    assert r[0, 2] == pytest.approx(-1.0)
    # a constant column correlates with nothing
    np.testing.assert_array_equal(r[3, [0, 1, 2, 4]], 0.0)
    assert np.all(np.abs(r) <= 1.0)


def test_pearson_needs_two_rows():
    with pytest.raises(DataError):
        pearson_matrix(Dataset(("a",), [[1.0]], [0]))


def test_threshold_is_inclusive():
    m = CorrMatrix(("a", "b", "c"), [[1.0, 0.8, 0.0], [0.8, 1.0, -0.85], [0.0, -0.85, 1.0]])
    assert high_corr_counts(m, 0.8).tolist() == [1, 2, 1]
    assert high_corr_counts(m, 0.81).tolist() == [0, 1, 1]


def test_forward_profile():
    m = CorrMatrix(
        ("fwd", "bwd", "other"),
        [[1.0, 0.9, 0.9], [0.9, 1.0, 0.9], [0.9, 0.9, 1.0]],
    )
    catalog = MetadataCatalog(
        (
            FeatureMetadata("bwd", direction="backward"),
            FeatureMetadata("fwd", direction="forward"),
            FeatureMetadata("other", direction="bidirectional"),
        )
    )
    assert forward_corr_profile(m, catalog, 0.8).tolist() == [0, 1, 1]
    profile = build_profile(m, catalog, 0.8)
    assert profile.cf.tolist() == [2, 2, 2]
    assert np.all(profile.forward_corr_count <= profile.cf)
    with pytest.raises(DataError):
        forward_corr_profile(m, MetadataCatalog(catalog.entries[:2]), 0.8)


def test_profile_invariant():
    with pytest.raises(DataError):
        CorrelationProfile(("a",), np.array([0]), np.array([1]), 0.8)


def test_export_graph():
    m = pearson_matrix(_dataset())
    graph = export_graph(m, 0.8)
    assert {(e.a, e.b) for e in graph.edges} == {
        ("a", "twice_a"),
        ("a", "neg_a"),
        ("twice_a", "neg_a"),
    }
    assert all(e.abs_r >= 0.8 for e in graph.edges)
    assert graph.clusters() == [["a", "twice_a", "neg_a"]]
    # every above-threshold pair is one edge
    assert len(graph.edges) == int(high_corr_counts(m, 0.8).sum()) // 2


def _random_dataset(rng, n_rows=20, n_cols=6):
    x = rng.normal(size=(n_rows, n_cols))
    # mix columns so that some pairs correlate strongly
    x[:, 1] = x[:, 0] + 0.1 * x[:, 1]
    x[:, 3] = -2.0 * x[:, 2] + 0.5 * x[:, 3]
    return Dataset(tuple(f"f{i}" for i in range(n_cols)), x, np.zeros(n_rows, dtype=int))


def _two_pass_pearson(x):
    n_cols = x.shape[1]
    mean = [sum(x[:, j]) / len(x) for j in range(n_cols)]
    r = np.empty((n_cols, n_cols))
    for i in range(n_cols):
        for j in range(n_cols):
            di = x[:, i] - mean[i]
            dj = x[:, j] - mean[j]
            r[i, j] = np.sum(di * dj) / np.sqrt(np.sum(di * di) * np.sum(dj * dj))
    return r


@pytest.mark.parametrize("seed", range(10))
def test_pearson_matches_two_pass(seed):
    ds = _random_dataset(np.random.default_rng(seed))
    r = pearson_matrix(ds).r
    np.testing.assert_allclose(r, _two_pass_pearson(ds.x), rtol=0, atol=1e-9)
    assert np.all(np.abs(r) <= 1.0 + 1e-12)


def test_high_corr_counts_shrink_with_threshold():
    ds = _random_dataset(np.random.default_rng(42), n_rows=50, n_cols=8)
    m = pearson_matrix(ds)
    thresholds = np.linspace(0.0, 1.0, 41)
    counts = np.array([high_corr_counts(m, t) for t in thresholds])
    assert np.all(np.diff(counts, axis=0) <= 0)
    assert counts[0].tolist() == [7] * 8
