"""Pearson correlation analysis over flow features"""

__docformat__ = "restructuredtext"

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .metadata import Direction

lgr = logging.getLogger("datalad.perturb.correlation")


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    feature_names: tuple
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        r = np.array(self.r, dtype=np.float64)
        if r.shape != (len(self.feature_names),) * 2:
            raise DataError(
                f"correlation matrix of shape {r.shape} does not match "
                f"{len(self.feature_names)} features"
            )
        r.setflags(write=False)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """Per-feature high-correlation counts at a given threshold"""

    feature_names: tuple
    cf: np.ndarray
    forward_corr_count: np.ndarray
    threshold: float

    def __post_init__(self):
        if np.any(self.forward_corr_count > self.cf):
            raise DataError("forward correlation count exceeds total count")


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    abs_r: float


@dataclass(frozen=True)
class CorrelationGraph:
    """Undirected threshold graph over features"""

    nodes: tuple
    edges: tuple
    threshold: float

    def clusters(self):
        """Connected components with at least one edge

        Ordered by decreasing size, then by position of the first member.
        """
        position = {n: i for i, n in enumerate(self.nodes)}
        parent = {n: n for n in self.nodes}

        def find(n):
            while parent[n] != n:
                parent[n] = parent[parent[n]]
                n = parent[n]
            return n

        for e in self.edges:
            ra, rb = find(e.a), find(e.b)
            if ra != rb:
                parent[max(ra, rb, key=position.get)] = min(ra, rb, key=position.get)
        groups = {}
        for n in self.nodes:
            groups.setdefault(find(n), []).append(n)
        comps = [g for g in groups.values() if len(g) > 1]
        return sorted(comps, key=lambda g: (-len(g), position[g[0]]))


def pearson_matrix(dataset):
    """Pearson correlation matrix using population moments

    Pairs involving a constant column are defined as uncorrelated (r = 0).
    """
    x = dataset.x
    if x.shape[0] < 2:
        raise DataError("correlation needs at least 2 rows", module="correlation")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    std = np.sqrt(np.diag(cov))
    constant = np.ptp(x, axis=0) == 0
    denom = np.outer(std, std)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrMatrix(dataset.feature_names, r)


def _strong(matrix, corr_threshold):
    strong = np.abs(matrix.r) >= corr_threshold
    np.fill_diagonal(strong, False)
    return strong


def high_corr_counts(matrix, corr_threshold):
    """Count, per feature, the other features with |r| >= threshold

    Examples
    --------
    >>> m = CorrMatrix(("a", "b"), [[1.0, 0.9], [0.9, 1.0]])
    >>> high_corr_counts(m, 0.8).tolist()
    [1, 1]
    """
    return _strong(matrix, corr_threshold).sum(axis=1).astype(np.int64)


def forward_corr_profile(matrix, catalog, corr_threshold):
    """Count, per feature, the forward features with |r| >= threshold"""
    if len(catalog) != len(matrix.feature_names):
        raise DataError(
            f"catalog has {len(catalog)} entries for {len(matrix.feature_names)} "
            "matrix features",
            module="correlation",
        )
    meta = catalog.align(matrix.feature_names)
    forward = np.array([m.direction is Direction.FORWARD for m in meta])
    return (_strong(matrix, corr_threshold) & forward[None, :]).sum(axis=1).astype(
        np.int64
    )


def build_profile(matrix, catalog, corr_threshold):
    cf = high_corr_counts(matrix, corr_threshold)
    fwd = forward_corr_profile(matrix, catalog, corr_threshold)
    lgr.debug(
        "%d feature pairs with |r| >= %s", int(cf.sum()) // 2, corr_threshold
    )
    return CorrelationProfile(matrix.feature_names, cf, fwd, corr_threshold)


def export_graph(matrix, corr_threshold):
    names = matrix.feature_names
    strong = _strong(matrix, corr_threshold)
    edges = tuple(
        Edge(names[i], names[j], float(abs(matrix.r[i, j])))
        for i, j in zip(*np.nonzero(np.triu(strong, k=1)))
    )
    return CorrelationGraph(names, edges, corr_threshold)
