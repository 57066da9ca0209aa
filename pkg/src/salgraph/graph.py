"""Spatiotemporal adjacency graph over units with RBF affinities.

Two units are adjacent when any of their voxels are lattice neighbors,
in space or across consecutive frames. Edge weights follow
``exp(-||f_i - f_j||^2 / rho)``; the affinity matrix is zero off the
adjacency pattern and on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DataError
from .features import UnitFeatureTable
from .segmentation import LabelVolume, adjacent_label_pairs

DEFAULT_RHO = 0.1


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel parameters.

    ``scale_by_dim`` divides squared feature distances by the descriptor
    dimension so that high-dimensional deep descriptors produce kernel
    responses on the same scale as 3-channel color descriptors.
    """

    rho: float = DEFAULT_RHO
    scale_by_dim: bool = False

    def __post_init__(self):
        if self.rho <= 0:
            raise DataError(f"rho must be > 0, got {self.rho}")


@dataclass(frozen=True)
class SaliencyGraph:
    """Undirected unit graph with symmetric sparse affinity matrix."""

    node_count: int
    edges: np.ndarray  # (E, 2) unit id pairs, i < j
    affinity: sparse.csr_matrix
    degrees: np.ndarray

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def compute_adjacency(labels: LabelVolume, connectivity: int = 6) -> np.ndarray:
    """Edge set of the unit graph: pairs touching along the voxel lattice."""
    return adjacent_label_pairs(labels.labels, connectivity)


def rbf_affinity(f_i: np.ndarray, f_j: np.ndarray, params: KernelParams) -> float:
    """Kernel similarity of two descriptors, in (0, 1]."""
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise DataError(f"descriptor dimension mismatch: {f_i.shape} vs {f_j.shape}")
    d2 = float(np.sum((f_i - f_j) ** 2))
    if params.scale_by_dim:
        d2 /= f_i.size
    return math.exp(-d2 / params.rho)


def build_affinity(features: UnitFeatureTable, edges: np.ndarray,
                   params: KernelParams) -> SaliencyGraph:
    """Populate the affinity matrix on exactly the given edge set."""
    n = features.unit_count
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and edges.max() >= n:
        raise DataError(
            f"edge references unit {int(edges.max())} but only {n} descriptors exist"
        )
    if len(edges):
        diff = features.rows[edges[:, 0]] - features.rows[edges[:, 1]]
        d2 = np.einsum("ij,ij->i", diff, diff)
        if params.scale_by_dim:
            d2 = d2 / features.channels
        weights = np.exp(-d2 / params.rho)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        vals = np.concatenate([weights, weights])
        affinity = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    else:
        affinity = sparse.csr_matrix((n, n))
    degrees = np.asarray(affinity.sum(axis=1)).ravel()
    return SaliencyGraph(n, edges, affinity, degrees)


def dump_affinity(graph: SaliencyGraph, path: str | Path) -> None:
    """Debug dump of W in coordinate text form: one ``i j w`` line per edge."""
    coo = sparse.triu(graph.affinity, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.12g}\n")
