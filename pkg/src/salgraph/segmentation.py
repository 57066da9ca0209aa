"""Hierarchical spatiotemporal supervoxel segmentation.

The video lattice is segmented bottom-up. A weighted graph over voxels
(edges between lattice neighbors, weights = Euclidean LAB distance) is
partitioned with the Felzenszwalb-Huttenlocher merge criterion using the
adaptive threshold tau(C) = k / |C|, followed by a pass that absorbs
components below ``min_size`` into their lowest-weight neighbor.

Each further hierarchy level re-merges the current regions on their
region adjacency graph, where region distance is the chi-square distance
between per-channel LAB histograms (20 bins per channel) and the merge
threshold k doubles per level. Every layer is a partition into connected
units, and each unit of layer i+1 is a union of whole layer-i units.

All tie-breaking is by (weight, source id, target id), so identical
inputs and parameters always produce identical labelings.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import formats
from .errors import DataError
from .volume import VideoVolume

DEFAULT_K = 8.0
DEFAULT_MIN_SIZE = 100
DEFAULT_LEVELS = 10

HIST_BINS = 20
_HIST_RANGES = ((0.0, 100.0), (-128.0, 128.0), (-128.0, 128.0))


@dataclass(frozen=True)
class LabelVolume:
    """One segmentation layer: a unit id per voxel, ids dense in [0, N)."""

    labels: np.ndarray  # (t, m, n) integer
    unit_count: int

    def __post_init__(self):
        if self.labels.ndim != 3:
            raise DataError(f"label volume must be (t, m, n), got shape {self.labels.shape}")
        if self.unit_count < 1:
            raise DataError("unit_count must be >= 1")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def unit_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.unit_count)


@dataclass(frozen=True)
class SupervoxelHierarchy:
    """Nested partitions, layer 1 finest to layer ``layer_count`` coarsest."""

    layers: tuple[LabelVolume, ...]

    @property
    def layer_count(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class VoxelGraph:
    """Weighted lattice-neighbor graph over the voxels of one volume."""

    shape: tuple[int, int, int]  # (t, m, n)
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    @property
    def voxel_count(self) -> int:
        t, m, n = self.shape
        return t * m * n

    @property
    def edge_count(self) -> int:
        return len(self.weights)


def _lattice_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    if connectivity == 6:
        return [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    if connectivity == 26:
        # the 13 lexicographically positive neighbors; each pair counted once
        return [o for o in product((-1, 0, 1), repeat=3) if o > (0, 0, 0)]
    raise DataError(f"connectivity must be 6 or 26, got {connectivity}")


def _offset_slices(offset: tuple[int, int, int]):
    first, second = [], []
    for d in offset:
        if d >= 0:
            first.append(slice(0, -d if d else None))
            second.append(slice(d, None))
        else:
            first.append(slice(-d, None))
            second.append(slice(0, d))
    return tuple(first), tuple(second)


def adjacent_label_pairs(labels: np.ndarray, connectivity: int = 6) -> np.ndarray:
    """Unique (i, j) pairs of distinct labels on lattice-neighbor voxels, i < j."""
    pairs = []
    for offset in _lattice_offsets(connectivity):
        sl_a, sl_b = _offset_slices(offset)
        a = labels[sl_a].ravel()
        b = labels[sl_b].ravel()
        mask = a != b
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            pairs.append(np.stack([lo, hi], axis=1))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.concatenate(pairs), axis=0).astype(np.int64)


def build_voxel_graph(lab: VideoVolume, connectivity: int = 6) -> VoxelGraph:
    """One edge per neighboring voxel pair; weight = Euclidean LAB distance."""
    shape = lab.shape
    feat = lab.data.astype(np.float64).reshape(-1, lab.channels)
    idx = np.arange(feat.shape[0]).reshape(shape)
    srcs, dsts, wts = [], [], []
    for offset in _lattice_offsets(connectivity):
        sl_a, sl_b = _offset_slices(offset)
        a = idx[sl_a].ravel()
        b = idx[sl_b].ravel()
        if a.size == 0:
            continue
        d = feat[a] - feat[b]
        srcs.append(a)
        dsts.append(b)
        wts.append(np.sqrt(np.einsum("ij,ij->i", d, d)))
    if not srcs:
        return VoxelGraph(shape, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    return VoxelGraph(
        shape,
        np.concatenate(srcs),
        np.concatenate(dsts),
        np.concatenate(wts),
    )


class UnionFind:
    """Array-backed disjoint sets with union by size and path halving."""

    __slots__ = ("parent", "size", "count")

    def __init__(self, n: int, sizes: np.ndarray | None = None):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64) if sizes is None else sizes.astype(np.int64).copy()
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    def union(self, a: int, b: int) -> int:
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.count -= 1
        return a


def _dense_relabel(roots: np.ndarray) -> tuple[np.ndarray, int]:
    """Map arbitrary root ids to dense [0, N) in first-occurrence order."""
    uniq, first_idx, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(len(uniq))
    return rank[inverse], len(uniq)


def _fh_merge(
    n_nodes: int,
    sources: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    k: float,
    node_sizes: np.ndarray | None = None,
) -> UnionFind:
    """Run the FH merge sequence over edges in ascending (w, src, dst) order."""
    uf = UnionFind(n_nodes, sizes=node_sizes)
    threshold = k / uf.size.astype(np.float64)
    order = np.lexsort((targets, sources, weights))
    for e in order:
        a = uf.find(sources[e])
        b = uf.find(targets[e])
        if a == b:
            continue
        w = weights[e]
        if w <= threshold[a] and w <= threshold[b]:
            root = uf.union(a, b)
            threshold[root] = w + k / uf.size[root]
    return uf


def fh_segment(graph: VoxelGraph, k: float = DEFAULT_K,
               min_size: int = DEFAULT_MIN_SIZE) -> LabelVolume:
    """Segment the voxel graph into connected, disjoint, covering units.

    After the FH merge pass, components smaller than ``min_size`` are
    absorbed along their lowest-weight outgoing edges (edges revisited in
    ascending order), so no surviving unit with a neighbor stays under
    the size floor.
    """
    if k <= 0:
        raise DataError(f"k must be > 0, got {k}")
    if min_size < 1:
        raise DataError(f"min_size must be >= 1, got {min_size}")
    uf = _fh_merge(graph.voxel_count, graph.sources, graph.targets, graph.weights, k)

    order = np.lexsort((graph.targets, graph.sources, graph.weights))
    for e in order:
        a = uf.find(graph.sources[e])
        b = uf.find(graph.targets[e])
        if a != b and (uf.size[a] < min_size or uf.size[b] < min_size):
            uf.union(a, b)

    roots = np.fromiter((uf.find(v) for v in range(graph.voxel_count)),
                        dtype=np.int64, count=graph.voxel_count)
    labels, count = _dense_relabel(roots)
    return LabelVolume(labels.reshape(graph.shape), count)


def _unit_histograms(lab_data: np.ndarray, labels: np.ndarray, n_units: int) -> np.ndarray:
    """Per-unit LAB histograms as raw voxel counts, shape (N, 3, HIST_BINS)."""
    flat = labels.ravel()
    hist = np.zeros((n_units, 3, HIST_BINS), dtype=np.float64)
    for c in range(3):
        lo, hi = _HIST_RANGES[c]
        vals = lab_data[..., c].ravel().astype(np.float64)
        bins = np.clip(((vals - lo) * HIST_BINS / (hi - lo)).astype(np.int64), 0, HIST_BINS - 1)
        np.add.at(hist[:, c, :], (flat, bins), 1.0)
    return hist


def _chi_square_distances(hist: np.ndarray, sizes: np.ndarray,
                          i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Chi-square distance between size-normalized histograms of unit pairs."""
    hi = hist[i] / sizes[i, None, None]
    hj = hist[j] / sizes[j, None, None]
    num = (hi - hj) ** 2
    den = hi + hj
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return 0.5 * terms.sum(axis=(1, 2))


def build_hierarchy(lab: VideoVolume, base: LabelVolume, levels: int,
                    k: float = DEFAULT_K, connectivity: int = 6) -> SupervoxelHierarchy:
    """Grow ``levels`` nested layers above (and including) the base partition.

    Level i+1 re-runs FH merging on the level-i region adjacency graph
    with chi-square histogram distances and k doubled at each level.
    Region sizes are voxel counts, so tau(C) = k / |C| keeps its meaning
    across levels.
    """
    if levels < 1:
        raise DataError(f"levels must be >= 1, got {levels}")
    if lab.shape != base.shape:
        raise DataError(f"volume shape {lab.shape} != label shape {base.shape}")

    layers = [base]
    labels = base.labels
    n = base.unit_count
    hist = _unit_histograms(lab.data, labels, n)
    sizes = np.bincount(labels.ravel(), minlength=n).astype(np.int64)

    level_k = float(k)
    for _ in range(1, levels):
        level_k *= 2.0
        pairs = adjacent_label_pairs(labels, connectivity)
        if len(pairs) == 0:
            layers.append(LabelVolume(labels, n))
            continue
        i, j = pairs[:, 0], pairs[:, 1]
        w = _chi_square_distances(hist, sizes, i, j)
        uf = _fh_merge(n, i, j, w, level_k, node_sizes=sizes)

        root_of = np.fromiter((uf.find(r) for r in range(n)), dtype=np.int64, count=n)
        new_ids, new_n = _dense_relabel(root_of)
        labels = new_ids[labels]
        new_hist = np.zeros((new_n, 3, HIST_BINS), dtype=np.float64)
        np.add.at(new_hist, new_ids, hist)
        hist = new_hist
        sizes = np.bincount(new_ids, weights=sizes).astype(np.int64)
        n = new_n
        layers.append(LabelVolume(labels, n))

    return SupervoxelHierarchy(tuple(layers))


def select_layer(hierarchy: SupervoxelHierarchy, index: int) -> LabelVolume:
    """Pick a layer by 1-based index (1 = finest, layer_count = coarsest)."""
    if not 1 <= index <= hierarchy.layer_count:
        raise DataError(
            f"layer index {index} out of range [1, {hierarchy.layer_count}]"
        )
    return hierarchy.layers[index - 1]


def default_layer_index(layer_count: int) -> int:
    """Middle layer, rounding up."""
    return (layer_count + 1) // 2


def save_labels(path: str | Path, layer: LabelVolume) -> None:
    formats.write_lvol(path, layer.labels, layer.unit_count)


def load_labels(path: str | Path) -> LabelVolume:
    labels, unit_count = formats.read_lvol(path)
    return LabelVolume(labels, unit_count)
