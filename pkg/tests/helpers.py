"""Shared synthetic fixtures and independent test oracles.

Oracles here reimplement checks from scratch (dense algebra, brute-force
loops, rank statistics) and must stay independent of the library code
paths they verify.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import sparse
from scipy.stats import rankdata

from salgraph.graph import SaliencyGraph


def write_frames(dir_path, frames) -> None:
    """Write a (t, m, n, 3) uint8 array as numbered PNG frames."""
    dir_path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(np.asarray(frame, dtype=np.uint8), "RGB").save(
            dir_path / f"frame_{i:05d}.png"
        )


def write_masks(dir_path, masks) -> None:
    """Write a (t, m, n) 0/1 array as grayscale PNG masks."""
    dir_path.mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(masks):
        Image.fromarray((np.asarray(mask) * 255).astype(np.uint8), "L").save(
            dir_path / f"frame_{i:05d}.png"
        )


def moving_square_clip(m=32, n=32, t=16, side=6, step=1, x0=4, y0=13):
    """Red square sliding over a static textured gray background.

    Returns ((t, m, n, 3) uint8 frames, (t, m, n) uint8 ground truth).
    The square moves slowly enough that every pixel sees the background
    for most frames, so the temporal median is clean background.
    """
    yy, xx = np.mgrid[0:m, 0:n]
    texture = 110 + 18 * np.sin(2 * np.pi * xx / 8.0) * np.cos(2 * np.pi * yy / 8.0)
    background = np.clip(texture, 0, 255).astype(np.uint8)
    frames = np.zeros((t, m, n, 3), dtype=np.uint8)
    gt = np.zeros((t, m, n), dtype=np.uint8)
    for f in range(t):
        frame = np.stack([background] * 3, axis=-1).copy()
        x = x0 + step * f
        frame[y0:y0 + side, x:x + side] = (220, 40, 30)
        frames[f] = frame
        gt[f, y0:y0 + side, x:x + side] = 1
    return frames, gt


def graph_from_edges(n: int, edges: np.ndarray, weights: np.ndarray) -> SaliencyGraph:
    """Assemble a SaliencyGraph directly from an (E, 2) edge list."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        vals = np.concatenate([weights, weights])
        affinity = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    else:
        affinity = sparse.csr_matrix((n, n))
    degrees = np.asarray(affinity.sum(axis=1)).ravel()
    return SaliencyGraph(n, edges, affinity, degrees)


def random_graph(rng: np.random.Generator, n: int, extra_edges: int = 0):
    """Random spanning tree plus extra edges; no isolated nodes for n >= 2."""
    edge_set = set()
    if n > 1:
        perm = rng.permutation(n)
        for i in range(1, n):
            a = int(perm[rng.integers(0, i)])
            b = int(perm[i])
            edge_set.add((min(a, b), max(a, b)))
    for _ in range(extra_edges):
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if a != b:
            edge_set.add((min(a, b), max(a, b)))
    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    weights = rng.uniform(0.05, 1.0, size=len(edges))
    return edges, weights


def dense_solve_oracle(graph: SaliencyGraph, q: np.ndarray, mu: float) -> np.ndarray:
    """Dense-inverse reference for the ranking solve."""
    n = graph.node_count
    w = graph.affinity.toarray()
    d = w.sum(axis=1)
    d_inv_sqrt = np.zeros(n)
    np.divide(1.0, np.sqrt(d), out=d_inv_sqrt, where=d > 0)
    s = np.outer(d_inv_sqrt, d_inv_sqrt) * w
    return np.linalg.solve(np.eye(n) - s / (1.0 + mu), q)


def energy_oracle(graph: SaliencyGraph, q: np.ndarray, mu: float, h: np.ndarray) -> float:
    """Brute-force ranking energy: explicit loop over unordered pairs."""
    w = graph.affinity.toarray()
    d = w.sum(axis=1)
    d_inv_sqrt = np.zeros(len(h))
    np.divide(1.0, np.sqrt(d), out=d_inv_sqrt, where=d > 0)
    smooth = 0.0
    for i in range(len(h)):
        for j in range(i + 1, len(h)):
            if w[i, j] > 0:
                smooth += w[i, j] * (h[i] * d_inv_sqrt[i] - h[j] * d_inv_sqrt[j]) ** 2
    return 0.5 * (smooth + mu * float(np.sum((h - q) ** 2)))


def fd_gradient(fn, h: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    grad = np.zeros_like(h, dtype=np.float64)
    for i in range(len(h)):
        hp = h.copy()
        hm = h.copy()
        hp[i] += eps
        hm[i] -= eps
        grad[i] = (fn(hp) - fn(hm)) / (2.0 * eps)
    return grad


def rank_auc_oracle(pos: np.ndarray, neg: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    ranks = rankdata(np.concatenate([pos, neg]))
    r_pos = ranks[: len(pos)].sum()
    u = r_pos - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def check_partition(layer, connectivity: int = 6) -> None:
    """Assert coverage, label density, and per-unit connectivity."""
    from scipy import ndimage

    labels = layer.labels
    assert labels.min() >= 0
    assert labels.max() == layer.unit_count - 1
    sizes = np.bincount(labels.ravel(), minlength=layer.unit_count)
    assert (sizes >= 1).all(), "every label must occur at least once"
    assert sizes.sum() == labels.size, "labels must cover every voxel"

    if connectivity == 6:
        structure = ndimage.generate_binary_structure(3, 1)
    else:
        structure = ndimage.generate_binary_structure(3, 3)
    for unit in range(layer.unit_count):
        _, parts = ndimage.label(labels == unit, structure=structure)
        assert parts == 1, f"unit {unit} splits into {parts} components"


def check_nesting(fine, coarse) -> None:
    """Assert every fine unit lies inside exactly one coarse unit."""
    pairs = np.unique(
        np.stack([fine.labels.ravel(), coarse.labels.ravel()], axis=1), axis=0
    )
    assert len(pairs) == fine.unit_count, "a fine unit crosses a coarse boundary"
