"""Seed construction and manifold-ranking propagation over the unit graph.

Scores solve the ranking energy

    E(g) = 1/2 * ( sum_{(i,j) in E} w_ij * (g_i/sqrt(d_ii) - g_j/sqrt(d_jj))^2
                   + mu * sum_i (g_i - q_i)^2 )

whose closed form is implemented as written in the manifold-ranking
literature,

    g* = (I - S / (1 + mu))^{-1} q,    S = D^{-1/2} W D^{-1/2}.

The exact minimizer of E is mu/(1+mu) * g*; since scores are min-max
normalized before use, the missing scalar never affects rankings.
``verify_stationarity`` checks that relationship: the energy gradient
vanishes at the rescaled point.

Zero-degree rows of S are defined as zero (convention d^{-1/2} = 0 when
d = 0), so isolated units keep their seed value. The energy is handled
through its matrix form 1/2 h'(I-S)h + mu/2 ||h-q||^2, which equals the
pairwise sum wherever degrees are positive and keeps the identity
diagonal on zero-degree rows, so the stationarity identity holds for
isolated units too. Zero degrees do occur in practice: the RBF kernel
underflows to exact zero once squared feature distances exceed about
700 * rho, so a unit far from all its neighbors in feature space is
isolated and keeps its seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import DataError
from .graph import SaliencyGraph
from .segmentation import LabelVolume
from .volume import VideoVolume

log = logging.getLogger("salgraph")

DEFAULT_MU = 0.1

_OTSU_BINS = 256


@dataclass(frozen=True)
class SeedVector:
    """Initial per-unit saliency from coarse foreground segmentation."""

    q: np.ndarray
    empty: bool = False  # true when no unit received any seed mass


@dataclass(frozen=True)
class PropagationConfig:
    mu: float = DEFAULT_MU
    solver: str = "direct"  # "direct" or "iterative"
    iter_tol: float = 1e-9
    max_iter: int = 10000

    def __post_init__(self):
        if self.mu <= 0:
            raise DataError(f"mu must be > 0, got {self.mu}")
        if self.solver not in ("direct", "iterative"):
            raise DataError(f"unknown solver '{self.solver}'")
        if self.iter_tol <= 0:
            raise DataError(f"iter_tol must be > 0, got {self.iter_tol}")


@dataclass(frozen=True)
class SaliencyScores:
    g: np.ndarray
    degenerate: bool = False  # true when normalization saw a constant vector


def otsu_threshold(values: np.ndarray, bins: int = _OTSU_BINS) -> float | None:
    """Between-class-variance-maximizing threshold, or None if degenerate."""
    values = values.ravel()
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return None
    hist, edges = np.histogram(values, bins=bins, range=(lo, hi))
    hist = hist.astype(np.float64)
    centers = 0.5 * (edges[:-1] + edges[1:])

    weight0 = np.cumsum(hist)
    weight1 = weight0[-1] - weight0
    mass0 = np.cumsum(hist * centers)
    mass1 = mass0[-1] - mass0
    with np.errstate(invalid="ignore", divide="ignore"):
        mean0 = np.where(weight0 > 0, mass0 / weight0, 0.0)
        mean1 = np.where(weight1 > 0, mass1 / weight1, 0.0)
    between = weight0 * weight1 * (mean0 - mean1) ** 2
    cut = int(np.argmax(between))
    return float(edges[cut + 1])


def compute_seed(lab: VideoVolume, labels: LabelVolume) -> SeedVector:
    """Seed q from temporal-median background subtraction.

    Per-pixel foreground strength is the LAB distance to the pixel's
    temporal median, thresholded by Otsu over the whole volume; q_i is
    the foreground fraction of unit i. A single-frame video has no
    temporal support and yields a uniform seed; a static video yields an
    empty, flagged seed.
    """
    if lab.shape != labels.shape:
        raise DataError(f"volume shape {lab.shape} != label shape {labels.shape}")
    n = labels.unit_count
    if lab.frames < 2:
        log.warning("single-frame input: background model unavailable, using uniform seed")
        return SeedVector(np.full(n, 1.0 / n), empty=False)

    data = lab.data.astype(np.float64)
    background = np.median(data, axis=0)
    diff = np.sqrt(((data - background[None]) ** 2).sum(axis=3))

    tau = otsu_threshold(diff)
    if tau is None:
        log.warning("empty seed: no temporal change detected")
        return SeedVector(np.zeros(n), empty=True)
    foreground = diff > tau

    flat = labels.labels.ravel()
    fg_counts = np.bincount(flat, weights=foreground.ravel().astype(np.float64), minlength=n)
    sizes = np.bincount(flat, minlength=n)
    q = fg_counts / sizes
    if not q.any():
        log.warning("empty seed: threshold removed all foreground")
        return SeedVector(q, empty=True)
    return SeedVector(q, empty=False)


def _normalized_affinity(graph: SaliencyGraph) -> sparse.csr_matrix:
    """S = D^{-1/2} W D^{-1/2} with zero rows where the degree is zero."""
    d_inv_sqrt = np.where(graph.degrees > 0, graph.degrees, 1.0) ** -0.5
    d_inv_sqrt[graph.degrees <= 0] = 0.0
    scale = sparse.diags(d_inv_sqrt)
    return (scale @ graph.affinity @ scale).tocsr()


def solve_closed_form(graph: SaliencyGraph, seed: SeedVector,
                      cfg: PropagationConfig) -> SaliencyScores:
    """Solve (I - S/(1+mu)) g = q by sparse direct or fixed-point iteration.

    The system is always nonsingular for mu > 0: the spectral radius of S
    is at most 1, strictly below 1 + mu.
    """
    assert cfg.mu > 0
    n = graph.node_count
    q = np.asarray(seed.q, dtype=np.float64)
    if q.shape != (n,):
        raise DataError(f"seed length {q.shape} != node count {n}")
    alpha = 1.0 / (1.0 + cfg.mu)
    s_matrix = _normalized_affinity(graph)

    if cfg.solver == "direct":
        system = (sparse.identity(n, format="csc") - alpha * s_matrix).tocsc()
        g = spsolve(system, q)
        g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    else:
        g = q.copy()
        for _ in range(cfg.max_iter):
            g_next = alpha * (s_matrix @ g) + q
            residual = np.abs(g_next - alpha * (s_matrix @ g_next) - q).max() if n else 0.0
            g = g_next
            if residual <= cfg.iter_tol:
                break
        else:
            raise RuntimeError(
                f"iterative solver did not reach tol {cfg.iter_tol} in {cfg.max_iter} iterations"
            )
    return SaliencyScores(g)


def ranking_energy(graph: SaliencyGraph, seed: SeedVector, mu: float,
                   h: np.ndarray) -> float:
    """The ranking energy E(h) in matrix form.

    Equals the pairwise smoothness sum (each unordered edge once) plus
    the fit term wherever degrees are positive; zero-degree coordinates
    contribute h_i^2 / 2 through the identity diagonal.
    """
    d_inv_sqrt = np.where(graph.degrees > 0, graph.degrees, 1.0) ** -0.5
    d_inv_sqrt[graph.degrees <= 0] = 0.0
    u = d_inv_sqrt * h
    if graph.edge_count:
        triu = sparse.triu(graph.affinity, k=1).tocoo()
        smooth = float(np.sum(triu.data * (u[triu.row] - u[triu.col]) ** 2))
    else:
        smooth = 0.0
    smooth += float(np.sum(h[graph.degrees <= 0] ** 2))
    fit = float(np.sum((h - seed.q) ** 2))
    return 0.5 * (smooth + mu * fit)


def energy_gradient(graph: SaliencyGraph, seed: SeedVector, mu: float,
                    h: np.ndarray) -> np.ndarray:
    """Analytic gradient of ``ranking_energy``: (I - S) h + mu (h - q)."""
    d_inv_sqrt = np.where(graph.degrees > 0, graph.degrees, 1.0) ** -0.5
    d_inv_sqrt[graph.degrees <= 0] = 0.0
    u = d_inv_sqrt * h
    smooth = h - d_inv_sqrt * (graph.affinity @ u)
    return smooth + mu * (h - seed.q)


def verify_stationarity(graph: SaliencyGraph, seed: SeedVector,
                        cfg: PropagationConfig, scores: SaliencyScores) -> float:
    """Max-norm of the energy gradient at the rescaled solution.

    The closed form times mu/(1+mu) is the exact energy minimizer, so
    this residual is zero up to solver and float error.
    """
    h = (cfg.mu / (1.0 + cfg.mu)) * scores.g
    return float(np.abs(energy_gradient(graph, seed, cfg.mu, h)).max())


def normalize_scores(scores: SaliencyScores) -> SaliencyScores:
    """Min-max rescale to [0, 1]; a constant vector maps to all 0.5, flagged."""
    g = np.asarray(scores.g, dtype=np.float64)
    if not np.isfinite(g).all():
        raise DataError("non-finite saliency scores")
    lo = g.min()
    hi = g.max()
    if hi <= lo:
        return SaliencyScores(np.full_like(g, 0.5), degenerate=True)
    return SaliencyScores((g - lo) / (hi - lo), degenerate=False)


def dump_vector(vec: np.ndarray, path: str | Path) -> None:
    """Debug dump: one value per line, full float precision."""
    with open(path, "w") as fh:
        for v in np.asarray(vec).ravel():
            fh.write(f"{float(v):.17g}\n")
