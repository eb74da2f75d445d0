"""Normalized coordinate grids and geometric compatibility scoring.

Each spatial cell of an H x W feature map gets a coordinate pair in
[-1, 1]^2, an affine embedding of that pair, and a dot-product score
against per-cluster spatial-preference embeddings. The scores are added
to feature similarities with a scalar weight, which is the single switch
that turns geometric awareness on or off.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError


def coord_grid(h: int, w: int) -> np.ndarray:
    """(h*w, 2) normalized coordinates, x-major ordering.

    Cell (x, y) maps to [2x/(h-1) - 1, 2y/(w-1) - 1]; a singleton axis
    contributes 0 instead of dividing by zero. Row index is x * w + y,
    the ordering every downstream consumer of flattened maps follows.
    """
    if h < 1 or w < 1:
        raise DimensionError(f"grid dims must be >= 1, got {h}x{w}")
    xs = np.zeros(h) if h == 1 else 2.0 * np.arange(h) / (h - 1) - 1.0
    ys = np.zeros(w) if w == 1 else 2.0 * np.arange(w) / (w - 1) - 1.0
    grid = np.empty((h * w, 2))
    grid[:, 0] = np.repeat(xs, w)
    grid[:, 1] = np.tile(ys, h)
    return grid


def embed_coords(grid: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine per-location embedding: (n, 2) coords -> (n, d_g)."""
    grid = np.asarray(grid, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[1] != 2:
        raise DimensionError(f"coordinate grid must be (n, 2), got {grid.shape}")
    if weight.ndim != 2 or weight.shape[1] != 2:
        raise ConfigError(f"coordinate projection weight must be (d_g, 2), "
                          f"got {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ConfigError(f"coordinate projection bias must be ({weight.shape[0]},), "
                          f"got {bias.shape}")
    return grid @ weight.T + bias


def geo_scores(embeddings: np.ndarray, cluster_embeddings: np.ndarray) -> np.ndarray:
    """Dot-product compatibility: (m, n) from (n, d_g) and (m, d_g)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    cluster_embeddings = np.asarray(cluster_embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or cluster_embeddings.ndim != 2:
        raise DimensionError("embeddings must be 2-D matrices")
    if embeddings.shape[1] != cluster_embeddings.shape[1]:
        raise DimensionError(
            f"embedding widths differ: locations have {embeddings.shape[1]}, "
            f"clusters have {cluster_embeddings.shape[1]}")
    return cluster_embeddings @ embeddings.T


def fuse_scores(feature_scores: np.ndarray, geometric_scores: np.ndarray,
                lambda_g: float) -> np.ndarray:
    """Weighted sum of feature similarity and geometric compatibility."""
    feature_scores = np.asarray(feature_scores, dtype=np.float64)
    geometric_scores = np.asarray(geometric_scores, dtype=np.float64)
    if feature_scores.shape != geometric_scores.shape:
        raise DimensionError(
            f"score shapes differ: {feature_scores.shape} vs {geometric_scores.shape}")
    return feature_scores + float(lambda_g) * geometric_scores
