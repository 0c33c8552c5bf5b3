"""Input validation helpers shared by the estimator and the IO layer."""

from __future__ import annotations

import numpy as np


def check_feature_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_labels(y, n: int, allow_unlabeled: bool = True) -> np.ndarray:
    """Integer labels of length n; -1 marks an unlabeled node when allowed."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(y, dtype=np.float64)
        if not np.all(yf == np.round(yf)):
            raise ValueError("y must contain integer class labels")
        y = yf.astype(np.int64)
    y = y.astype(np.int64)
    floor = -1 if allow_unlabeled else 0
    if y.min() < floor:
        raise ValueError(f"labels must be >= {floor}")
    return y


def check_edge_list(edges, n: int) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        return edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError("edges must be an (m, 2) array of index pairs")
    if edges.min() < 0 or edges.max() >= n:
        raise ValueError(f"edge indices must be in [0, {n})")
    return edges


def check_index_set(idx, n: int, name: str) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"{name} must be a 1D index array")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} contains out-of-range indices")
    if np.unique(idx).size != idx.size:
        raise ValueError(f"{name} contains duplicate indices")
    return np.sort(idx)
