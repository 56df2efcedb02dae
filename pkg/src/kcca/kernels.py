"""Gaussian RBF kernel, Gram matrices, and the median-trick bandwidth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RbfKernel:
    """Gaussian radial basis kernel exp(-||x - x'||^2 / (2 s^2))."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"bandwidth must be positive, got {self.s}")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d2 = _sq_distances(a, b)
        if b is a:
            d2 = 0.5 * (d2 + d2.T)
            np.fill_diagonal(d2, 0.0)
        return np.exp(d2 / (-2.0 * self.s**2))


@dataclass(frozen=True)
class LinearKernel:
    """Dot-product kernel; lets the dual solver be cross-checked against linear CCA."""

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        g = a @ b.T
        if b is a:
            g = 0.5 * (g + g.T)
        return g


def rbf_eval(k: RbfKernel, x, x2) -> float:
    """Kernel value between two vectors of equal dimension."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x2 = np.asarray(x2, dtype=np.float64).ravel()
    if x.shape != x2.shape:
        raise ValueError(f"vectors must have equal dimension, got {x.shape[0]} and {x2.shape[0]}")
    d = x - x2
    return float(np.exp(d @ d / (-2.0 * k.s**2)))


def gram_matrix(k, a, b) -> np.ndarray:
    """Pairwise kernel matrix: entry (i, j) is k(a_i, b_j)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64) if b is not a else a
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"inputs must be 2-d with matching columns, got {a.shape} and {b.shape}")
    return k.gram(a, b)


def median_heuristic(a, n_samples: int = 4000, seed=0) -> float:
    """Bandwidth from the median pairwise distance of a seeded row sample.

    Draws ``min(n_samples, N)`` rows without replacement and returns the
    median Euclidean distance over all unordered pairs (self-pairs
    excluded); even pair counts take the mean of the two middle values.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2:
        raise ValueError(f"need a 2-d matrix with at least 2 rows, got shape {a.shape}")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    take = min(n_samples, a.shape[0])
    idx = np.random.default_rng(seed).choice(a.shape[0], size=take, replace=False)
    sub = a[idx]
    d2 = _sq_distances(sub, sub)
    iu, ju = np.triu_indices(take, k=1)
    med = float(np.median(np.sqrt(d2[iu, ju])))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero (all sampled points identical); set the bandwidth manually")
    return med


def _sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Expanded form ||x||^2 + ||y||^2 - 2 x'y with negative values clamped
    # to zero to guard against cancellation.
    na = np.einsum("ij,ij->i", a, a)
    nb = na if b is a else np.einsum("ij,ij->i", b, b)
    d2 = na[:, None] + nb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2
