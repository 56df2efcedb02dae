"""Covariance estimation, inverse square roots, and closed-form linear CCA.

The solver follows the classical whitening route: estimate the regularized
covariance triple (Sxx, Syy, Sxy), whiten the cross-covariance as
``T = Sxx^{-1/2} Sxy Syy^{-1/2}``, and read the projection matrices and
canonical correlations off the rank-L SVD of ``T``. Covariances are
normalized by ``1/N`` (not ``1/(N-1)``) so that the additive regularizers
``rx, ry`` keep the same scale regardless of the sample count.

:func:`total_canonical_correlation` is the evaluation metric used
throughout: the sum of the L singular values of the whitened cross-
covariance of two L-dimensional projected datasets, each centered by its
own mean. It is invariant under invertible linear maps of either side and
upper-bounded by L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Eigenvalue floor used when whitening projection covariances in the metric.
METRIC_FLOOR = 1e-12


@dataclass(frozen=True)
class CovarianceTriple:
    """Regularized second moments of a paired dataset plus the means removed."""

    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    rx: float
    ry: float
    mean_x: np.ndarray
    mean_y: np.ndarray


@dataclass(frozen=True)
class CcaSolution:
    """Projection matrices, canonical correlations, and projection means.

    ``u`` and ``v`` map mean-centered inputs to the L-dimensional canonical
    space; ``sigma`` holds the canonical correlations in nonincreasing
    order. ``mean_x``/``mean_y`` are the training means that must be
    subtracted before projecting, making projection a pure function of the
    trained model.
    """

    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    rx: float
    ry: float

    @property
    def l(self) -> int:
        return int(self.sigma.shape[0])

    def project(self, view: str, queries) -> np.ndarray:
        q = np.asarray(queries, dtype=np.float64)
        if view == "x":
            mean, w = self.mean_x, self.u
        elif view == "y":
            mean, w = self.mean_y, self.v
        else:
            raise ValueError(f"view must be 'x' or 'y', got {view!r}")
        if q.ndim != 2 or q.shape[1] != w.shape[0]:
            raise ValueError(f"queries must be 2-d with {w.shape[0]} columns, got shape {q.shape}")
        return (q - mean) @ w


def covariances(x, y, rx: float = 0.0, ry: float = 0.0, center: bool = True) -> CovarianceTriple:
    """Covariance triple of two row-paired arrays with 1/N normalization."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"need row-paired 2-d arrays, got shapes {x.shape} and {y.shape}")
    if rx < 0 or ry < 0:
        raise ValueError(f"regularizers must be nonnegative, got rx={rx}, ry={ry}")
    n = x.shape[0]
    if center:
        if n < 2:
            raise ValueError("centering needs at least 2 samples")
        mean_x = x.mean(axis=0)
        mean_y = y.mean(axis=0)
        x = x - mean_x
        y = y - mean_y
    else:
        mean_x = np.zeros(x.shape[1])
        mean_y = np.zeros(y.shape[1])
    sxx = x.T @ x / n
    syy = y.T @ y / n
    sxx = 0.5 * (sxx + sxx.T) + rx * np.eye(x.shape[1])
    syy = 0.5 * (syy + syy.T) + ry * np.eye(y.shape[1])
    sxy = x.T @ y / n
    return CovarianceTriple(sxx, syy, sxy, float(rx), float(ry), mean_x, mean_y)


def estimate_covariances(pair, rx: float = 0.0, ry: float = 0.0, center: bool = True) -> CovarianceTriple:
    """Covariance triple of a :class:`~kcca.data.ViewPair`."""
    return covariances(pair.x, pair.y, rx=rx, ry=ry, center=center)


def psd_inverse_sqrt(m, floor: float = 0.0) -> np.ndarray:
    """Inverse square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below ``floor`` are clamped to ``floor`` before the -1/2
    power. Raises if the input is asymmetric beyond a small relative
    tolerance or if any clamped eigenvalue is still nonpositive.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = float(np.abs(m).max()) if m.size else 0.0
    asym = float(np.abs(m - m.T).max())
    if asym > 1e-8 * max(scale, 1e-300):
        raise ValueError(f"matrix is asymmetric beyond tolerance (max |m - m'| = {asym:g})")
    w, q = np.linalg.eigh(0.5 * (m + m.T))
    w = np.maximum(w, floor)
    if w.min() <= 0.0:
        raise np.linalg.LinAlgError(
            f"matrix is rank-deficient beyond the floor ({floor:g}); cannot form inverse square root"
        )
    return (q * w**-0.5) @ q.T


def _fix_svd_signs(tu: np.ndarray, tv: np.ndarray) -> None:
    # Deterministic sign convention: the largest-magnitude entry of each left
    # singular vector is made positive; the right vector flips with it.
    for j in range(tu.shape[1]):
        k = int(np.argmax(np.abs(tu[:, j])))
        if tu[k, j] < 0:
            tu[:, j] *= -1.0
            tv[:, j] *= -1.0


def solve_cca(cov: CovarianceTriple, l: int, floor: float = 0.0) -> CcaSolution:
    """Rank-``l`` linear CCA from a covariance triple.

    Whitens the cross-covariance with :func:`psd_inverse_sqrt` (passing
    ``floor`` through), takes the top-``l`` SVD, and maps the singular
    vectors back through the whitening transforms.
    """
    dx, dy = cov.sxy.shape
    if not 1 <= l <= min(dx, dy):
        raise ValueError(f"l must be in [1, min(dx, dy)] = [1, {min(dx, dy)}], got {l}")
    wx = psd_inverse_sqrt(cov.sxx, floor=floor)
    wy = psd_inverse_sqrt(cov.syy, floor=floor)
    t = wx @ cov.sxy @ wy
    tu, sig, tvt = np.linalg.svd(t, full_matrices=False)
    tu = tu[:, :l].copy()
    tv = tvt[:l].T.copy()
    _fix_svd_signs(tu, tv)
    return CcaSolution(
        u=wx @ tu,
        v=wy @ tv,
        sigma=sig[:l].copy(),
        mean_x=cov.mean_x,
        mean_y=cov.mean_y,
        rx=cov.rx,
        ry=cov.ry,
    )


def canonical_correlations(px, py) -> np.ndarray:
    """Canonical correlations between two L-dimensional projected datasets.

    Centers each side by its own mean, estimates the unregularized L x L
    covariance triple, and whitens with a small eigenvalue floor
    (``METRIC_FLOOR``) so the upper bound of 1 per component is exact for
    full-rank projections.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    if px.shape != py.shape or px.ndim != 2:
        raise ValueError(f"projections must share an N x L shape, got {px.shape} and {py.shape}")
    n, l = px.shape
    if n <= l:
        raise ValueError(f"need more samples than projection dimensions, got N={n}, L={l}")
    cov = covariances(px, py, rx=0.0, ry=0.0, center=True)
    return solve_cca(cov, l, floor=METRIC_FLOOR).sigma


def total_canonical_correlation(px, py) -> float:
    """Sum of the canonical correlations between two projected datasets."""
    return float(canonical_correlations(px, py).sum())
