"""Exact dual-space kernel CCA for small sample counts.

This is the ground-truth oracle the low-rank approximations are validated
against. The dual coefficient matrices A, B (one row of coefficients per
training sample) span the top-L eigenspace of

    (Kx + N rx I)^{-1} Ky (Ky + N ry I)^{-1} Kx,

whose eigenvalues are the squared canonical correlations. Rather than
attacking that nonsymmetric system directly, the solver works with the
whitened dual operator

    T = (Kx + N rx I)^{-1/2} Kx^{1/2} Ky^{1/2} (Ky + N ry I)^{-1/2},

every factor of which is a spectral function of a single Gram matrix, so
one symmetric eigendecomposition per view suffices. The singular values of
T are the canonical correlations, and A = pinv(Kx^{1/2}) (Kx + N rx I)^{-1/2} U
recovers the coefficients (pseudo-inversion drops Gram null directions,
which cannot affect training projections Kx A). A direct dense eigensolver
check of this route lives in the test suite.

Columns are normalized post hoc by running a final L-dimensional linear CCA
on the projected training data (Kx A, Ky B) with uncentered covariances,
which restores the exact unit-covariance constraints and yields the
reported canonical correlations.

Memory and time are O(N^2) and O(N^3), so solves refuse sample counts above
a configurable cap and point the caller at the approximate solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ViewPair
from .kernels import gram_matrix
from .linear_cca import METRIC_FLOOR, covariances, solve_cca, _fix_svd_signs

DEFAULT_MAX_N = 5000

# Relative eigenvalue cutoff below which Gram directions are treated as null.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class DualKccaSolution:
    """Dual coefficients plus everything needed to project new queries."""

    a: np.ndarray
    b: np.ndarray
    train_x: np.ndarray
    train_y: np.ndarray
    kernel_x: object
    kernel_y: object
    rx: float
    ry: float
    sigma: np.ndarray
    center_gram: bool = False
    kx_colmean: np.ndarray | None = None
    kx_grand: float = 0.0
    ky_colmean: np.ndarray | None = None
    ky_grand: float = 0.0

    @property
    def l(self) -> int:
        return int(self.sigma.shape[0])

    def project(self, view: str, queries) -> np.ndarray:
        return project_dual(self, view, queries)


def solve_kcca_dual(
    pair: ViewPair,
    kx,
    ky,
    rx: float,
    ry: float,
    l: int,
    max_n: int = DEFAULT_MAX_N,
    center_gram: bool = False,
) -> DualKccaSolution:
    """Solve kernel CCA exactly in the dual and normalize the coefficients.

    ``center_gram`` additionally centers each Gram matrix in feature space
    (off by default). Refuses datasets larger than ``max_n`` samples.
    """
    n = pair.n
    if n > max_n:
        raise ValueError(
            f"dual KCCA stores N x N Gram matrices; N={n} exceeds the cap of {max_n}. "
            "Use the fkcca/nkcca/knoi approximate solvers for datasets this large."
        )
    if rx < 0 or ry < 0:
        raise ValueError(f"regularizers must be nonnegative, got rx={rx}, ry={ry}")
    if not 1 <= l <= n:
        raise ValueError(f"l must be in [1, N] = [1, {n}], got {l}")

    gx = gram_matrix(kx, pair.x, pair.x)
    gy = gram_matrix(ky, pair.y, pair.y)
    kx_colmean = ky_colmean = None
    kx_grand = ky_grand = 0.0
    if center_gram:
        gx, kx_colmean, kx_grand = _center_gram_train(gx)
        gy, ky_colmean, ky_grand = _center_gram_train(gy)

    whiten_x, recover_x = _dual_factors(gx, n, rx)
    whiten_y, recover_y = _dual_factors(gy, n, ry)
    t = whiten_x @ whiten_y
    tu, _, tvt = np.linalg.svd(t)
    tu = tu[:, :l].copy()
    tv = tvt[:l].T.copy()
    _fix_svd_signs(tu, tv)
    a_raw = recover_x @ tu
    b_raw = recover_y @ tv

    # Post-hoc normalization: L-dim linear CCA on the projected training data
    # restores the unit-covariance constraints and orders the components.
    px = gx @ a_raw
    py = gy @ b_raw
    fin = solve_cca(covariances(px, py, center=False), l, floor=METRIC_FLOOR)
    return DualKccaSolution(
        a=a_raw @ fin.u,
        b=b_raw @ fin.v,
        train_x=pair.x,
        train_y=pair.y,
        kernel_x=kx,
        kernel_y=ky,
        rx=float(rx),
        ry=float(ry),
        sigma=fin.sigma,
        center_gram=center_gram,
        kx_colmean=kx_colmean,
        kx_grand=kx_grand,
        ky_colmean=ky_colmean,
        ky_grand=ky_grand,
    )


def project_dual(sol: DualKccaSolution, view: str, queries) -> np.ndarray:
    """Kernel-expansion projection: gram(queries, train) @ coefficients."""
    if view == "x":
        train, kern, coef = sol.train_x, sol.kernel_x, sol.a
        colmean, grand = sol.kx_colmean, sol.kx_grand
    elif view == "y":
        train, kern, coef = sol.train_y, sol.kernel_y, sol.b
        colmean, grand = sol.ky_colmean, sol.ky_grand
    else:
        raise ValueError(f"view must be 'x' or 'y', got {view!r}")
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != train.shape[1]:
        raise ValueError(f"queries must be 2-d with {train.shape[1]} columns, got shape {queries.shape}")
    g = gram_matrix(kern, queries, train)
    if sol.center_gram:
        g = _center_gram_queries(g, colmean, grand)
    return g @ coef


def _dual_factors(gram: np.ndarray, n: int, reg: float):
    # Spectral factors of one view's Gram matrix K with R = K + N*reg*I:
    #   whiten  = R^{-1/2} K^{1/2}        (rows of the whitened dual operator)
    #   recover = pinv(K^{1/2}) R^{-1/2}  (maps singular vectors to coefficients)
    w, q = np.linalg.eigh(gram)
    cut = RANK_RTOL * max(float(w.max()), 0.0)
    pos = w > cut
    if not pos.any():
        raise np.linalg.LinAlgError("Gram matrix is numerically zero; cannot solve dual KCCA")
    qp = q[:, pos]
    sw = np.sqrt(w[pos])
    denom = np.sqrt(w[pos] + n * reg)
    whiten = (qp * (sw / denom)) @ qp.T
    recover = (qp * (1.0 / (sw * denom))) @ qp.T
    return whiten, recover


def _center_gram_train(k: np.ndarray):
    colmean = k.mean(axis=0)
    grand = float(colmean.mean())
    kc = k - colmean[None, :] - colmean[:, None] + grand
    return kc, colmean, grand


def _center_gram_queries(kq: np.ndarray, colmean: np.ndarray, grand: float) -> np.ndarray:
    qmean = kq.mean(axis=1)
    return kq - qmean[:, None] - colmean[None, :] + grand
