"""Low-rank kernel feature maps: random Fourier features and Nystrom.

Both maps turn inputs into M-dimensional features whose inner products
approximate RBF kernel evaluations, converting kernel CCA into a (very
wide) linear CCA problem.

A random Fourier map is fully determined by ``(d, m, s, seed)``: the
frequency rows are unit normals drawn first and then divided by the
bandwidth, so refitting with the same seed reproduces the map bit-for-bit
and a doubled bandwidth halves the frequencies exactly. This is what makes
"store the seed, regenerate the features on the fly" a safe serialization
strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import RbfKernel, gram_matrix

PROJECTION_BLOCK = 8192


@dataclass(frozen=True)
class RffMap:
    """Frozen random Fourier feature map x -> sqrt(2/M) cos(W x + b)."""

    w: np.ndarray
    b: np.ndarray
    m: int
    d: int
    s: float
    seed: int

    @property
    def dim_in(self) -> int:
        return self.d

    @property
    def dim_out(self) -> int:
        return self.m

    def transform(self, x) -> np.ndarray:
        return rff_transform(self, x)


def rff_fit(d: int, m: int, s: float, seed) -> RffMap:
    """Sample a random Fourier map for the RBF kernel of bandwidth ``s``.

    Frequencies are i.i.d. N(0, 1/s^2) (unit normals scaled by 1/s), phases
    uniform on [0, 2*pi). Deterministic for a fixed seed.
    """
    if d < 1 or m < 1:
        raise ValueError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
    if not s > 0:
        raise ValueError(f"bandwidth must be positive, got {s}")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((m, d)) / s
    b = rng.uniform(0.0, 2.0 * np.pi, size=m)
    w.setflags(write=False)
    b.setflags(write=False)
    return RffMap(w=w, b=b, m=int(m), d=int(d), s=float(s), seed=seed)


def rff_transform(fmap: RffMap, x) -> np.ndarray:
    """Feature matrix with rows sqrt(2/M) cos(W x_i + b); entries bounded by sqrt(2/M)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != fmap.d:
        raise ValueError(f"queries must be 2-d with {fmap.d} columns, got shape {x.shape}")
    return np.sqrt(2.0 / fmap.m) * np.cos(x @ fmap.w.T + fmap.b)


@dataclass(frozen=True)
class NystromMap:
    """Spectral feature map built from a landmark subset's Gram matrix.

    Stores the landmarks, the eigenvectors of their Gram matrix restricted
    to eigenvalues at or above ``floor`` (``kept`` of them, descending), and
    the inverse square roots of those eigenvalues. Transforming x computes
    k(x, landmarks) and scales it into the spectral basis, so feature inner
    products reproduce the Nystrom kernel approximation.
    """

    landmarks: np.ndarray
    kernel: RbfKernel
    r_tilde: np.ndarray
    lambda_inv_sqrt: np.ndarray
    floor: float
    kept: int

    @property
    def dim_in(self) -> int:
        return self.landmarks.shape[1]

    @property
    def dim_out(self) -> int:
        return self.kept

    def transform(self, x) -> np.ndarray:
        return nystrom_transform(self, x)


def nystrom_fit(landmarks, k: RbfKernel, floor: float | None = None) -> NystromMap:
    """Eigendecompose the landmark Gram matrix into a feature map.

    Eigenvalues below ``floor`` are dropped (handling duplicated or nearly
    dependent landmarks); ``floor`` defaults to ``1e-10`` times the largest
    eigenvalue. Raises if nothing survives the floor.
    """
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.ndim != 2 or landmarks.shape[0] < 1:
        raise ValueError(f"landmarks must be a nonempty 2-d matrix, got shape {landmarks.shape}")
    kt = gram_matrix(k, landmarks, landmarks)
    w, q = np.linalg.eigh(kt)
    w = w[::-1]
    q = q[:, ::-1]
    if floor is None:
        floor = 1e-10 * float(w[0])
    keep = w >= floor
    kept = int(keep.sum())
    if kept == 0:
        raise np.linalg.LinAlgError(
            f"all landmark Gram eigenvalues fall below the floor ({floor:g}); landmarks are degenerate"
        )
    r_tilde = q[:, keep].copy()
    lam_isqrt = w[keep] ** -0.5
    r_tilde.setflags(write=False)
    lam_isqrt.setflags(write=False)
    return NystromMap(
        landmarks=landmarks.copy(),
        kernel=k,
        r_tilde=r_tilde,
        lambda_inv_sqrt=lam_isqrt,
        floor=float(floor),
        kept=kept,
    )


def nystrom_transform(fmap: NystromMap, x) -> np.ndarray:
    """Features C R (Lambda^{-1/2}) where C holds kernel values against the landmarks."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != fmap.dim_in:
        raise ValueError(f"queries must be 2-d with {fmap.dim_in} columns, got shape {x.shape}")
    c = gram_matrix(fmap.kernel, x, fmap.landmarks)
    return (c @ fmap.r_tilde) * fmap.lambda_inv_sqrt


def blocked_feature_projection(fmap, mat, weights: np.ndarray, block: int = PROJECTION_BLOCK) -> np.ndarray:
    """Compute transform(mat) @ weights in row blocks to bound peak memory."""
    mat = np.asarray(mat, dtype=np.float64)
    out = np.empty((mat.shape[0], weights.shape[1]))
    for start in range(0, mat.shape[0], block):
        stop = min(start + block, mat.shape[0])
        out[start:stop] = fmap.transform(mat[start:stop]) @ weights
    return out
