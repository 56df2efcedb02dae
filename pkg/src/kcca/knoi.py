"""Minibatch stochastic trainer for wide linear CCA over kernel feature maps.

When the feature dimension M is large, the closed-form CCA solve (M x M
covariances plus an SVD) stops fitting in memory. This trainer instead
keeps only the M x L projection matrices and small L x L running estimates
of the projection covariances and means, updated from each minibatch as a
convex blend with time constant ``rho``. Each iteration, in order:

1. update the running projection means with the rho-blend, center the
   minibatch projections with the updated means, and blend the centered
   minibatch covariances into ``sxx_hat``/``syy_hat``;
2. form the cross-view least-squares gradients, each view regressing its
   projections onto the other view's projections whitened by the freshly
   updated covariance inverse square root, plus a small weight-decay term;
3. apply momentum and update the projection matrices.

The optimizer's fixed point is the CCA solution with columns scaled by the
canonical correlations, so the returned projections do not satisfy the
unit-covariance constraints; :func:`finalize` restores them with an exact
L-dimensional linear CCA over the full training projections, which leaves
the total canonical correlation unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import ViewPair
from .features import blocked_feature_projection
from .linear_cca import covariances, psd_inverse_sqrt, solve_cca, total_canonical_correlation

# Eigenvalue floor for the running covariance inverse square roots; guards
# the first iterations when projections are nearly rank-deficient.
COV_FLOOR = 1e-8
FINALIZE_FLOOR = 1e-10


class TrainingDiverged(RuntimeError):
    """Objective collapsed below half of its running best."""


@dataclass(frozen=True)
class KnoiConfig:
    """Hyperparameters for the stochastic trainer.

    ``b0`` is the warm-up minibatch size used to initialize the running
    covariance and mean estimates; it defaults to ``b``. ``eta`` may be set
    to zero for diagnostics (the covariance estimates still update, the
    projections do not move).
    """

    l: int
    b: int = 2500
    rho: float = 0.0
    eta: float = 0.01
    mu: float = 0.995
    weight_decay: float = 1e-5
    init_std: float = 0.1
    epochs: int = 1
    seed: int = 0
    b0: Optional[int] = None

    def __post_init__(self):
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if self.b < 1:
            raise ValueError(f"minibatch size must be >= 1, got {self.b}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"time constant rho must be in [0, 1), got {self.rho}")
        if self.eta < 0:
            raise ValueError(f"learning rate must be nonnegative, got {self.eta}")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"momentum mu must be in [0, 1), got {self.mu}")
        if self.weight_decay < 0:
            raise ValueError(f"weight decay must be nonnegative, got {self.weight_decay}")
        if not self.init_std > 0:
            raise ValueError(f"init_std must be positive (zero initialization is degenerate), got {self.init_std}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.b0 is not None and self.b0 < 1:
            raise ValueError(f"warm-up minibatch size must be >= 1, got {self.b0}")

    @property
    def warmup_size(self) -> int:
        return self.b if self.b0 is None else self.b0


@dataclass
class KnoiState:
    """Mutable optimizer state: projections, momentum, running moments."""

    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    sxx_hat: np.ndarray
    syy_hat: np.ndarray
    mx_hat: np.ndarray
    my_hat: np.ndarray
    it: int = 0


@dataclass(frozen=True)
class KnoiModel:
    """Trained feature maps, projections, and the finalizing CCA transform."""

    map_x: object
    map_y: object
    u: np.ndarray
    v: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    mean_px: np.ndarray
    mean_py: np.ndarray
    sigma: np.ndarray

    @property
    def l(self) -> int:
        return int(self.sigma.shape[0])

    def project(self, view: str, queries) -> np.ndarray:
        return knoi_project(self, view, queries)


@dataclass(frozen=True)
class ProgressRecord:
    """One learning-curve checkpoint."""

    iteration: int
    samples_seen: int
    train_corr: float
    test_corr: Optional[float] = None


def format_progress(rec: ProgressRecord) -> str:
    """Render a checkpoint as one line of key=value text."""
    line = f"iter={rec.iteration} samples={rec.samples_seen} train_corr={rec.train_corr:.17g}"
    if rec.test_corr is not None:
        line += f" test_corr={rec.test_corr:.17g}"
    return line


def knoi_init(cfg: KnoiConfig, pair: ViewPair, maps) -> KnoiState:
    """Random Gaussian projections plus warm-up moment estimates.

    U, V are filled with N(0, init_std^2) draws; the running means and
    covariances come from one warm-up minibatch of ``cfg.warmup_size`` rows
    (capped at N), with the covariance taken around the warm-up mean.
    """
    map_x, map_y = maps
    n = pair.n
    b0 = min(cfg.warmup_size, n)
    if b0 < cfg.l:
        raise ValueError(
            f"warm-up minibatch of {b0} rows cannot estimate a rank-{cfg.l} covariance; increase b0"
        )
    rng = np.random.default_rng([_seed_entropy(cfg.seed), 0])
    u = cfg.init_std * rng.standard_normal((map_x.dim_out, cfg.l))
    v = cfg.init_std * rng.standard_normal((map_y.dim_out, cfg.l))
    idx = rng.choice(n, size=b0, replace=False)
    px = map_x.transform(pair.x[idx]) @ u
    py = map_y.transform(pair.y[idx]) @ v
    mx = px.mean(axis=0)
    my = py.mean(axis=0)
    pxc = px - mx
    pyc = py - my
    return KnoiState(
        u=u,
        v=v,
        du=np.zeros_like(u),
        dv=np.zeros_like(v),
        sxx_hat=_sym(pxc.T @ pxc / b0),
        syy_hat=_sym(pyc.T @ pyc / b0),
        mx_hat=mx,
        my_hat=my,
    )


def knoi_gradients(state: KnoiState, phi_x: np.ndarray, phi_y: np.ndarray, cfg: KnoiConfig):
    """Run the moment updates for one minibatch and return (dU, dV).

    Mutates the running means and covariances in ``state`` (stage 1 of an
    iteration) but leaves the projections and momentum untouched, so the
    gradients at a hand-built state can be inspected directly.
    """
    bsz = phi_x.shape[0]
    if phi_y.shape[0] != bsz:
        raise ValueError(f"feature minibatches must pair up, got {bsz} and {phi_y.shape[0]} rows")
    rho = cfg.rho
    px = phi_x @ state.u
    py = phi_y @ state.v
    state.mx_hat = rho * state.mx_hat + (1.0 - rho) * px.mean(axis=0)
    state.my_hat = rho * state.my_hat + (1.0 - rho) * py.mean(axis=0)
    pxc = px - state.mx_hat
    pyc = py - state.my_hat
    state.sxx_hat = _sym(rho * state.sxx_hat + (1.0 - rho) * (pxc.T @ pxc / bsz))
    state.syy_hat = _sym(rho * state.syy_hat + (1.0 - rho) * (pyc.T @ pyc / bsz))
    sxx_isqrt = psd_inverse_sqrt(state.sxx_hat, floor=COV_FLOOR)
    syy_isqrt = psd_inverse_sqrt(state.syy_hat, floor=COV_FLOOR)
    gu = phi_x.T @ (pxc - pyc @ syy_isqrt) / bsz + cfg.weight_decay * state.u
    gv = phi_y.T @ (pyc - pxc @ sxx_isqrt) / bsz + cfg.weight_decay * state.v
    if not (np.all(np.isfinite(gu)) and np.all(np.isfinite(gv))):
        raise np.linalg.LinAlgError(
            f"non-finite gradient at iteration {state.it + 1}; the optimization has diverged"
        )
    return gu, gv


def knoi_step(state: KnoiState, phi_x: np.ndarray, phi_y: np.ndarray, cfg: KnoiConfig) -> KnoiState:
    """One full iteration on a feature-mapped minibatch; mutates ``state``."""
    gu, gv = knoi_gradients(state, phi_x, phi_y, cfg)
    state.du = cfg.mu * state.du - cfg.eta * gu
    state.dv = cfg.mu * state.dv - cfg.eta * gv
    state.u = state.u + state.du
    state.v = state.v + state.dv
    state.it += 1
    return state


def knoi_train(
    pair: ViewPair,
    maps,
    cfg: KnoiConfig,
    progress: Optional[Callable[[ProgressRecord], None]] = None,
    holdout: Optional[ViewPair] = None,
    eval_every: Optional[int] = None,
) -> KnoiModel:
    """Train over shuffled minibatches and return the finalized model.

    Emits a checkpoint after initialization and at every epoch boundary
    (plus every ``eval_every`` iterations when given); each checkpoint
    carries the training-set total canonical correlation and, when a
    ``holdout`` pair is supplied, the held-out value too. If a checkpoint
    drops below half of the running best, training halts with
    :class:`TrainingDiverged`.
    """
    map_x, map_y = maps
    if map_x.dim_in != pair.x.shape[1] or map_y.dim_in != pair.y.shape[1]:
        raise ValueError("feature maps do not match the input dimensions of the view pair")
    state = knoi_init(cfg, pair, maps)
    shuffle_rng = np.random.default_rng([_seed_entropy(cfg.seed), 1])
    n = pair.n
    samples_seen = 0
    best = -math.inf

    def checkpoint():
        nonlocal best
        train_corr = _objective(state, pair, maps)
        test_corr = _objective(state, holdout, maps) if holdout is not None else None
        if progress is not None:
            progress(ProgressRecord(state.it, samples_seen, train_corr, test_corr))
        if best > 0 and train_corr < 0.5 * best:
            raise TrainingDiverged(
                f"objective fell to {train_corr:.4g} at iteration {state.it}, below half of the best "
                f"seen ({best:.4g}); try a smaller learning rate eta or a larger time constant rho"
            )
        best = max(best, train_corr)

    checkpoint()
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.b):
            idx = order[start : start + cfg.b]
            phi_x = map_x.transform(pair.x[idx])
            phi_y = map_y.transform(pair.y[idx])
            knoi_step(state, phi_x, phi_y, cfg)
            samples_seen += idx.size
            if eval_every is not None and state.it % eval_every == 0 and start + cfg.b < n:
                checkpoint()
        checkpoint()
    return finalize(state, pair, maps)


def finalize(state: KnoiState, pair: ViewPair, maps) -> KnoiModel:
    """Exact L-dim linear CCA on the training projections.

    Restores the unit-covariance constraints without changing the training
    total canonical correlation. Projections are computed in row blocks so
    only O(block * M) features are alive at once.
    """
    map_x, map_y = maps
    px = blocked_feature_projection(map_x, pair.x, state.u)
    py = blocked_feature_projection(map_y, pair.y, state.v)
    for name, p in (("x", px), ("y", py)):
        if not np.all(np.isfinite(p)):
            raise np.linalg.LinAlgError(f"view {name} projections are non-finite; cannot finalize")
    sol = solve_cca(covariances(px, py, center=True), state.u.shape[1], floor=FINALIZE_FLOOR)
    return KnoiModel(
        map_x=map_x,
        map_y=map_y,
        u=state.u,
        v=state.v,
        wx=sol.u,
        wy=sol.v,
        mean_px=sol.mean_x,
        mean_py=sol.mean_y,
        sigma=sol.sigma,
    )


def knoi_project(model: KnoiModel, view: str, queries) -> np.ndarray:
    """Feature-map, project, and apply the finalizing transform."""
    if view == "x":
        fmap, w, fin, mean = model.map_x, model.u, model.wx, model.mean_px
    elif view == "y":
        fmap, w, fin, mean = model.map_y, model.v, model.wy, model.mean_py
    else:
        raise ValueError(f"view must be 'x' or 'y', got {view!r}")
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != fmap.dim_in:
        raise ValueError(f"queries must be 2-d with {fmap.dim_in} columns, got shape {queries.shape}")
    p = blocked_feature_projection(fmap, queries, w)
    return (p - mean) @ fin


def _objective(state: KnoiState, pair: ViewPair, maps) -> float:
    map_x, map_y = maps
    px = blocked_feature_projection(map_x, pair.x, state.u)
    py = blocked_feature_projection(map_y, pair.y, state.v)
    return total_canonical_correlation(px, py)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _seed_entropy(seed) -> int:
    # Accept any value np.random.SeedSequence accepts while namespacing the
    # internal init/shuffle streams under it.
    return int(seed)
