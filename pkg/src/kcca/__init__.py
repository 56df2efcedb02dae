"""Exact and approximate kernel canonical correlation analysis.

Solvers: closed-form linear CCA, exact dual kernel CCA for small N, linear
CCA over random Fourier or Nystrom feature maps, and a minibatch stochastic
trainer for the very wide linear CCA problems those maps produce.
"""

from .data import (
    ViewPair,
    data_matrix,
    detect_format,
    make_bump_images,
    make_synthetic_pair,
    read_matrix,
    split_image_views,
    subset_indices,
    write_matrix,
)
from .dual_kcca import DualKccaSolution, project_dual, solve_kcca_dual
from .features import (
    NystromMap,
    RffMap,
    blocked_feature_projection,
    nystrom_fit,
    nystrom_transform,
    rff_fit,
    rff_transform,
)
from .kernels import LinearKernel, RbfKernel, gram_matrix, median_heuristic, rbf_eval
from .knoi import (
    KnoiConfig,
    KnoiModel,
    KnoiState,
    ProgressRecord,
    TrainingDiverged,
    finalize,
    knoi_gradients,
    knoi_init,
    knoi_project,
    knoi_step,
    knoi_train,
)
from .linear_cca import (
    CcaSolution,
    CovarianceTriple,
    canonical_correlations,
    covariances,
    estimate_covariances,
    psd_inverse_sqrt,
    solve_cca,
    total_canonical_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "CcaSolution",
    "CovarianceTriple",
    "DualKccaSolution",
    "KnoiConfig",
    "KnoiModel",
    "KnoiState",
    "LinearKernel",
    "NystromMap",
    "ProgressRecord",
    "RbfKernel",
    "RffMap",
    "TrainingDiverged",
    "ViewPair",
    "blocked_feature_projection",
    "canonical_correlations",
    "covariances",
    "data_matrix",
    "detect_format",
    "estimate_covariances",
    "finalize",
    "gram_matrix",
    "knoi_gradients",
    "knoi_init",
    "knoi_project",
    "knoi_step",
    "knoi_train",
    "make_bump_images",
    "make_synthetic_pair",
    "median_heuristic",
    "nystrom_fit",
    "nystrom_transform",
    "project_dual",
    "psd_inverse_sqrt",
    "rbf_eval",
    "read_matrix",
    "rff_fit",
    "rff_transform",
    "solve_cca",
    "solve_kcca_dual",
    "split_image_views",
    "subset_indices",
    "total_canonical_correlation",
    "write_matrix",
]
