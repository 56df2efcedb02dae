import numpy as np
import pytest
import scipy.linalg

from kcca.data import ViewPair, make_synthetic_pair
from kcca.dual_kcca import project_dual, solve_kcca_dual
from kcca.features import nystrom_fit, rff_fit
from kcca.kernels import LinearKernel, RbfKernel, gram_matrix, median_heuristic, rbf_eval
from kcca.linear_cca import covariances, solve_cca, total_canonical_correlation


def _centered_pair(n, dx, dy, l_true, noise, seed):
    pair, _ = make_synthetic_pair(n, dx, dy, l_true, noise, seed)
    return ViewPair(pair.x - pair.x.mean(0), pair.y - pair.y.mean(0))


def _rbf_pair_kernels(pair):
    return (
        RbfKernel(median_heuristic(pair.x, seed=0)),
        RbfKernel(median_heuristic(pair.y, seed=1)),
    )


def test_symmetric_problem_shares_solution():
    pair, _ = make_synthetic_pair(80, 5, 5, 3, 0.4, seed=0)
    same = ViewPair(pair.x, pair.x)
    k = RbfKernel(median_heuristic(pair.x, seed=0))
    sol = solve_kcca_dual(same, k, k, 0.01, 0.01, 3)
    # identical views and kernels: B equals A up to per-column sign
    for j in range(3):
        col_a, col_b = sol.a[:, j], sol.b[:, j]
        assert min(np.abs(col_a - col_b).max(), np.abs(col_a + col_b).max()) <= 1e-8
    assert np.allclose(sol.sigma, np.ones(3), atol=1e-8)


def test_rbf_beats_linear_on_train():
    pair = _centered_pair(200, 6, 6, 3, 0.5, seed=1)
    kx, ky = _rbf_pair_kernels(pair)
    dual = solve_kcca_dual(pair, kx, ky, 1e-3, 1e-3, 3)
    tcc_kernel = total_canonical_correlation(project_dual(dual, "x", pair.x), project_dual(dual, "y", pair.y))
    lin = solve_cca(covariances(pair.x, pair.y, rx=1e-3, ry=1e-3, center=True), 3)
    tcc_linear = total_canonical_correlation(lin.project("x", pair.x), lin.project("y", pair.y))
    assert tcc_kernel >= tcc_linear


def test_linear_kernel_matches_primal_cca():
    pair = _centered_pair(200, 8, 8, 4, 0.5, seed=2)
    dual = solve_kcca_dual(pair, LinearKernel(), LinearKernel(), 0.0, 0.0, 8)
    primal = solve_cca(covariances(pair.x, pair.y, center=True), 8)
    assert np.abs(dual.sigma - primal.sigma).max() <= 1e-6


def test_constraint_satisfaction():
    pair = _centered_pair(150, 5, 4, 3, 0.4, seed=3)
    kx, ky = _rbf_pair_kernels(pair)
    sol = solve_kcca_dual(pair, kx, ky, 1e-2, 1e-2, 3)
    n = pair.n
    px = gram_matrix(kx, pair.x, pair.x) @ sol.a
    py = gram_matrix(ky, pair.y, pair.y) @ sol.b
    assert np.abs(px.T @ px / n - np.eye(3)).max() <= 1e-6
    assert np.abs(py.T @ py / n - np.eye(3)).max() <= 1e-6


def test_matches_dense_eigensolver():
    # Cross-check the whitened-operator route against a dense nonsymmetric
    # eigensolver applied to (Kx + N rx I)^{-1} Ky (Ky + N ry I)^{-1} Kx:
    # the eigenvalues are the squared canonical correlations, and the
    # projected training data spans the same subspace as the projections of
    # the dense top eigenvectors.
    pair = _centered_pair(120, 5, 5, 3, 0.5, seed=4)
    kx, ky = _rbf_pair_kernels(pair)
    rx = ry = 1e-3
    l = 3
    sol = solve_kcca_dual(pair, kx, ky, rx, ry, l)
    n = pair.n
    gx = gram_matrix(kx, pair.x, pair.x)
    gy = gram_matrix(ky, pair.y, pair.y)
    m = np.linalg.solve(gx + n * rx * np.eye(n), gy @ np.linalg.solve(gy + n * ry * np.eye(n), gx))
    eigvals, eigvecs = scipy.linalg.eig(m)
    order = np.argsort(np.real(eigvals))[::-1]
    assert np.abs(np.real(eigvals[order[:l]]) - sol.sigma**2).max() <= 1e-8
    # principal angles between the projected subspaces are ~0
    px_ours = np.linalg.qr(gx @ sol.a)[0]
    px_dense = np.linalg.qr(gx @ np.real(eigvecs[:, order[:l]]))[0]
    cosines = np.linalg.svd(px_ours.T @ px_dense, compute_uv=False)
    assert cosines.min() >= 1.0 - 1e-8


def test_project_training_set_is_gram_times_coefficients():
    pair = _centered_pair(60, 4, 4, 2, 0.3, seed=5)
    kx, ky = _rbf_pair_kernels(pair)
    sol = solve_kcca_dual(pair, kx, ky, 1e-2, 1e-2, 2)
    expected = gram_matrix(kx, pair.x, pair.x) @ sol.a
    assert np.array_equal(project_dual(sol, "x", pair.x), expected)
    single = project_dual(sol, "x", pair.x[3:4])
    assert np.allclose(single, expected[3:4], atol=1e-12)


def test_project_matches_summation_oracle():
    pair = _centered_pair(40, 3, 3, 2, 0.3, seed=6)
    kx, ky = _rbf_pair_kernels(pair)
    sol = solve_kcca_dual(pair, kx, ky, 1e-2, 1e-2, 2)
    rng = np.random.default_rng(7)
    queries = rng.standard_normal((5, 3))
    got = project_dual(sol, "y", queries)
    want = np.zeros((5, 2))
    for q in range(5):
        for i in range(pair.n):
            want[q] += sol.b[i] * rbf_eval(ky, queries[q], pair.y[i])
    assert np.allclose(got, want, atol=1e-10)


def test_refuses_above_cap():
    pair, _ = make_synthetic_pair(30, 3, 3, 2, 0.3, seed=8)
    with pytest.raises(ValueError, match="approximate solvers"):
        solve_kcca_dual(pair, LinearKernel(), LinearKernel(), 0.1, 0.1, 2, max_n=20)


def test_argument_validation():
    pair, _ = make_synthetic_pair(30, 3, 3, 2, 0.3, seed=9)
    k = RbfKernel(1.0)
    with pytest.raises(ValueError):
        solve_kcca_dual(pair, k, k, -0.1, 0.1, 2)
    with pytest.raises(ValueError):
        solve_kcca_dual(pair, k, k, 0.1, 0.1, 0)
    sol = solve_kcca_dual(pair, k, k, 0.1, 0.1, 2)
    with pytest.raises(ValueError):
        project_dual(sol, "z", pair.x)
    with pytest.raises(ValueError):
        project_dual(sol, "x", np.ones((4, 7)))


def test_center_gram_equals_cca_on_centered_data():
    pair, _ = make_synthetic_pair(150, 6, 5, 3, 0.4, seed=10)  # uncentered
    dual = solve_kcca_dual(pair, LinearKernel(), LinearKernel(), 0.0, 0.0, 5, center_gram=True)
    primal = solve_cca(covariances(pair.x, pair.y, center=True), 5)
    assert np.abs(dual.sigma - primal.sigma).max() <= 1e-6
    # projecting held-out queries applies the same feature-space centering
    rng = np.random.default_rng(11)
    q = rng.standard_normal((8, 6))
    got = project_dual(dual, "x", q)
    assert np.all(np.isfinite(got)) and got.shape == (8, 5)


def test_low_rank_approximations_approach_dual():
    # Feature-map solvers climb toward the exact dual objective as the rank
    # grows; averaged over seeds the trend is monotone. The dual uses
    # centered Gram matrices so all solvers optimize the same centered
    # objective the metric measures.
    pair = _centered_pair(400, 6, 6, 4, 0.4, seed=12)
    kx, ky = _rbf_pair_kernels(pair)
    rx = 1e-3
    dual = solve_kcca_dual(pair, kx, ky, rx, rx, 4, center_gram=True)
    dual_tcc = total_canonical_correlation(
        project_dual(dual, "x", pair.x), project_dual(dual, "y", pair.y)
    )

    def fkcca_tcc(m, seed):
        mx = rff_fit(6, m, kx.s, seed=seed)
        my = rff_fit(6, m, ky.s, seed=seed + 1000)
        sol = solve_cca(covariances(mx.transform(pair.x), my.transform(pair.y), rx=rx, ry=rx, center=True), 4)
        return total_canonical_correlation(
            (mx.transform(pair.x) - sol.mean_x) @ sol.u, (my.transform(pair.y) - sol.mean_y) @ sol.v
        )

    def nkcca_tcc(m, seed):
        rng = np.random.default_rng(seed)
        mx = nystrom_fit(pair.x[rng.choice(pair.n, m, replace=False)], kx)
        my = nystrom_fit(pair.y[rng.choice(pair.n, m, replace=False)], ky)
        sol = solve_cca(covariances(mx.transform(pair.x), my.transform(pair.y), rx=rx, ry=rx, center=True), 4)
        return total_canonical_correlation(
            (mx.transform(pair.x) - sol.mean_x) @ sol.u, (my.transform(pair.y) - sol.mean_y) @ sol.v
        )

    for solver in (fkcca_tcc, nkcca_tcc):
        means = [np.mean([solver(m, s) for s in range(5)]) for m in (32, 64, 256)]
        assert np.all(np.diff(means) >= -1e-6), f"{solver.__name__}: {means}"
        assert means[-1] <= dual_tcc + 1e-6, f"{solver.__name__}: {means[-1]} vs dual {dual_tcc}"
        assert means[-1] >= 0.98 * dual_tcc, f"{solver.__name__}: {means[-1]} vs dual {dual_tcc}"
