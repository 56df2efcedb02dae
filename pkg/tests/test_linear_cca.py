import numpy as np
import pytest
import scipy.linalg

from kcca.data import ViewPair, make_synthetic_pair
from kcca.linear_cca import (
    canonical_correlations,
    covariances,
    estimate_covariances,
    psd_inverse_sqrt,
    solve_cca,
    total_canonical_correlation,
)


def _random_cov(rng, dx, dy, n=60, rx=1e-2, ry=1e-2):
    x = rng.standard_normal((n, dx))
    y = 0.5 * x[:, : min(dx, dy)] @ rng.standard_normal((min(dx, dy), dy)) + rng.standard_normal((n, dy))
    return covariances(x, y, rx=rx, ry=ry, center=True)


def _sigma_by_generalized_eig(cov):
    # Independent oracle: sigma^2 are the eigenvalues of the generalized
    # symmetric problem  Sxy Syy^{-1} Syx u = sigma^2 Sxx u.
    m = cov.sxy @ np.linalg.inv(cov.syy) @ cov.sxy.T
    w = scipy.linalg.eigh(m, cov.sxx, eigvals_only=True)
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


# ---------------------------------------------------------------------------
# covariance estimation


def test_covariances_brute_force_oracle():
    x = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    y = np.array([[0.0, 1.0], [2.0, 2.0], [-1.0, 0.5]])
    cov = covariances(x, y, rx=0.1, ry=0.2, center=True)
    mx, my = x.mean(0), y.mean(0)
    n = 3
    sxx = sum(np.outer(xi - mx, xi - mx) for xi in x) / n + 0.1 * np.eye(2)
    syy = sum(np.outer(yi - my, yi - my) for yi in y) / n + 0.2 * np.eye(2)
    sxy = sum(np.outer(xi - mx, yi - my) for xi, yi in zip(x, y)) / n
    assert np.allclose(cov.sxx, sxx, atol=1e-14)
    assert np.allclose(cov.syy, syy, atol=1e-14)
    assert np.allclose(cov.sxy, sxy, atol=1e-14)
    assert np.allclose(cov.mean_x, mx) and np.allclose(cov.mean_y, my)


def test_covariances_identical_views():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    cov = covariances(x, x, rx=0.0, ry=0.0, center=False)
    assert np.array_equal(cov.sxx, cov.syy)
    assert np.allclose(cov.sxx, cov.sxy, atol=1e-15)


def test_regularizer_shifts_eigenvalues_exactly():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((20, 4))
    base = covariances(x, x, rx=0.0, ry=0.0).sxx
    reg = covariances(x, x, rx=0.1, ry=0.0).sxx
    assert np.allclose(np.linalg.eigvalsh(reg), np.linalg.eigvalsh(base) + 0.1, atol=1e-12)


def test_covariances_rejects_bad_args():
    with pytest.raises(ValueError):
        covariances(np.ones((1, 2)), np.ones((1, 2)), center=True)
    with pytest.raises(ValueError):
        covariances(np.ones((3, 2)), np.ones((3, 2)), rx=-1.0)
    with pytest.raises(ValueError):
        covariances(np.ones((3, 2)), np.ones((4, 2)))


def test_estimate_covariances_matches_array_form():
    pair, _ = make_synthetic_pair(30, 3, 4, 2, 0.2, seed=0)
    a = estimate_covariances(pair, 0.01, 0.02)
    b = covariances(pair.x, pair.y, 0.01, 0.02)
    assert np.array_equal(a.sxx, b.sxx) and np.array_equal(a.sxy, b.sxy)


# ---------------------------------------------------------------------------
# psd_inverse_sqrt


def test_inverse_sqrt_identity():
    assert np.allclose(psd_inverse_sqrt(np.eye(4)), np.eye(4), atol=1e-14)


def test_inverse_sqrt_diagonal():
    r = psd_inverse_sqrt(np.diag([4.0, 9.0]))
    assert np.allclose(r, np.diag([0.5, 1.0 / 3.0]), atol=1e-14)


def test_inverse_sqrt_multiply_back():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((10, 10))
    m = a @ a.T + 0.5 * np.eye(10)
    r = psd_inverse_sqrt(m, floor=1e-6)
    assert np.abs(r @ m @ r - np.eye(10)).max() <= 1e-8


def test_inverse_sqrt_rejects_asymmetric():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError, match="asymmetric"):
        psd_inverse_sqrt(m)


def test_inverse_sqrt_rank_deficient_errors():
    with pytest.raises(np.linalg.LinAlgError):
        psd_inverse_sqrt(np.diag([1.0, 0.0]), floor=0.0)


def test_inverse_sqrt_floor_rescues():
    r = psd_inverse_sqrt(np.diag([1.0, 0.0]), floor=1e-4)
    assert np.allclose(r, np.diag([1.0, 100.0]), atol=1e-10)


# ---------------------------------------------------------------------------
# solve_cca


def test_identical_views_give_unit_correlations():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 5))
    sol = solve_cca(covariances(x, x, center=True), 5)
    assert np.allclose(sol.sigma, np.ones(5), atol=1e-10)
    assert total_canonical_correlation(sol.project("x", x), sol.project("y", x)) == pytest.approx(5.0, abs=1e-8)


def test_invariance_under_invertible_map():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((50, 4))
    g = rng.standard_normal((4, 4)) + 2.0 * np.eye(4)
    sol = solve_cca(covariances(x, x @ g, center=True), 4)
    assert np.allclose(sol.sigma, np.ones(4), atol=1e-8)


def test_matches_synthetic_ground_truth():
    pair, truth = make_synthetic_pair(5000, 8, 8, 3, noise=0.5, seed=7)
    sol = solve_cca(estimate_covariances(pair, center=True), 3)
    assert np.abs(sol.sigma - truth).max() <= 0.03


def test_whitening_constraints_hold():
    rng = np.random.default_rng(5)
    for _ in range(5):
        cov = _random_cov(rng, 5, 4)
        sol = solve_cca(cov, 3)
        assert np.abs(sol.u.T @ cov.sxx @ sol.u - np.eye(3)).max() <= 1e-8
        assert np.abs(sol.v.T @ cov.syy @ sol.v - np.eye(3)).max() <= 1e-8
        # off-diagonal cross terms vanish
        cross = sol.u.T @ cov.sxy @ sol.v
        assert np.abs(cross - np.diag(np.diag(cross))).max() <= 1e-8
        assert np.all(np.diff(sol.sigma) <= 1e-12)


def test_matches_generalized_eig_oracle():
    rng = np.random.default_rng(6)
    for _ in range(5):
        cov = _random_cov(rng, 5, 4)
        sol = solve_cca(cov, 4)
        assert np.abs(sol.sigma - _sigma_by_generalized_eig(cov)[:4]).max() <= 1e-8


def test_regularization_monotonicity():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((60, 5))
    y = x @ rng.standard_normal((5, 5)) + 0.3 * rng.standard_normal((60, 5))
    prev = None
    for rx in (0.01, 0.1, 1.0):
        sigma = solve_cca(covariances(x, y, rx=rx, ry=0.01), 5).sigma
        if prev is not None:
            assert np.all(sigma <= prev + 1e-10)
        prev = sigma


def test_solve_is_deterministic():
    rng = np.random.default_rng(9)
    cov = _random_cov(rng, 6, 5)
    a = solve_cca(cov, 4)
    b = solve_cca(cov, 4)
    assert a.u.tobytes() == b.u.tobytes()
    assert a.v.tobytes() == b.v.tobytes()


def test_l_out_of_range():
    cov = _random_cov(np.random.default_rng(0), 4, 3)
    with pytest.raises(ValueError):
        solve_cca(cov, 4)
    with pytest.raises(ValueError):
        solve_cca(cov, 0)


# ---------------------------------------------------------------------------
# total canonical correlation


def test_metric_equal_projections():
    rng = np.random.default_rng(10)
    p = rng.standard_normal((100, 4))
    assert total_canonical_correlation(p, p) == pytest.approx(4.0, abs=1e-8)


def test_metric_column_permutation():
    rng = np.random.default_rng(11)
    p = rng.standard_normal((100, 4))
    assert total_canonical_correlation(p, p[:, [2, 0, 3, 1]]) == pytest.approx(4.0, abs=1e-8)


def test_metric_invariant_under_invertible_transforms():
    rng = np.random.default_rng(12)
    px = rng.standard_normal((200, 3))
    py = 0.5 * px + rng.standard_normal((200, 3))
    base = total_canonical_correlation(px, py)
    for _ in range(3):
        g = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        h = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        assert total_canonical_correlation(px @ g, py @ h) == pytest.approx(base, abs=1e-6)


def test_metric_null_bound():
    # Independent projections: frozen-seed Monte Carlo stays under 0.5.
    rng = np.random.default_rng(13)
    px = rng.standard_normal((10000, 5))
    py = rng.standard_normal((10000, 5))
    assert total_canonical_correlation(px, py) <= 0.5


def test_metric_shape_requirements():
    with pytest.raises(ValueError):
        total_canonical_correlation(np.ones((5, 2)), np.ones((5, 3)))
    with pytest.raises(ValueError):
        total_canonical_correlation(np.ones((3, 3)), np.ones((3, 3)))


def test_metric_within_upper_bound():
    rng = np.random.default_rng(14)
    px = rng.standard_normal((300, 6))
    py = px + 0.01 * rng.standard_normal((300, 6))
    val = total_canonical_correlation(px, py)
    assert 0.0 <= val <= 6.0 + 1e-8
    assert len(canonical_correlations(px, py)) == 6
