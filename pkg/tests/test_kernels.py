import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcca.kernels import LinearKernel, RbfKernel, gram_matrix, median_heuristic, rbf_eval

# Values bounded so exp(-d^2 / 2s^2) neither underflows to 0 nor rounds to 1.
vectors = st.lists(
    st.floats(allow_nan=False, allow_infinity=False, min_value=-5.0, max_value=5.0),
    min_size=1,
    max_size=8,
)


def test_bandwidth_must_be_positive():
    with pytest.raises(ValueError):
        RbfKernel(0.0)
    with pytest.raises(ValueError):
        RbfKernel(-1.0)


def test_rbf_same_point_is_one():
    k = RbfKernel(2.0)
    x = np.array([1.0, -3.0, 2.5])
    assert rbf_eval(k, x, x) == 1.0


def test_rbf_analytic_value():
    # ||x - x'|| = s * sqrt(2)  ->  exp(-1)
    s = 1.7
    k = RbfKernel(s)
    x = np.zeros(2)
    x2 = np.array([s * np.sqrt(2.0), 0.0])
    assert rbf_eval(k, x, x2) == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_rbf_limit_large_bandwidth():
    x = np.array([0.0, 0.0])
    x2 = np.array([3.0, 4.0])
    vals = [rbf_eval(RbfKernel(s), x, x2) for s in (1.0, 10.0, 100.0, 1000.0)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-4)


def test_rbf_dimension_mismatch():
    with pytest.raises(ValueError):
        rbf_eval(RbfKernel(1.0), np.zeros(2), np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(x=vectors, y=vectors)
def test_rbf_symmetric_and_bounded(x, y):
    n = min(len(x), len(y))
    x, y = np.array(x[:n]), np.array(y[:n])
    k = RbfKernel(1.3)
    a = rbf_eval(k, x, y)
    assert a == rbf_eval(k, y, x)
    assert 0.0 < a <= 1.0


def test_gram_unit_diagonal_and_psd():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((30, 4))
    k = RbfKernel(1.5)
    g = gram_matrix(k, a, a)
    assert np.array_equal(np.diag(g), np.ones(30))
    assert np.array_equal(g, g.T)
    assert np.linalg.eigvalsh(g).min() >= -1e-10


def test_gram_matches_scalar_loop():
    k = RbfKernel(0.8)
    a = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, -1.0]])
    b = np.array([[0.5, 0.5], [-1.0, 2.0]])
    g = gram_matrix(k, a, b)
    for i in range(3):
        for j in range(2):
            assert g[i, j] == pytest.approx(rbf_eval(k, a[i], b[j]), rel=1e-12)


def test_gram_dimension_mismatch():
    with pytest.raises(ValueError):
        gram_matrix(RbfKernel(1.0), np.ones((3, 2)), np.ones((3, 3)))


def test_linear_kernel_gram():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((5, 3))
    g = gram_matrix(LinearKernel(), a, a)
    assert np.allclose(g, a @ a.T, atol=1e-15)
    assert np.array_equal(g, g.T)


def test_median_two_points():
    a = np.array([[0.0, 0.0], [4.0, 0.0]])
    assert median_heuristic(a) == pytest.approx(4.0)


def test_median_three_collinear():
    # pairwise distances {1, 1, 2} -> median 1
    a = np.array([[0.0], [1.0], [2.0]])
    assert median_heuristic(a) == pytest.approx(1.0)


def test_median_even_pair_count_uses_middle_mean():
    # 4 points on a line at 0, 1, 2, 3: distances {1,1,1,2,2,3} -> (1+2)/2
    a = np.arange(4.0)[:, None]
    assert median_heuristic(a) == pytest.approx(1.5)


def test_median_brute_force_oracle():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((300, 5))
    got = median_heuristic(a, n_samples=100, seed=42)
    idx = np.random.default_rng(42).choice(300, size=100, replace=False)
    sub = a[idx]
    dists = [np.linalg.norm(sub[i] - sub[j]) for i in range(100) for j in range(i + 1, 100)]
    assert got == pytest.approx(np.median(dists), rel=1e-12)
    assert got == median_heuristic(a, n_samples=100, seed=42)


def test_median_identical_points_error():
    a = np.ones((10, 3))
    with pytest.raises(ValueError, match="manually"):
        median_heuristic(a)


def test_median_argument_validation():
    with pytest.raises(ValueError):
        median_heuristic(np.ones((1, 3)))
    with pytest.raises(ValueError):
        median_heuristic(np.ones((5, 3)), n_samples=1)
