import numpy as np
import pytest
from scipy.sparse import csr_matrix

from eeconv.framelet import PINNED_HAAR_RESPONSES
from eeconv.graph import build_matrices, erdos_renyi
from eeconv.spectral import (
    ConvergenceError,
    chebyshev_apply,
    chebyshev_apply_many,
    chebyshev_fit,
    eigendecompose,
    lambda_max_estimate,
    power_iteration_norm,
)

from conftest import random_corpus


def random_symmetric(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return a + a.T


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_diagonal(method):
    e = eigendecompose(np.diag([3.0, 1.0, 2.0]), method=method)
    np.testing.assert_allclose(e.eigenvalues, [1, 2, 3], atol=1e-14)
    np.testing.assert_allclose(e.eigenvectors, np.eye(3)[:, [1, 2, 0]], atol=1e-14)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_p2_spectrum(p2m, method):
    e = eigendecompose(p2m.delta_tilde, method=method)
    np.testing.assert_allclose(e.eigenvalues, [0, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    # Largest-magnitude entry positive; on a tie argmax takes the first entry.
    np.testing.assert_allclose(e.eigenvectors, [[s, s], [s, -s]], atol=1e-14)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_k3_spectrum(k3m, method):
    np.testing.assert_allclose(eigendecompose(k3m.delta_tilde, method=method).eigenvalues,
                               [0, 1, 1], atol=1e-13)


@pytest.mark.parametrize("seed", range(50))
def test_eigen_invariants(seed):
    n = 2 + (seed * 13) % 63
    m = random_symmetric(n, seed)
    for method in (["lapack", "jacobi"] if n <= 24 else ["lapack"]):
        e = eigendecompose(m, method=method)
        u, w = e.eigenvectors, e.eigenvalues
        assert np.max(np.abs(u.T @ u - np.eye(n))) <= 1e-8
        assert np.max(np.abs(m @ u - u * w)) <= 1e-7 * np.abs(m).max()
        assert np.all(np.diff(w) >= 0)
        assert np.all(u[np.argmax(np.abs(u), axis=0), np.arange(n)] > 0)


def test_jacobi_matches_lapack():
    m = random_symmetric(12, 7)
    np.testing.assert_allclose(eigendecompose(m, "jacobi").eigenvalues,
                               np.linalg.eigvalsh(m), atol=1e-11)


def test_eigendecompose_errors():
    with pytest.raises(ValueError, match="not symmetric"):
        eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ConvergenceError, match="1 sweeps"):
        eigendecompose(random_symmetric(8, 0), method="jacobi", max_sweeps=1)


def test_lambda_max_examples(p2m):
    assert lambda_max_estimate(np.zeros((4, 4))) <= 0.01
    assert 1.0 <= lambda_max_estimate(p2m.delta_tilde, tol=0.01) <= 1.01


@pytest.mark.parametrize("g", random_corpus(15, seed=11), ids=lambda g: f"n{g.num_nodes}")
def test_lambda_max_brackets(g):
    delta = build_matrices(g).delta_tilde
    lmax = np.linalg.eigvalsh(delta).max()
    for tol in (1e-2, 1e-3):
        est = lambda_max_estimate(delta, tol=tol)
        assert lmax - 1e-12 <= est <= lmax * (1 + tol) + tol
        assert est <= 2 + tol


def test_lambda_max_fallback_is_flagged():
    # Two eigenvalues of equal magnitude and opposite sign make the Rayleigh quotient oscillate.
    m = np.diag([1.0, 1.0 - 1e-9, 0.5])
    est, info = lambda_max_estimate(m, max_iter=1, return_info=True)
    assert info["fallback"] and est == 2.0


def test_fit_constant():
    f = chebyshev_fit(lambda x: np.ones_like(x), degree=7)
    assert f.coefficients[0] == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(f.coefficients[1:])) <= 1e-14


def test_fit_identity_degree_one():
    f = chebyshev_fit(lambda x: x, degree=1)
    grid = np.linspace(0, 2, 101)
    assert np.max(np.abs(f(grid) - grid)) <= 1e-14


def test_fit_pinned_low_pass():
    f = chebyshev_fit(PINNED_HAAR_RESPONSES[0], degree=16)
    grid = np.linspace(0, 2, 1000)
    assert np.max(np.abs(f(grid) - PINNED_HAAR_RESPONSES[0](grid))) <= 1e-10
    assert f.max_error <= 1e-10


@pytest.mark.parametrize("g", PINNED_HAAR_RESPONSES)
def test_fit_error_monotone_in_degree(g):
    # Below ~1e-14 the grid error is round-off noise, so compare above that floor.
    errs = [max(chebyshev_fit(g, degree=t).max_error, 1e-14) for t in (4, 8, 16)]
    assert errs[0] >= errs[1] >= errs[2]


def test_fit_rejects_degree_zero():
    with pytest.raises(ValueError):
        chebyshev_fit(np.cos, degree=0)


def test_apply_constant_and_linear():
    gm = build_matrices(erdos_renyi(15, 0.3, seed=2))
    x = np.random.default_rng(0).standard_normal((15, 3))
    one = chebyshev_fit(lambda v: np.ones_like(v), degree=3)
    np.testing.assert_allclose(chebyshev_apply(one, gm.delta_tilde, x), x, atol=1e-14)
    lin = chebyshev_fit(lambda v: v, degree=1)
    out = chebyshev_apply(lin, gm.delta_tilde, x)
    assert np.max(np.abs(out - gm.delta_tilde @ x)) <= 1e-12 * np.abs(x).max()


def test_apply_polynomial_exactness():
    m = build_matrices(erdos_renyi(20, 0.2, seed=3)).delta_tilde
    x = np.random.default_rng(1).standard_normal((20, 2))
    for k in (2, 3, 5):
        poly = lambda v, k=k: 1.0 - 0.5 * v + 0.25 * v ** k
        f = chebyshev_fit(poly, degree=k)
        direct = x - 0.5 * m @ x + 0.25 * np.linalg.matrix_power(m, k) @ x
        out = chebyshev_apply(f, m, x)
        assert np.linalg.norm(out - direct) <= 1e-12 * np.linalg.norm(direct)


def test_apply_low_pass_on_p2(p2m):
    x = np.random.default_rng(0).standard_normal((2, 4))
    e = eigendecompose(p2m.delta_tilde)
    exact = e.apply(PINNED_HAAR_RESPONSES[0]) @ x
    approx = chebyshev_apply(chebyshev_fit(PINNED_HAAR_RESPONSES[0], 16), p2m.delta_tilde, x)
    assert np.linalg.norm(approx - exact) <= 1e-8 * np.linalg.norm(exact)


def test_apply_sparse_matches_dense():
    gm = build_matrices(erdos_renyi(30, 0.1, seed=5))
    x = np.random.default_rng(2).standard_normal((30, 2))
    fs = [chebyshev_fit(g, 16) for g in PINNED_HAAR_RESPONSES]
    dense = chebyshev_apply_many(fs, gm.delta_tilde, x)
    sparse = chebyshev_apply_many(fs, csr_matrix(gm.delta_tilde), x)
    for a, b in zip(dense, sparse):
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_apply_domain_check():
    f = chebyshev_fit(np.cos, degree=4, domain_upper=1.0)
    m = np.diag([0.0, 1.5])
    with pytest.raises(ValueError, match="larger domain_upper"):
        chebyshev_apply(f, m, np.ones((2, 1)))


def test_power_iteration_norm():
    rng = np.random.default_rng(3)
    for shape in [(4, 4), (6, 3), (2, 9)]:
        w = rng.standard_normal(shape)
        assert power_iteration_norm(w) == pytest.approx(np.linalg.norm(w, 2), rel=1e-8)
    assert power_iteration_norm(np.zeros((3, 3))) == 0.0
