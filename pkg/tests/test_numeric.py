"""Tests for the symmetric linear-algebra helpers."""

import numpy as np
import pytest

from divscore.numeric import (
    clamp_psd,
    cosine_kernel,
    gaussian_summary,
    kernel_eigenvalues,
    sym_eig,
    trace_sqrt_product,
)


def random_psd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T / d


# ---------------------------------------------------------------------------
# gaussian_summary


def test_gaussian_summary_hand_case():
    g = gaussian_summary(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert g.mu.tolist() == [1.0, 0.0]
    assert g.sigma.tolist() == [[2.0, 0.0], [0.0, 0.0]]


def test_gaussian_summary_identical_rows():
    g = gaussian_summary(np.tile([3.0, -1.0, 2.0], (5, 1)))
    assert np.allclose(g.sigma, 0.0)
    assert g.mu.tolist() == [3.0, -1.0, 2.0]


def test_gaussian_summary_single_row_errors():
    with pytest.raises(ValueError, match="at least 2"):
        gaussian_summary(np.ones((1, 4)))


def test_gaussian_summary_unbiased_divisor():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(20, 3))
    g = gaussian_summary(f)
    assert np.allclose(g.sigma, np.cov(f, rowvar=False, ddof=1))
    assert np.array_equal(g.sigma, g.sigma.T)


# ---------------------------------------------------------------------------
# sym_eig


def test_sym_eig_diagonal():
    assert sym_eig(np.diag([3.0, 1.0])).values.tolist() == [3.0, 1.0]


def test_sym_eig_two_by_two():
    values = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]])).values
    assert np.allclose(values, [3.0, 1.0])


def test_sym_eig_identity():
    assert np.allclose(sym_eig(np.eye(7)).values, np.ones(7))


def test_sym_eig_descending_and_trace():
    rng = np.random.default_rng(1)
    for trial in range(20):
        a = rng.normal(size=(8, 8))
        a = (a + a.T) / 2
        spec = sym_eig(a)
        assert np.all(np.diff(spec.values) <= 0)
        assert abs(spec.values.sum() - np.trace(a)) <= 1e-8 * max(1.0, abs(np.trace(a)))


def test_sym_eig_reconstruction():
    rng = np.random.default_rng(2)
    for trial in range(10):
        a = rng.normal(size=(6, 6))
        a = (a + a.T) / 2
        spec = sym_eig(a, want_vectors=True)
        rebuilt = (spec.vectors * spec.values) @ spec.vectors.T
        assert np.linalg.norm(a - rebuilt) <= 1e-8 * max(1.0, np.linalg.norm(a))


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(ValueError, match="not symmetric"):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_clamp_psd_small_negatives_only():
    assert clamp_psd(np.array([1.0, -1e-12])).tolist() == [1.0, 0.0]
    with pytest.raises(ValueError, match="positive semidefinite"):
        clamp_psd(np.array([1.0, -0.5]))


# ---------------------------------------------------------------------------
# cosine_kernel


def test_cosine_kernel_orthogonal():
    k = cosine_kernel(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert k.tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_cosine_kernel_parallel():
    k = cosine_kernel(np.array([[1.0, 1.0], [2.0, 2.0]]))
    assert np.allclose(k, 1.0)


def test_cosine_kernel_forty_five_degrees():
    k = cosine_kernel(np.array([[1.0, 0.0], [1.0, 1.0]]))
    assert np.allclose(k[0, 1], 1.0 / np.sqrt(2.0))
    assert k[0, 1] == k[1, 0]


def test_cosine_kernel_zero_row_conventions():
    k = cosine_kernel(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]))
    assert k[0, 1] == 0.0 and k[1, 0] == 0.0  # sim(0, x) = 0
    assert k[0, 2] == 1.0 and k[2, 0] == 1.0  # sim(0, 0) = 1
    assert np.array_equal(np.diag(k), np.ones(3))


def test_cosine_kernel_is_psd_on_random_inputs():
    rng = np.random.default_rng(3)
    for trial in range(20):
        f = rng.normal(size=(rng.integers(2, 12), rng.integers(1, 6)))
        values = sym_eig(cosine_kernel(f)).values
        assert values.min() >= -1e-8


# ---------------------------------------------------------------------------
# kernel_eigenvalues (gram fast path vs explicit kernel)


def test_kernel_eigenvalues_gram_matches_kernel():
    rng = np.random.default_rng(4)
    for trial in range(20):
        n = int(rng.integers(4, 30))
        d = int(rng.integers(1, 4))  # d < n forces the gram route
        f = rng.normal(size=(n, d))
        fast = kernel_eigenvalues(f)
        slow = clamp_psd(sym_eig(cosine_kernel(f) / n).values)
        assert fast.shape == slow.shape == (n,)
        assert np.allclose(fast, slow, atol=1e-8)


def test_kernel_eigenvalues_zero_rows_use_kernel_route():
    f = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    values = kernel_eigenvalues(f)
    slow = clamp_psd(sym_eig(cosine_kernel(f) / 3).values)
    assert np.allclose(values, slow)


# ---------------------------------------------------------------------------
# trace_sqrt_product


def test_trace_sqrt_product_diagonal_closed_form():
    s = np.diag([4.0, 1.0])
    assert trace_sqrt_product(s, s) == pytest.approx(5.0, abs=1e-10)


def test_trace_sqrt_product_disjoint_support():
    assert trace_sqrt_product(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(0.0, abs=1e-10)


def test_trace_sqrt_product_identity():
    assert trace_sqrt_product(np.eye(3), np.eye(3)) == pytest.approx(3.0, abs=1e-10)


def test_trace_sqrt_product_equals_trace_on_self():
    rng = np.random.default_rng(5)
    for trial in range(10):
        s = random_psd(rng, 6)
        assert trace_sqrt_product(s, s) == pytest.approx(np.trace(s), abs=1e-8)


def test_trace_sqrt_product_symmetric_in_arguments():
    rng = np.random.default_rng(6)
    for trial in range(10):
        s1 = random_psd(rng, 5)
        s2 = random_psd(rng, 5)
        assert trace_sqrt_product(s1, s2) == pytest.approx(trace_sqrt_product(s2, s1), abs=1e-8)


def test_trace_sqrt_product_rejects_indefinite():
    with pytest.raises(ValueError, match="positive semidefinite"):
        trace_sqrt_product(np.diag([1.0, -1.0]), np.eye(2))
