"""Dense symmetric linear algebra for the distribution metrics.

Everything here operates on small dense matrices (feature covariances and
sample-similarity kernels, at most a few thousand rows) and is pure: no
global state, safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# eigenvalues this far below zero (relative to the spectrum scale) are
# treated as rounding noise and clamped; anything lower is a real error
PSD_TOL_SCALE = 1e-8


class ConvergenceError(RuntimeError):
    """Eigensolver failed to converge."""


@dataclass(frozen=True)
class GaussianSummary:
    """First two moments of a feature matrix."""

    mu: np.ndarray  # (d,)
    sigma: np.ndarray  # (d, d), symmetric

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class EigenSpectrum:
    """Real eigenvalues in descending order, optionally with vectors."""

    values: np.ndarray  # (d,) descending
    vectors: np.ndarray | None = None  # (d, d), column i pairs with values[i]


def gaussian_summary(features: np.ndarray) -> GaussianSummary:
    """Column means and unbiased covariance of an (n, d) feature matrix."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix, got shape {f.shape}")
    n = f.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples for a covariance, got {n}")
    mu = f.mean(axis=0)
    centered = f - mu
    sigma = centered.T @ centered / (n - 1)
    sigma = (sigma + sigma.T) / 2.0
    return GaussianSummary(mu=mu, sigma=sigma)


def sym_eig(a: np.ndarray, want_vectors: bool = False) -> EigenSpectrum:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as (A + Aᵀ)/2 before decomposition; clearly
    nonsymmetric input is rejected rather than silently averaged away.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > 1e-8 * scale:
        raise ValueError(f"matrix is not symmetric (max|A-A^T| = {asym:g})")
    a = (a + a.T) / 2.0
    try:
        if want_vectors:
            values, vectors = np.linalg.eigh(a)
        else:
            values = np.linalg.eigvalsh(a)
            vectors = None
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from None
    order = np.argsort(values)[::-1]
    values = values[order]
    if vectors is not None:
        vectors = vectors[:, order]
    trace = float(np.trace(a))
    if abs(float(values.sum()) - trace) > 1e-8 * max(1.0, abs(trace)):
        raise ConvergenceError("eigenvalue sum drifted from the matrix trace")
    return EigenSpectrum(values=values, vectors=vectors)


def clamp_psd(values: np.ndarray, tol_scale: float = PSD_TOL_SCALE) -> np.ndarray:
    """Clamp slightly negative eigenvalues of a nominally-PSD matrix to 0.

    Negatives beyond tol_scale·max|λ| indicate the matrix was not PSD at
    all and raise instead of being hidden.
    """
    values = np.asarray(values, dtype=np.float64)
    tol = tol_scale * (float(np.abs(values).max()) if values.size else 0.0)
    low = float(values.min()) if values.size else 0.0
    if low < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {low:g} < -{tol:g})")
    return np.maximum(values, 0.0)


def cosine_kernel(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity matrix K[i, j] = ⟨f_i, f_j⟩ / (‖f_i‖‖f_j‖).

    Zero-norm rows follow the convention sim(0, x) = 0 for x ≠ 0 and
    sim(0, 0) = 1, so duplicated blank samples still count as identical.
    The result is exactly symmetric with a unit diagonal.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix, got shape {f.shape}")
    norms = np.linalg.norm(f, axis=1)
    zero = norms == 0.0
    unit = f / np.where(zero, 1.0, norms)[:, None]
    k = unit @ unit.T
    if zero.any():
        k[zero, :] = 0.0
        k[:, zero] = 0.0
        k[np.ix_(zero, zero)] = 1.0
    k = (k + k.T) / 2.0
    np.fill_diagonal(k, 1.0)
    return k


def kernel_eigenvalues(features: np.ndarray) -> np.ndarray:
    """Eigenvalues of cosine_kernel(F)/n, descending, clamped to ≥ 0.

    When d < n and no row is all-zero, the same nonzero spectrum comes
    from the d×d Gram matrix ĜᵀĜ/n of the row-normalized features, which
    is much cheaper; both routes agree within 1e-8 by construction.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError(f"expected a nonempty (n, d) matrix, got shape {f.shape}")
    n, d = f.shape
    norms = np.linalg.norm(f, axis=1)
    if d < n and bool(np.all(norms > 0.0)):
        unit = f / norms[:, None]
        gram = unit.T @ unit / n
        values = clamp_psd(sym_eig(gram).values)
        padded = np.zeros(n, dtype=np.float64)
        padded[:d] = values
        return padded
    k = cosine_kernel(f) / n
    return clamp_psd(sym_eig(k).values)


def trace_sqrt_product(s1: np.ndarray, s2: np.ndarray) -> float:
    """Tr((S1·S2)^{1/2}) for symmetric PSD S1, S2.

    Computed as Σ√λ_i of the symmetric product S1^{1/2}·S2·S1^{1/2},
    which shares its spectrum with S1·S2 but stays symmetric throughout.
    """
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise ValueError(f"covariance shapes differ: {s1.shape} vs {s2.shape}")
    spectrum = sym_eig(s1, want_vectors=True)
    roots = np.sqrt(clamp_psd(spectrum.values))
    v = spectrum.vectors
    half = (v * roots) @ v.T
    inner = half @ s2 @ half
    inner = (inner + inner.T) / 2.0
    values = clamp_psd(sym_eig(inner).values)
    return float(np.sqrt(values).sum())
