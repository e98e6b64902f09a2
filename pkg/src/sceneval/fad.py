"""Frechet Audio Distance between Gaussians fitted to embedding sets.

FAD(r, g) = ||mu_r - mu_g||^2 + Tr(Sigma_r + Sigma_g - 2 sqrt(Sigma_r Sigma_g))

The product Sigma_r Sigma_g is not symmetric, so the cross term is computed
through the equivalent symmetric form

    Tr(sqrt(Sigma_r Sigma_g)) = Tr(sqrt(sqrt(Sigma_g) Sigma_r sqrt(Sigma_g)))

which keeps every matrix square root on a symmetric PSD input. That trace
is evaluated as the sum of singular values of sqrt(Sigma_r) sqrt(Sigma_g)
(the same quantity: the inner matrix is C^T C for that product), because
the SVD resolves the near-zero end of the spectrum to full absolute
precision where eigendecomposing the squared matrix loses half the digits
on rank-deficient inputs. Sample
covariances at desk scale are routinely rank deficient (fewer vectors than
dimensions); small negative eigenvalues are clipped to zero and the clipped
mass is reported as a diagnostic instead of failing. All accumulation is in
float64 regardless of the float32 storage format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScenevalError
from .features import EmbeddingSet

# Eigenvalues below -RELATIVE_CLIP_TOLERANCE * max|eigenvalue| count as
# clipped mass; anything negative is zeroed either way.
RELATIVE_CLIP_TOLERANCE = 1e-10
_SYMMETRY_RTOL = 1e-12
_NEGATIVE_RESIDUAL_TOLERANCE = 1e-8


class TooFewSamples(ScenevalError):
    pass


class NotSymmetric(ScenevalError):
    pass


class EigenFailure(ScenevalError):
    pass


class DimensionMismatch(ScenevalError):
    pass


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and covariance matrix fitted to one embedding set."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"mean of dim {mean.shape} with covariance {cov.shape}"
            )
        if self.sample_count < 2:
            raise TooFewSamples(f"sample_count must be >= 2, got {self.sample_count}")
        _require_symmetric(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class FadResult:
    """value = mean_term + trace_term; negative_eigenvalue_mass records the
    total magnitude clipped from covariance spectra along the way."""

    value: float
    mean_term: float
    trace_term: float
    negative_eigenvalue_mass: float

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "mean_term": self.mean_term,
            "trace_term": self.trace_term,
            "negative_eigenvalue_mass": self.negative_eigenvalue_mass,
        }


def _require_symmetric(mat: np.ndarray) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
    asym = float(np.abs(mat - mat.T).max(initial=0.0))
    if asym > _SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance at scale {scale:.3e}")


def fit_gaussian(embedding_set: EmbeddingSet) -> GaussianStats:
    """Arithmetic mean and unbiased (n-1) sample covariance, symmetrised.

    Raises TooFewSamples for fewer than two vectors.
    """
    n = embedding_set.count
    if n < 2:
        raise TooFewSamples(f"need >= 2 vectors to fit a Gaussian, got {n}")
    x = np.asarray(embedding_set.vectors, dtype=np.float64)
    mean = x.mean(axis=0)
    centred = x - mean
    cov = (centred.T @ centred) / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, covariance=cov, sample_count=n)


def _psd_sqrt_with_mass(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Returns (root, clipped_mass) where clipped_mass sums |eigenvalue| over
    eigenvalues more negative than the relative clip threshold.
    """
    _require_symmetric(mat)
    sym = (mat + mat.T) / 2.0
    try:
        eigenvalues, q = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigendecomposition failed: {exc}") from exc
    scale = float(np.abs(eigenvalues).max(initial=0.0))
    threshold = RELATIVE_CLIP_TOLERANCE * scale
    mass = float(np.abs(eigenvalues[eigenvalues < -threshold]).sum())
    clipped = np.maximum(eigenvalues, 0.0)
    root = (q * np.sqrt(clipped)) @ q.T
    return (root + root.T) / 2.0, mass


def sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root S of a symmetric PSD matrix, S @ S ~= mat.

    Eigenvalues are clipped at zero from below; use frechet_distance for
    the clipped-mass diagnostic. Raises NotSymmetric or EigenFailure.
    """
    root, _ = _psd_sqrt_with_mass(np.asarray(mat, dtype=np.float64))
    return root


def frechet_distance(r: GaussianStats, g: GaussianStats) -> FadResult:
    """Frechet distance between two fitted Gaussians.

    A tiny negative total (rounding residual above -1e-8) is clamped to
    zero; anything more negative indicates a numerical failure and raises
    EigenFailure rather than returning garbage.
    """
    if r.dim != g.dim:
        raise DimensionMismatch(f"dimensions differ: {r.dim} vs {g.dim}")
    diff = r.mean - g.mean
    mean_term = float(diff @ diff)

    root_r, mass_r = _psd_sqrt_with_mass(r.covariance)
    root_g, mass_g = _psd_sqrt_with_mass(g.covariance)
    try:
        singular_values = np.linalg.svd(root_r @ root_g, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"singular value decomposition failed: {exc}") from exc
    trace_sqrt = float(singular_values.sum())

    trace_term = float(
        np.trace(r.covariance) + np.trace(g.covariance) - 2.0 * trace_sqrt
    )
    value = mean_term + trace_term
    if -_NEGATIVE_RESIDUAL_TOLERANCE < value < 0.0:
        value = 0.0
        trace_term = -mean_term
    elif value < 0.0:
        raise EigenFailure(f"distance came out at {value}, beyond rounding tolerance")
    return FadResult(
        value=value,
        mean_term=mean_term,
        trace_term=trace_term,
        negative_eigenvalue_mass=mass_r + mass_g,
    )


def fad_score(reference: EmbeddingSet, generated: EmbeddingSet) -> FadResult:
    """Fit Gaussians to both sets and return their Frechet distance.

    ``reference`` is the curated evaluation audio, ``generated`` one
    system's outputs; the distance itself is symmetric in the two.
    """
    return frechet_distance(fit_gaussian(reference), fit_gaussian(generated))
