"""Random-matrix sampling, eigendecomposition, and spectral-measure types.

The observation model throughout the package is

    A_hat = A + sigma * n**-0.5 * Z,

with ``A`` symmetric and ``Z`` a Wigner matrix (GOE or i.i.d. entries with
mean 0 and variance 1).  This module provides the samplers for ``Z``, the
eigendecomposition wrapper used everywhere, and the atomic spectral
measures that represent eigenvalue distributions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .rng import generator

__all__ = [
    "DiscreteSpectrum",
    "SpectralDecomposition",
    "NoisyModel",
    "sample_goe",
    "sample_wigner",
    "eigh",
    "weyl_bound_check",
    "semicircle_cdf",
    "WIGNER_DISTRIBUTIONS",
]

WIGNER_DISTRIBUTIONS = ("gaussian", "rademacher", "laplace")


@dataclass(frozen=True, eq=False)
class DiscreteSpectrum:
    """Atomic spectral measure: eigenvalues sorted descending plus weights.

    ``weights`` defaults to uniform 1/n.  Values and weights are stored as
    read-only float arrays; instances are immutable and safe to share
    across threads.
    """

    values: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("spectrum needs at least one eigenvalue")
        if not np.all(np.isfinite(values)):
            raise ValidationError("spectrum contains non-finite values")
        if self.weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        else:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
            if weights.shape != values.shape:
                raise ValidationError("weights length does not match values")
            if np.any(weights < 0):
                raise ValidationError("weights must be nonnegative")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValidationError(
                    f"weights sum to {weights.sum()!r}, expected 1 within 1e-12"
                )
        order = np.argsort(-values, kind="stable")
        values = values[order]
        weights = weights[order]
        values.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def mean(self) -> float:
        return float(self.weights @ self.values)

    def var(self) -> float:
        mu = self.mean()
        return float(self.weights @ (self.values - mu) ** 2)

    def moment(self, k: int) -> float:
        return float(self.weights @ self.values**k)

    def diameter(self) -> float:
        return float(self.values[0] - self.values[-1])

    def stieltjes(self, z: complex) -> complex:
        """Plain Stieltjes transform sum(w_k / (lambda_k - z))."""
        return complex(np.sum(self.weights / (self.values - z)))

    def diag_matrix(self) -> np.ndarray:
        """Diagonal matrix with this spectrum (canonical representative)."""
        return np.diag(self.values)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (descending) with the matching orthonormal eigenvector
    matrix; column j of ``vectors`` pairs with ``eigenvalues.values[j]``."""

    eigenvalues: DiscreteSpectrum
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float)
        n = len(self.eigenvalues)
        if vectors.shape != (n, n):
            raise ValidationError(
                f"eigenvector matrix shape {vectors.shape} does not match n={n}"
            )
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def values(self) -> np.ndarray:
        return self.eigenvalues.values

    def validate(self, atol: float = 1e-8) -> None:
        """Check per-entry orthonormality of the eigenvector matrix."""
        gram = self.vectors.T @ self.vectors
        err = np.max(np.abs(gram - np.eye(self.n)))
        if err > atol:
            raise ValidationError(f"eigenvectors not orthonormal (max dev {err:.2e})")

    def matrix(self) -> np.ndarray:
        """Reconstruct V diag(lambda) V^T (exactly symmetrized)."""
        m = (self.vectors * self.values) @ self.vectors.T
        return (m + m.T) / 2.0


def sample_goe(n: int, seed: int) -> np.ndarray:
    """Sample an n x n GOE matrix: off-diagonal variance 1, diagonal variance 2.

    Callers apply the ``n**-0.5`` scaling themselves.  Deterministic in
    ``seed``; the returned matrix equals its transpose exactly.
    """
    if n < 1:
        raise ValidationError(f"matrix dimension must be >= 1, got {n}")
    g = generator(seed).standard_normal((n, n))
    return (g + g.T) / np.sqrt(2.0)


def sample_wigner(n: int, dist: str, seed: int) -> np.ndarray:
    """Sample a symmetric Wigner matrix with i.i.d. unit-variance entries.

    ``dist`` is one of ``gaussian``, ``rademacher``, ``laplace``; the
    Laplace scale is chosen so the entry variance is 1.  The diagonal is
    drawn from the same distribution as the upper half.
    """
    if n < 1:
        raise ValidationError(f"matrix dimension must be >= 1, got {n}")
    rng = generator(seed)
    if dist == "gaussian":
        full = rng.standard_normal((n, n))
    elif dist == "rademacher":
        full = 2.0 * rng.integers(0, 2, size=(n, n)).astype(float) - 1.0
    elif dist == "laplace":
        # Laplace(scale b) has variance 2 b^2; b = 1/sqrt(2) gives variance 1.
        full = rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(n, n))
    else:
        raise ValidationError(
            f"unsupported noise distribution {dist!r}; "
            f"expected one of {WIGNER_DISTRIBUTIONS}"
        )
    upper = np.triu(full)
    return upper + np.triu(full, 1).T


def eigh(matrix: np.ndarray) -> SpectralDecomposition:
    """Eigendecompose a symmetric matrix, eigenvalues sorted descending.

    Raises on non-finite entries or asymmetry beyond 1e-10 relative to the
    largest entry.  Backed by LAPACK via ``numpy.linalg.eigh``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    asym = float(np.max(np.abs(m - m.T)))
    if asym > 1e-10 * scale:
        raise ValidationError(
            f"matrix is not symmetric (max |M - M^T| = {asym:.2e}, scale {scale:.2e})"
        )
    sym = (m + m.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    return SpectralDecomposition(
        eigenvalues=DiscreteSpectrum(vals[::-1]),
        vectors=np.ascontiguousarray(vecs[:, ::-1]),
    )


def weyl_bound_check(
    spec_a: DiscreteSpectrum,
    spec_ahat: DiscreteSpectrum,
    sigma: float,
    z_opnorm: float,
) -> bool:
    """True iff max_i |lambda_hat_i - lambda_i| <= sigma * z_opnorm.

    ``z_opnorm`` is the operator norm of the scaled noise ``n**-0.5 Z``;
    the bound is Weyl's eigenvalue perturbation inequality and is used as
    a sanity invariant in tests.
    """
    if len(spec_a) != len(spec_ahat):
        raise ValidationError(
            f"spectra have different lengths: {len(spec_a)} vs {len(spec_ahat)}"
        )
    dev = float(np.max(np.abs(spec_ahat.values - spec_a.values)))
    return dev <= sigma * z_opnorm


def semicircle_cdf(x, radius: float = 2.0):
    """CDF of the semicircle law on [-radius, radius] (variance (radius/2)^2)."""
    x = np.asarray(x, dtype=float)
    t = np.clip(x / radius, -1.0, 1.0)
    return 0.5 + (t * np.sqrt(1.0 - t**2) + np.arcsin(t)) / np.pi


@dataclass(frozen=True, eq=False)
class NoisyModel:
    """Bundle describing one observation A_hat = A + sigma n**-0.5 Z.

    ``A`` is represented by its spectrum (taken diagonal, which loses no
    generality for spectral experiments); pass ``matrix_a`` to use a full
    symmetric matrix instead.  ``noise_kind`` is ``"goe"`` or one of the
    i.i.d. Wigner distributions.  The seed fully determines ``Z``.
    """

    spectrum_a: DiscreteSpectrum
    sigma: float
    noise_kind: str = "goe"
    seed: int = 0
    matrix_a: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma}")
        if self.noise_kind != "goe" and self.noise_kind not in WIGNER_DISTRIBUTIONS:
            raise ValidationError(f"unknown noise kind {self.noise_kind!r}")
        if self.matrix_a is not None:
            a = np.asarray(self.matrix_a, dtype=float)
            n = len(self.spectrum_a)
            if a.shape != (n, n):
                raise ValidationError("matrix_a shape does not match spectrum length")
            object.__setattr__(self, "matrix_a", a)

    @property
    def n(self) -> int:
        return len(self.spectrum_a)

    def base_matrix(self) -> np.ndarray:
        if self.matrix_a is not None:
            return self.matrix_a
        return self.spectrum_a.diag_matrix()

    def noise(self) -> np.ndarray:
        """The unscaled Wigner matrix Z for this model's seed."""
        if self.noise_kind == "goe":
            return sample_goe(self.n, self.seed)
        return sample_wigner(self.n, self.noise_kind, self.seed)

    def observed(self) -> np.ndarray:
        """A_hat = A + sigma n**-0.5 Z."""
        return self.base_matrix() + self.sigma / np.sqrt(self.n) * self.noise()
