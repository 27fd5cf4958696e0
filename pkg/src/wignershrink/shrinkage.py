"""Eigenvalue shrinkage: oracle diagonal, Monte-Carlo estimate, losses.

Given the spectral decomposition of the observation A_hat, the best
Frobenius-loss estimator of h(A) sharing A_hat's eigenvectors is
W_hat diag(d) W_hat^T with the oracle diagonal

    d_i = w_hat_i^T h(A) w_hat_i,

which depends on the unknown A.  The Monte-Carlo algorithm replicates the
oracle asymptotically from the (known or recovered) spectrum of A alone:
it simulates diag(lambda) + sigma n**-0.5 GOE, reads off the same
quadratic forms in the simulated eigenbasis, and averages over replicates.
Windowed partial sums of the simulated diagonal converge to those of the
true oracle.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OutOfSupportError, ValidationError
from .rmt import DiscreteSpectrum, SpectralDecomposition, eigh, sample_goe
from .stieltjes import V_FLOOR, boundary_uv, shrinker_identity, shrinker_inverse, shrinker_square

__all__ = [
    "ShrinkageResult",
    "HFunction",
    "H_FUNCTIONS",
    "poly_h",
    "oracle_d",
    "mc_shrink",
    "reconstruct",
    "windowed_mean",
    "clip_values",
    "frobenius_loss",
    "stein_loss",
    "divergence_loss",
    "rel_frob_loss",
    "SupportProjector",
    "solve_noisy_linsys",
    "LINSYS_MODES",
]

LINSYS_MODES = ("rhs_isotropic", "solution_isotropic")


@dataclass(frozen=True)
class HFunction:
    """A named scalar function with optional derivative (for MSE limits)."""

    name: str
    fn: callable
    deriv: callable = None
    positive_only: bool = False

    def __call__(self, t):
        return self.fn(t)


def _pinv_h(t):
    return 0.0 if abs(t) < 1e-12 else 1.0 / t


H_FUNCTIONS = {
    "t": HFunction("t", lambda t: t, deriv=lambda t: 1.0),
    "inv": HFunction("inv", lambda t: 1.0 / t, deriv=lambda t: -1.0 / t**2, positive_only=True),
    "sqrt": HFunction("sqrt", lambda t: np.sqrt(t), deriv=lambda t: 0.5 / np.sqrt(t), positive_only=True),
    "square": HFunction("square", lambda t: t * t, deriv=lambda t: 2.0 * t),
    "pinv": HFunction("pinv", _pinv_h, positive_only=False),
}


def poly_h(coeffs) -> HFunction:
    """Polynomial h from coefficients in ascending power order."""
    coeffs = [float(c) for c in coeffs]
    poly = np.polynomial.Polynomial(coeffs)
    return HFunction("poly" + "_".join(repr(c) for c in coeffs), poly, deriv=poly.deriv())


@dataclass(frozen=True)
class ShrinkageResult:
    """Output of the Monte-Carlo shrinkage: the averaged diagonal ``d``
    ordered to match descending observed eigenvalues, plus provenance."""

    d: np.ndarray
    k: int
    h_id: str
    sigma_used: float
    seeds: tuple

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        d.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


def _h_values(h, values):
    vals = np.array([float(h(t)) for t in values])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise ValidationError(f"h is not finite at eigenvalue {values[bad][0]}")
    return vals


def _h_name(h):
    if isinstance(h, HFunction):
        return h.name
    return getattr(h, "__name__", "custom")


def oracle_d(decomp_a: SpectralDecomposition, decomp_ahat: SpectralDecomposition, h) -> np.ndarray:
    """Oracle diagonal d_i = w_hat_i^T h(A) w_hat_i, indexed by descending
    eigenvalues of A_hat.  The exact identity sum_i d_i = tr h(A) holds up
    to floating-point orthogonality."""
    if decomp_a.n != decomp_ahat.n:
        raise ValidationError(
            f"dimension mismatch: {decomp_a.n} vs {decomp_ahat.n}"
        )
    h_lam = _h_values(h, decomp_a.values)
    overlap = decomp_a.vectors.T @ decomp_ahat.vectors
    return (overlap * overlap).T @ h_lam


def mc_shrink(sigma_t: float, lambda_t, h, k: int, seed: int) -> ShrinkageResult:
    """Monte-Carlo nonlinear shrinkage.

    For each replicate j = 1..k, eigendecompose
    diag(lambda_t) + sigma_t n**-0.5 Z_j with Z_j a fresh GOE draw, set
    d_ij = g_i^T diag(h(lambda_t)) g_i in the simulated eigenbasis, and
    average over replicates.  Replicate j uses the derived seed
    ``seed XOR j``, so enlarging k never changes earlier replicates.

    ``lambda_t`` may be a ``DiscreteSpectrum`` or a plain vector; entries
    are used as the diagonal, sorted descending.
    """
    if k < 1:
        raise ValidationError(f"replicate count must be >= 1, got {k}")
    if sigma_t < 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma_t}")
    if isinstance(lambda_t, DiscreteSpectrum):
        values = lambda_t.values
    else:
        values = np.sort(np.asarray(lambda_t, dtype=float))[::-1]
    n = values.size
    h_vals = _h_values(h, values)
    total = np.zeros(n)
    seeds = []
    for j in range(1, k + 1):
        rep_seed = seed ^ j
        seeds.append(rep_seed)
        noise = sigma_t / np.sqrt(n) * sample_goe(n, rep_seed)
        noise[np.diag_indices_from(noise)] += values
        decomp = eigh(noise)
        g = decomp.vectors
        total += (g * g).T @ h_vals
    return ShrinkageResult(
        d=total / k, k=k, h_id=_h_name(h), sigma_used=float(sigma_t), seeds=seeds
    )


def reconstruct(decomp_ahat: SpectralDecomposition, d) -> np.ndarray:
    """W_hat diag(d) W_hat^T, exactly symmetrized."""
    d = np.asarray(d, dtype=float)
    if d.shape != (decomp_ahat.n,):
        raise ValidationError(
            f"diagonal length {d.shape} does not match n={decomp_ahat.n}"
        )
    m = (decomp_ahat.vectors * d) @ decomp_ahat.vectors.T
    return (m + m.T) / 2.0


def windowed_mean(d, a: float, b: float) -> float:
    """(1/n) sum of d_i over the index window [floor(n a), floor(n b)],
    1-based inclusive (the lower index is at least 1)."""
    d = np.asarray(d, dtype=float)
    n = d.size
    start = max(int(np.floor(n * a)), 1)
    end = int(np.floor(n * b))
    if end < start:
        return 0.0
    return float(d[start - 1 : end].sum()) / n


def clip_values(values, floor: float = 0.3) -> np.ndarray:
    """Clip a spectrum from below; used before shrinking unbounded h such
    as 1/t, where small recovered eigenvalues would blow up."""
    return np.maximum(np.asarray(values, dtype=float), floor)


def _check_pd(matrix, label):
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{label} is not positive definite") from None


def frobenius_loss(m_est: np.ndarray, m_true: np.ndarray) -> float:
    """n^-1 ||M_est - M_true||_F^2."""
    diff = np.asarray(m_est, dtype=float) - np.asarray(m_true, dtype=float)
    return float(np.sum(diff * diff)) / diff.shape[0]


def stein_loss(m_true: np.ndarray, m_est: np.ndarray) -> float:
    """n^-1 [tr(A^-1 B - I) - log det(A^-1 B)] with A true, B estimate."""
    a = np.asarray(m_true, dtype=float)
    b = np.asarray(m_est, dtype=float)
    _check_pd(a, "m_true")
    _check_pd(b, "m_est")
    n = a.shape[0]
    x = np.linalg.solve(a, b)
    logdet = np.linalg.slogdet(b)[1] - np.linalg.slogdet(a)[1]
    return (float(np.trace(x)) - n - logdet) / n


def divergence_loss(m_true: np.ndarray, m_est: np.ndarray) -> float:
    """n^-1 [tr(A^-1 B - I) + tr(B^-1 A - I)]."""
    a = np.asarray(m_true, dtype=float)
    b = np.asarray(m_est, dtype=float)
    _check_pd(a, "m_true")
    _check_pd(b, "m_est")
    n = a.shape[0]
    return (
        float(np.trace(np.linalg.solve(a, b)))
        + float(np.trace(np.linalg.solve(b, a)))
        - 2 * n
    ) / n


def rel_frob_loss(m_true: np.ndarray, m_est: np.ndarray) -> float:
    """n^-1 ||A^-1 B - I||_F^2."""
    a = np.asarray(m_true, dtype=float)
    b = np.asarray(m_est, dtype=float)
    _check_pd(a, "m_true")
    n = a.shape[0]
    x = np.linalg.solve(a, b) - np.eye(n)
    return float(np.sum(x * x)) / n


class SupportProjector:
    """Maps real points to the nearest point of the numerical support of
    the limiting spectrum of A_hat (needed because finite-n eigenvalues
    can straggle slightly outside it)."""

    def __init__(self, spectrum: DiscreteSpectrum, sigma: float, lo: float, hi: float, num: int = 1200):
        self.spectrum = spectrum
        self.sigma = float(sigma)
        xs = np.linspace(float(lo), float(hi), num)
        inside = [x for x in xs if boundary_uv(spectrum, sigma, x).in_support]
        if not inside:
            raise NumericalError(
                f"no support found in [{lo}, {hi}] for the given spectrum"
            )
        self._inside = np.array(inside)

    def project(self, x: float):
        """Return (x', boundary at x') with x' = x when x is in support,
        otherwise the nearest in-support grid point."""
        bv = boundary_uv(self.spectrum, self.sigma, x)
        if bv.in_support:
            return x, bv
        nearest = float(self._inside[np.argmin(np.abs(self._inside - x))])
        return nearest, boundary_uv(self.spectrum, self.sigma, nearest)


def solve_noisy_linsys(
    decomp_ahat: SpectralDecomposition,
    b: np.ndarray,
    mode: str,
    spectrum: DiscreteSpectrum,
    sigma: float,
    projector: SupportProjector = None,
) -> np.ndarray:
    """Solve A x = b from the noisy observation via spectral filtering.

    ``mode`` selects the filter matched to the distributional assumption:

    - ``rhs_isotropic``      b ~ N(0, I):   f = optimal shrinker for 1/t
    - ``solution_isotropic`` x ~ N(0, I):   f = (shrinker for t) / (shrinker for t^2)

    The filter is evaluated at each observed eigenvalue, projected to the
    nearest in-support point when it straggles outside; the result is
    W_hat diag(f) W_hat^T b.  With sigma = 0 both filters reduce to 1/t.
    """
    if mode not in LINSYS_MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {LINSYS_MODES}")
    b = np.asarray(b, dtype=float)
    if b.shape != (decomp_ahat.n,):
        raise ValidationError(f"b has shape {b.shape}, expected ({decomp_ahat.n},)")
    lam_hat = decomp_ahat.values

    if sigma == 0:
        if np.min(np.abs(lam_hat)) <= 1e-12:
            raise ValidationError("observed matrix is singular and sigma is 0")
        filt = 1.0 / lam_hat
    else:
        if mode == "rhs_isotropic" and np.min(np.abs(spectrum.values)) <= 1e-12:
            raise ValidationError(
                "rhs_isotropic mode needs the support of H away from 0"
            )
        if projector is None:
            atoms = spectrum.values
            lo = min(lam_hat.min(), atoms.min() - 2 * sigma) - 0.5 * sigma
            hi = max(lam_hat.max(), atoms.max() + 2 * sigma) + 0.5 * sigma
            projector = SupportProjector(spectrum, sigma, lo, hi)
        s2 = sigma * sigma
        m_h0 = None
        if mode == "rhs_isotropic":
            m_h0 = float(np.sum(spectrum.weights / spectrum.values))
        filt = np.empty_like(lam_hat)
        for i, x in enumerate(lam_hat):
            xp, bv = projector.project(float(x))
            u, v = bv.u, bv.v
            if mode == "rhs_isotropic":
                filt[i] = (xp + s2 * m_h0) / ((xp + s2 * u) ** 2 + s2 * s2 * v * v)
            else:
                a = xp + s2 * u
                f_t = xp + 2.0 * s2 * u
                f_t2 = s2 + a * a - s2 * s2 * v * v + 2.0 * s2 * u * a
                filt[i] = f_t / f_t2
    coeffs = decomp_ahat.vectors.T @ b
    return decomp_ahat.vectors @ (filt * coeffs)
