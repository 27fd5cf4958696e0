"""Stieltjes transform of the limiting spectrum and optimal shrinkers.

The limiting eigenvalue distribution of A_hat = A + sigma n**-0.5 Z is the
free additive convolution of the spectrum H of A with a semicircle of
variance sigma^2.  Its Stieltjes transform m(z) is the unique upper
half-plane solution of the fixed point

    m = sum_k  w_k / (lambda_k - z - sigma^2 m),

for an atomic H with atoms lambda_k and weights w_k.  Boundary values
m(x + i0) = u(x) + i v(x) give the limiting density v/pi, and weighted
variants

    u_h(x) + i v_h(x) = sum_k  w_k h(lambda_k) / (lambda_k - x - sigma^2 m)

yield the optimal shrinker f_h(x) = v_h(x)/v(x): the asymptotically best
diagonal (in Frobenius loss) for estimating h(A) in the eigenbasis of
A_hat.  Closed forms are provided for h(t) = t, 1/t, t^2, the regularized
pseudoinverse t/(t^2 + reg^2), the matrix pseudoinverse, and the
minimizers of five alternative losses.

Numerics: interior points use damped fixed-point iteration with a Newton
fallback; boundary values descend an eta-ladder eta_k = eta_0 2**-k
(warm-started continuation), Richardson-extrapolate the last four rungs
to eta = 0, and polish with a safeguarded Newton step on the real-axis
equation.  A point is declared out of support when v <= V_FLOOR.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OutOfSupportError, ValidationError
from .rmt import DiscreteSpectrum

__all__ = [
    "V_FLOOR",
    "BoundaryStieltjes",
    "FunctionalBoundary",
    "solve_m",
    "boundary_uv",
    "boundary_uv_h",
    "shrinker_general",
    "shrinker_identity",
    "shrinker_inverse",
    "shrinker_square",
    "shrinker_reg_pseudoinverse",
    "shrinker_pseudoinverse",
    "loss_shrinkers",
    "small_noise_mse",
    "LOSS_NAMES",
]

# below this boundary density (times pi) a point counts as out of support
V_FLOOR = 1e-7

LOSS_NAMES = ("stein_A_f", "stein_f_A", "divergence", "rel_frob_A_f", "rel_frob_f_A")

_LADDER_RUNGS = 12
_LADDER_MAX_EXTRA = 52


@dataclass(frozen=True)
class BoundaryStieltjes:
    """Boundary value u + iv of the Stieltjes transform at a real point x."""

    x: float
    u: float
    v: float

    @property
    def m(self) -> complex:
        return complex(self.u, self.v)

    @property
    def in_support(self) -> bool:
        return self.v > V_FLOOR

    @property
    def density(self) -> float:
        """Limiting spectral density of A_hat at x."""
        return self.v / np.pi


@dataclass(frozen=True)
class FunctionalBoundary:
    """Boundary value u_h + i v_h of the h-weighted transform at x."""

    x: float
    u_h: float
    v_h: float
    h_id: str = "h"


def _atoms(spectrum: DiscreteSpectrum):
    return spectrum.values, spectrum.weights


def _f_map(m, lam, w, s2, z):
    return np.sum(w / (lam - z - s2 * m))


def _f_deriv(m, lam, w, s2, z):
    return s2 * np.sum(w / (lam - z - s2 * m) ** 2)


def _interior_solve(lam, w, s2, z, m0=None, tol=1e-13, max_iter=600):
    """Solve the fixed point at Im z > 0, staying in the upper half-plane."""
    m = m0 if (m0 is not None and m0.imag > 0) else -1.0 / z
    tol = max(tol, 4e-16 * (1.0 + abs(m)))
    alpha = 1.0
    resid = abs(_f_map(m, lam, w, s2, z) - m)
    for _ in range(max_iter):
        if resid <= tol:
            return m
        proposal = (1.0 - alpha) * m + alpha * _f_map(m, lam, w, s2, z)
        if proposal.imag <= 0.0:
            alpha *= 0.5
            continue
        resid_new = abs(_f_map(proposal, lam, w, s2, z) - proposal)
        if resid_new < resid:
            m, resid = proposal, resid_new
            alpha = min(1.0, alpha * 1.25)
        else:
            alpha *= 0.5
            if alpha < 1e-3:
                break
    # Newton fallback on g(m) = m - F(m); keeps Im m > 0 by step halving
    for _ in range(60):
        g = m - _f_map(m, lam, w, s2, z)
        if abs(g) <= tol:
            return m
        gp = 1.0 - _f_deriv(m, lam, w, s2, z)
        if gp == 0.0:
            break
        step = -g / gp
        scale = 1.0
        for _ in range(50):
            trial = m + scale * step
            if trial.imag > 0 and abs(trial - _f_map(trial, lam, w, s2, z)) < abs(g):
                break
            scale *= 0.5
        else:
            break
        m = trial
    resid = abs(m - _f_map(m, lam, w, s2, z))
    if resid <= max(10 * tol, 2e-13 * (1.0 + abs(m))):
        return m
    raise NumericalError(
        f"fixed-point iteration did not converge at z={z!r}",
        diagnostics={"residual": resid, "last_m": m},
    )


def _polish_real_axis(lam, w, s2, x, m0):
    """Safeguarded Newton refinement of the eta -> 0 limit at real x."""
    m = m0
    tol = max(1e-15, 4e-16 * (1.0 + abs(m0)))
    g = m - _f_map(m, lam, w, s2, x)
    for _ in range(60):
        if abs(g) <= tol:
            return m
        gp = 1.0 - _f_deriv(m, lam, w, s2, x)
        if gp == 0.0:
            return m
        step = -g / gp
        scale = 1.0
        improved = False
        for _ in range(50):
            trial = m + scale * step
            g_trial = trial - _f_map(trial, lam, w, s2, x)
            if abs(g_trial) < abs(g):
                m, g = trial, g_trial
                improved = True
                break
            scale *= 0.5
        if not improved:
            return m
    return m


def _richardson(values):
    table = list(values)
    k = len(table)
    for j in range(1, k):
        fac = 2.0**j - 1.0
        for i in range(k - 1, j - 1, -1):
            table[i] = table[i] + (table[i] - table[i - 1]) / fac
    return table[-1]


def solve_m(
    spectrum: DiscreteSpectrum,
    sigma: float,
    z: complex,
    tol: float = 1e-13,
    max_iter: int = 600,
) -> complex:
    """Stieltjes transform of the limiting spectrum of A_hat at Im z > 0.

    Returns the unique solution m with Im m > 0 of the fixed point; the
    residual |m - sum_k w_k/(lambda_k - z - sigma^2 m)| is at most 1e-12
    (relative to |m| once |m| exceeds unit scale).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValidationError(f"z must lie in the upper half-plane, got {z!r}")
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    lam, w = _atoms(spectrum)
    return _interior_solve(lam, w, sigma * sigma, z, tol=tol, max_iter=max_iter)


def _boundary_m(spectrum: DiscreteSpectrum, sigma: float, x: float) -> complex:
    """Boundary limit m(x + i0) via warm-started eta-ladder extrapolation.

    The ladder is eta_k = eta_0 2**-k with eta_0 = 1e-2 (diameter + 2 sigma)
    and 12 rungs; the last three rung-to-rung differences must decrease
    (the ladder extends adaptively, up to 52 extra rungs, when sigma is so
    small that the nominal rungs have not yet entered the monotone regime).
    The last four rungs are Richardson-extrapolated to eta = 0 and a
    safeguarded Newton polish enforces the fixed point at the boundary.
    """
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    lam, w = _atoms(spectrum)
    s2 = sigma * sigma
    x = float(x)
    eta0 = 1e-2 * (spectrum.diameter() + 2.0 * sigma)

    # warm continuation from O(spectral scale) height down to eta0
    m = None
    eta = 128.0 * eta0
    while eta > eta0 * 1.0001:
        m = _interior_solve(lam, w, s2, x + 1j * eta, m)
        eta /= 2.0

    rung_values = []
    eta = eta0
    k = 0
    while True:
        m = _interior_solve(lam, w, s2, x + 1j * eta, m)
        rung_values.append(m)
        k += 1
        if k >= _LADDER_RUNGS:
            diffs = np.abs(np.diff(np.array(rung_values[-4:])))
            scale = 1.0 + abs(rung_values[-1])
            if np.all(diffs < 1e-12 * scale):
                break  # converged to rounding noise
            if np.all(diffs[1:] <= diffs[:-1] * 1.02 + 1e-13 * scale):
                break  # monotone decrease over the last three steps
            if k >= _LADDER_RUNGS + _LADDER_MAX_EXTRA:
                raise NumericalError(
                    f"eta-ladder not monotone at x={x} after {k} rungs",
                    diagnostics={"diffs": diffs.tolist(), "eta": eta},
                )
        eta /= 2.0

    extrapolated = _richardson(rung_values[-4:])
    polished = _polish_real_axis(lam, w, s2, x, extrapolated)
    # keep the polish only while it stays on the ladder's branch
    if abs(polished - extrapolated) > 0.5 * (1.0 + abs(extrapolated)):
        polished = extrapolated
    resid = abs(polished - _f_map(polished, lam, w, s2, x))
    if polished.imag > V_FLOOR and resid > 1e-9 * (1.0 + abs(polished)):
        raise NumericalError(
            f"boundary value at x={x} has residual {resid:.2e}",
            diagnostics={"m": polished},
        )
    return polished


def _functional_sum(spectrum, sigma, x, m, h_values) -> complex:
    lam, w = _atoms(spectrum)
    return complex(np.sum(w * h_values / (lam - x - sigma * sigma * m)))


def _apply_h(spectrum, h):
    vals = np.array([float(h(t)) for t in spectrum.values])
    if not np.all(np.isfinite(vals)):
        bad = spectrum.values[~np.isfinite(vals)][0]
        raise ValidationError(f"h is not finite at eigenvalue {bad}")
    return vals


def boundary_uv(spectrum: DiscreteSpectrum, sigma: float, x: float) -> BoundaryStieltjes:
    """Boundary values (u, v) of the Stieltjes transform at real x.

    v/pi is the limiting density of A_hat's spectrum at x; v is clamped to
    be nonnegative.  ``v > V_FLOOR`` marks x as inside the support.
    """
    m = _boundary_m(spectrum, sigma, x)
    ones = np.ones_like(spectrum.values)
    val = _functional_sum(spectrum, sigma, x, m, ones)
    return BoundaryStieltjes(x=float(x), u=val.real, v=max(val.imag, 0.0))


def boundary_uv_h(
    spectrum: DiscreteSpectrum,
    sigma: float,
    x: float,
    h,
    h_id: str = None,
) -> FunctionalBoundary:
    """Boundary values (u_h, v_h) of the h-weighted transform at real x.

    Computed as sum_k w_k h(lambda_k) / (lambda_k - x - sigma^2 m) with m
    the boundary Stieltjes value; for h == 1 this reduces exactly to
    ``boundary_uv``.
    """
    m = _boundary_m(spectrum, sigma, x)
    h_values = _apply_h(spectrum, h)
    val = _functional_sum(spectrum, sigma, x, m, h_values)
    name = h_id if h_id is not None else getattr(h, "__name__", "h")
    return FunctionalBoundary(x=float(x), u_h=val.real, v_h=val.imag, h_id=name)


def _boundary_pair(spectrum, sigma, x, h_values):
    """(m, functional value) sharing a single boundary solve."""
    m = _boundary_m(spectrum, sigma, x)
    ones = np.ones_like(spectrum.values)
    base = _functional_sum(spectrum, sigma, x, m, ones)
    if base.imag <= V_FLOOR:
        raise OutOfSupportError(
            f"x={x} is outside the numerical support (v={base.imag:.2e})"
        )
    func = _functional_sum(spectrum, sigma, x, m, h_values)
    return m, base, func


def shrinker_general(spectrum: DiscreteSpectrum, sigma: float, x: float, h) -> float:
    """Optimal shrinker v_h(x)/v(x) for estimating h(A) in Frobenius loss."""
    h_values = _apply_h(spectrum, h)
    _, base, func = _boundary_pair(spectrum, sigma, x, h_values)
    return func.imag / base.imag


def _boundary_in_support(spectrum, sigma, x):
    m = _boundary_m(spectrum, sigma, x)
    ones = np.ones_like(spectrum.values)
    base = _functional_sum(spectrum, sigma, x, m, ones)
    if base.imag <= V_FLOOR:
        raise OutOfSupportError(
            f"x={x} is outside the numerical support (v={base.imag:.2e})"
        )
    return base.real, base.imag, m


def shrinker_identity(spectrum: DiscreteSpectrum, sigma: float, x: float) -> float:
    """Closed form for h(t) = t:  x + 2 sigma^2 u(x)."""
    u, _, _ = _boundary_in_support(spectrum, sigma, x)
    return x + 2.0 * sigma * sigma * u


def _check_invertible(spectrum):
    if np.min(np.abs(spectrum.values)) <= 1e-12:
        raise ValidationError(
            "H has an atom at 0; use shrinker_pseudoinverse for the pseudoinverse"
        )


def shrinker_inverse(spectrum: DiscreteSpectrum, sigma: float, x: float) -> float:
    """Closed form for h(t) = 1/t:
    (x + sigma^2 m_H(0)) / ((x + sigma^2 u)^2 + sigma^4 v^2)."""
    _check_invertible(spectrum)
    u, v, _ = _boundary_in_support(spectrum, sigma, x)
    s2 = sigma * sigma
    m_h0 = float(np.sum(spectrum.weights / spectrum.values))
    return (x + s2 * m_h0) / ((x + s2 * u) ** 2 + s2 * s2 * v * v)


def shrinker_square(spectrum: DiscreteSpectrum, sigma: float, x: float) -> float:
    """Closed form for h(t) = t^2:
    sigma^2 + (x + sigma^2 u)^2 - sigma^4 v^2 + 2 sigma^2 u (x + sigma^2 u)."""
    u, v, _ = _boundary_in_support(spectrum, sigma, x)
    s2 = sigma * sigma
    a = x + s2 * u
    return s2 + a * a - s2 * s2 * v * v + 2.0 * s2 * u * a


def shrinker_reg_pseudoinverse(
    spectrum: DiscreteSpectrum, sigma: float, x: float, lambda_reg: float
) -> float:
    """Optimal shrinker for h(t) = t/(t^2 + lambda_reg^2).

    Uses the partial-fraction closed form in terms of m and the plain
    Stieltjes transform of H at +/- i lambda_reg, both exact for atomic H.
    """
    if lambda_reg <= 0:
        raise ValidationError(f"lambda_reg must be positive, got {lambda_reg}")
    u, v, m = _boundary_in_support(spectrum, sigma, x)
    s2 = sigma * sigma
    zeta = x + s2 * m
    li = 1j * lambda_reg
    m_h_plus = spectrum.stieltjes(li)
    m_h_minus = spectrum.stieltjes(-li)
    val = (
        m * zeta / (zeta * zeta + lambda_reg * lambda_reg)
        + m_h_plus / (2.0 * (li - zeta))
        - m_h_minus / (2.0 * (li + zeta))
    )
    return val.imag / v


def shrinker_pseudoinverse(h_with_atom, sigma: float, x: float, min_atom: float = 1e-8) -> float:
    """Optimal shrinker for the matrix pseudoinverse when H = p delta_0 + (1-p) nu.

    ``h_with_atom`` is the pair (p, nu) with p in (0, 1) and nu an atomic
    measure supported at or above ``min_atom``.  The shrunk function is
    h(0) = 0, h(t) = 1/t on the support of nu.
    """
    p, nu = h_with_atom
    if not 0.0 < p < 1.0:
        raise ValidationError(f"atom weight p must lie in (0, 1), got {p}")
    if not isinstance(nu, DiscreteSpectrum):
        nu = DiscreteSpectrum(np.asarray(nu, dtype=float))
    if float(np.min(nu.values)) < min_atom:
        raise ValidationError(
            f"nu has an atom below {min_atom}; support must stay away from 0"
        )
    full_values = np.concatenate([nu.values, [0.0]])
    full_weights = np.concatenate([(1.0 - p) * nu.weights, [p]])
    spectrum = DiscreteSpectrum(full_values, full_weights)
    u, v, m = _boundary_in_support(spectrum, sigma, x)
    zeta = x + sigma * sigma * m
    m_nu0 = complex(np.sum(nu.weights / nu.values))
    val = m / zeta + p / (zeta * zeta) - (1.0 - p) * m_nu0 / zeta
    return val.imag / v


def loss_shrinkers(spectrum: DiscreteSpectrum, sigma: float, x: float, loss: str) -> float:
    """Optimal shrinker at x under an alternative loss.

    ======================  =========================================
    loss                    minimizer
    ======================  =========================================
    ``stein_A_f``           1 / f_inv(x)
    ``stein_f_A``           f_t(x)
    ``divergence``          sqrt(f_t(x) / f_inv(x))
    ``rel_frob_A_f``        f_inv(x) / f_invsq(x)
    ``rel_frob_f_A``        f_tsq(x) / f_t(x)
    ======================  =========================================

    where f_h = v_h/v for h(t) = t, 1/t, t^2, 1/t^2.  All of these assume
    the support of H is strictly positive.
    """
    if loss not in LOSS_NAMES:
        raise ValidationError(f"unknown loss {loss!r}; expected one of {LOSS_NAMES}")
    if float(np.min(spectrum.values)) <= 1e-12:
        raise ValidationError(
            "loss shrinkers require H supported on the positive axis"
        )
    lam = spectrum.values
    m, base, _ = _boundary_pair(spectrum, sigma, x, np.ones_like(lam))
    v = base.imag

    def v_h(h_values):
        return _functional_sum(spectrum, sigma, x, m, h_values).imag

    if loss == "stein_A_f":
        return v / v_h(1.0 / lam)
    if loss == "stein_f_A":
        return v_h(lam) / v
    if loss == "divergence":
        return float(np.sqrt(v_h(lam) / v_h(1.0 / lam)))
    if loss == "rel_frob_A_f":
        return v_h(1.0 / lam) / v_h(1.0 / lam**2)
    return v_h(lam**2) / v_h(lam)


def small_noise_mse(spectrum: DiscreteSpectrum, h, h_prime) -> float:
    """Small-noise limit of ||h(A_hat) - h(A)||_F^2 / (n sigma^2).

    Equals the double sum over atoms of
    w_k w_l ((h(lambda_k) - h(lambda_l)) / (lambda_k - lambda_l))^2
    with the difference quotient replaced by h'(lambda) on coinciding atoms.
    """
    lam = spectrum.values
    w = spectrum.weights
    h_vals = _apply_h(spectrum, h)
    hp_vals = np.array([float(h_prime(t)) for t in lam])
    diff_l = lam[:, None] - lam[None, :]
    diff_h = h_vals[:, None] - h_vals[None, :]
    same = np.abs(diff_l) < 1e-14 * (1.0 + np.abs(lam[:, None]))
    ratio = np.where(same, hp_vals[:, None], diff_h / np.where(same, 1.0, diff_l))
    return float((w[:, None] * w[None, :] * ratio**2).sum())
