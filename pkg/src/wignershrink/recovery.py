"""Spectrum recovery: deconvolve the noise out of observed eigenvalues.

Given the observed eigenvalues lambda_hat of A_hat = A + sigma n**-0.5 Z
and the noise level sigma, sample one surrogate noise matrix
Z_hat ~ sigma GOE(n) and minimize over candidate spectra T

    (1/n) sum_j (t_hat_j(T) - lambda_hat_j)^2,

where t_hat(T) are the descending eigenvalues of diag(T) + n**-0.5 Z_hat.
The candidate is sorted before building the diagonal, which makes the
objective permutation invariant and the search unconstrained.  Gradients
are exact: the derivative of the j-th simulated eigenvalue with respect
to t_i is the squared (i, j) eigenvector entry (first-order eigenvalue
perturbation), so one eigendecomposition yields both value and gradient.

When sigma is unknown, a scree sweep reruns the recovery over a grid of
candidate noise levels: the objective stays near zero while the candidate
is below the true level and lifts off above it, so the level is read off
just before the rise.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .rmt import DiscreteSpectrum, sample_goe
from .rng import derive_seed, generator

__all__ = [
    "RecoveryConfig",
    "RestartDiagnostics",
    "RecoveryResult",
    "NoiseSweep",
    "DegenerateSpectrumWarning",
    "recovery_objective",
    "recovery_gradient",
    "recover_spectrum",
    "estimate_noise",
]


class DegenerateSpectrumWarning(RuntimeWarning):
    """Simulated eigenvalues nearly coincide; the gradient falls back to
    subgradient semantics at the crossing."""


@dataclass(frozen=True)
class RecoveryConfig:
    """Optimizer and algorithm knobs for spectrum recovery."""

    max_iter: int = 500
    gtol_scale: float = 1e-8  # gradient-norm tolerance is gtol_scale * n
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    lbfgs_threshold: int = 500  # limited-memory updates above this dimension
    lbfgs_memory: int = 10
    ftol_rel: float = 1e-3  # plateau stop: relative per-step decrease
    ftol_patience: int = 8  # consecutive plateau steps before stopping
    k_reg: int = 1  # independent noise copies averaged (regularization)
    degenerate_gap: float = 1e-12


@dataclass(frozen=True)
class RestartDiagnostics:
    seed: int
    init_objective: float
    objective: float
    iterations: int
    status: str


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """Recovered spectrum plus optimization diagnostics."""

    t_star: DiscreteSpectrum
    objective: float
    restarts: tuple
    iterations: int
    sigma_used: float
    degenerate_count: int = 0


@dataclass(frozen=True, eq=False)
class NoiseSweep:
    """Scree sweep over candidate noise levels."""

    grid: np.ndarray
    objectives: np.ndarray
    chosen_sigma2: float
    threshold: float
    results: tuple = field(default=(), repr=False)


def _as_descending(values) -> np.ndarray:
    if isinstance(values, DiscreteSpectrum):
        return values.values
    return np.sort(np.asarray(values, dtype=float))[::-1]


def _scaled_noise(zhat, n):
    zhat = np.asarray(zhat, dtype=float)
    if zhat.shape != (n, n):
        raise ValidationError(f"noise matrix shape {zhat.shape}, expected ({n}, {n})")
    return zhat / np.sqrt(n)


def recovery_objective(t_vec, zhat, lambda_hat) -> float:
    """Mean squared mismatch between simulated and observed eigenvalues.

    ``zhat`` is the pre-sampled sigma * GOE(n) matrix; the n**-0.5 scaling
    is applied here.  ``t_vec`` may be in any order.
    """
    lam_hat = _as_descending(lambda_hat)
    n = lam_hat.size
    t_vec = np.asarray(t_vec, dtype=float)
    if t_vec.shape != (n,):
        raise ValidationError(f"T has shape {t_vec.shape}, expected ({n},)")
    m = _scaled_noise(zhat, n).copy()
    m[np.diag_indices_from(m)] += np.sort(t_vec)[::-1]
    t_hat = np.linalg.eigvalsh(m)[::-1]
    r = t_hat - lam_hat
    return float(r @ r) / n


def recovery_gradient(t_vec, zhat, lambda_hat) -> np.ndarray:
    """Exact gradient of ``recovery_objective`` with respect to t_vec.

    Entry i is (2/n) sum_j (t_hat_j - lambda_hat_j) x_ij^2 with x_j the
    simulated eigenvectors; entries are returned in the caller's ordering
    of ``t_vec``.  A ``DegenerateSpectrumWarning`` is issued when two
    simulated eigenvalues are closer than the degeneracy gap.
    """
    lam_hat = _as_descending(lambda_hat)
    n = lam_hat.size
    t_vec = np.asarray(t_vec, dtype=float)
    if t_vec.shape != (n,):
        raise ValidationError(f"T has shape {t_vec.shape}, expected ({n},)")
    _, grad, min_gap = _value_and_gradient(
        t_vec, _scaled_noise(zhat, n), lam_hat
    )
    if n > 1 and min_gap < RecoveryConfig.degenerate_gap:
        warnings.warn(
            f"simulated eigenvalue gap {min_gap:.2e} below "
            f"{RecoveryConfig.degenerate_gap}; gradient is a subgradient",
            DegenerateSpectrumWarning,
        )
    return grad


def _value_and_gradient(t_vec, scaled_noise, lam_hat):
    n = lam_hat.size
    perm = np.argsort(-t_vec, kind="stable")
    m = scaled_noise.copy()
    m[np.diag_indices_from(m)] += t_vec[perm]
    vals, vecs = np.linalg.eigh(m)
    t_hat = vals[::-1]
    x = vecs[:, ::-1]
    r = t_hat - lam_hat
    value = float(r @ r) / n
    g_sorted = (2.0 / n) * ((x * x) @ r)
    grad = np.empty(n)
    grad[perm] = g_sorted
    min_gap = float(np.min(np.diff(vals))) if n > 1 else np.inf
    return value, grad, min_gap


def _value_only(t_vec, scaled_noise, lam_hat):
    m = scaled_noise.copy()
    m[np.diag_indices_from(m)] += np.sort(t_vec)[::-1]
    t_hat = np.linalg.eigvalsh(m)[::-1]
    r = t_hat - lam_hat
    return float(r @ r) / lam_hat.size


class _Run:
    """One quasi-Newton run; counts degenerate-gap evaluations."""

    def __init__(self, scaled_noise, lam_hat, config):
        self.scaled_noise = scaled_noise
        self.lam_hat = lam_hat
        self.cfg = config
        self.degenerate = 0

    def value(self, x):
        return _value_only(x, self.scaled_noise, self.lam_hat)

    def value_grad(self, x):
        f, g, gap = _value_and_gradient(x, self.scaled_noise, self.lam_hat)
        if self.lam_hat.size > 1 and gap < self.cfg.degenerate_gap:
            self.degenerate += 1
        return f, g

    def minimize(self, x0):
        cfg = self.cfg
        n = x0.size
        gtol = cfg.gtol_scale * n
        limited = n > cfg.lbfgs_threshold
        x = x0.copy()
        f, g = self.value_grad(x)
        f_init = f
        hess_inv = None if limited else np.eye(n)
        s_hist, y_hist, rho_hist = [], [], []
        stall = 0
        status = "maxiter"
        iters = 0
        for iters in range(1, cfg.max_iter + 1):
            if np.linalg.norm(g) <= gtol:
                status = "gtol"
                break
            if limited:
                p = -self._two_loop(g, s_hist, y_hist, rho_hist)
            else:
                p = -(hess_inv @ g)
            slope = float(g @ p)
            if slope >= 0:  # safeguard: fall back to steepest descent
                p = -g
                slope = -float(g @ g)
            alpha, f_new = self._armijo(x, p, f, slope)
            if alpha is None:
                status = "linesearch_stall"
                break
            x_new = x + alpha * p
            f_new, g_new = self.value_grad(x_new)
            s = x_new - x
            y = g_new - g
            sy = float(s @ y)
            if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
                if limited:
                    s_hist.append(s)
                    y_hist.append(y)
                    rho_hist.append(1.0 / sy)
                    if len(s_hist) > cfg.lbfgs_memory:
                        s_hist.pop(0)
                        y_hist.pop(0)
                        rho_hist.pop(0)
                else:
                    rho = 1.0 / sy
                    hy = hess_inv @ y
                    hess_inv -= rho * (np.outer(s, hy) + np.outer(hy, s))
                    hess_inv += rho * (rho * float(y @ hy) + 1.0) * np.outer(s, s)
            drop = (f - f_new) / max(1e-300, abs(f))
            x, f, g = x_new, f_new, g_new
            stall = stall + 1 if drop < cfg.ftol_rel else 0
            if stall >= cfg.ftol_patience:
                status = "plateau"
                break
        return x, f, f_init, iters, status

    def _armijo(self, x, p, f, slope):
        cfg = self.cfg
        alpha = 1.0
        while alpha > 1e-14:
            f_trial = self.value(x + alpha * p)
            if f_trial <= f + cfg.armijo_c * alpha * slope:
                return alpha, f_trial
            alpha *= cfg.backtrack
        return None, None

    @staticmethod
    def _two_loop(g, s_hist, y_hist, rho_hist):
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            q *= float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return q


def recover_spectrum(
    lambda_hat,
    sigma: float,
    restarts: int = 10,
    seed: int = 0,
    config: RecoveryConfig = None,
) -> RecoveryResult:
    """Recover the spectrum of A from observed eigenvalues and noise level.

    Runs BFGS (limited-memory above ``config.lbfgs_threshold``) with Armijo
    backtracking from ``restarts`` random starts drawn as iid Gaussians
    centered at mean(lambda_hat) with standard deviation std(lambda_hat),
    against a single surrogate noise draw (``config.k_reg`` > 1 averages
    the solutions over that many independent draws).  Returns the best
    final point, sorted descending.
    """
    cfg = config if config is not None else RecoveryConfig()
    if restarts < 1:
        raise ValidationError(f"restarts must be >= 1, got {restarts}")
    if sigma < 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma}")
    lam_hat = _as_descending(lambda_hat)
    n = lam_hat.size

    if sigma == 0.0:
        # noiseless: the objective is minimized in closed form by lambda_hat
        diag = RestartDiagnostics(
            seed=seed, init_objective=0.0, objective=0.0, iterations=0, status="gtol"
        )
        return RecoveryResult(
            t_star=DiscreteSpectrum(lam_hat),
            objective=0.0,
            restarts=(diag,),
            iterations=0,
            sigma_used=0.0,
        )

    mu = float(lam_hat.mean())
    sd = float(lam_hat.std())
    copies = []
    diagnostics = []
    degenerate = 0
    best_iters = 0
    for copy_idx in range(cfg.k_reg):
        zhat = sigma * sample_goe(n, derive_seed(seed, "noise", copy_idx))
        run = _Run(zhat / np.sqrt(n), lam_hat, cfg)
        best = None
        for r in range(restarts):
            start_seed = derive_seed(seed, "init", copy_idx, r)
            x0 = mu + sd * generator(start_seed).standard_normal(n)
            x, f, f_init, iters, status = run.minimize(x0)
            diagnostics.append(
                RestartDiagnostics(
                    seed=start_seed,
                    init_objective=f_init,
                    objective=f,
                    iterations=iters,
                    status=status,
                )
            )
            usable = status == "gtol" or f < f_init
            if usable and (best is None or f < best[1]):
                best = (x, f, iters)
        if best is None:
            raise NumericalError(
                "no restart converged or descended",
                diagnostics={"restarts": diagnostics},
            )
        copies.append((np.sort(best[0])[::-1], run))
        degenerate += run.degenerate
        best_iters = max(best_iters, best[2])

    t_star = np.mean([c[0] for c in copies], axis=0)
    objective = float(
        np.mean([run.value(t_star) for _, run in copies])
    )
    return RecoveryResult(
        t_star=DiscreteSpectrum(t_star),
        objective=objective,
        restarts=tuple(diagnostics),
        iterations=best_iters,
        sigma_used=float(sigma),
        degenerate_count=degenerate,
    )


def estimate_noise(
    lambda_hat,
    sigma2_grid,
    restarts: int = 10,
    seed: int = 0,
    threshold_frac: float = 0.01,
    config: RecoveryConfig = None,
    workers: int = 1,
) -> NoiseSweep:
    """Scree-style noise-level estimation from observed eigenvalues.

    Reruns ``recover_spectrum`` for every candidate sigma^2 on the
    ascending grid (each grid point gets a fresh derived seed and noise
    draw) and records the final objective R(sigma_hat).  The chosen level
    is the midpoint between the largest grid value whose objective stays
    at or below ``threshold_frac * var(lambda_hat)`` and the next grid
    value.  Raises when every objective exceeds the threshold; warns when
    none does (the grid may sit entirely below the true level).
    """
    grid = np.asarray(sigma2_grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("sigma2 grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("sigma2 grid must be strictly ascending")
    if np.any(grid <= 0):
        raise ValidationError("sigma2 grid values must be positive")
    lam_hat = _as_descending(lambda_hat)
    threshold = threshold_frac * float(np.var(lam_hat))

    def run_point(i):
        return recover_spectrum(
            lam_hat,
            float(np.sqrt(grid[i])),
            restarts=restarts,
            seed=derive_seed(seed, "grid", i),
            config=config,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, range(grid.size)))
    else:
        results = [run_point(i) for i in range(grid.size)]
    objectives = np.array([res.objective for res in results])

    below = objectives <= threshold
    if not np.any(below):
        raise NumericalError(
            "grid below true sigma^2 not found: every objective exceeds the "
            f"threshold {threshold:.3e}",
            diagnostics={"grid": grid.tolist(), "objectives": objectives.tolist()},
        )
    last_below = int(np.max(np.nonzero(below)[0]))
    if last_below == grid.size - 1:
        warnings.warn(
            "largest grid value still fits the observation; the grid may be "
            "entirely below sigma^2",
            RuntimeWarning,
        )
        chosen = float(grid[-1])
    else:
        chosen = float((grid[last_below] + grid[last_below + 1]) / 2.0)
    return NoiseSweep(
        grid=grid,
        objectives=objectives,
        chosen_sigma2=chosen,
        threshold=threshold,
        results=tuple(results),
    )
