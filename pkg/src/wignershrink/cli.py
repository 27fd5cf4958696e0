"""Command-line interface.

Verbs: deconvolve, estimate-noise, shrink, denoise, solve-linsys,
reproduce, selftest.  Exit codes: 0 success, 2 validation error,
3 numerical failure (non-convergence).
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .experiments import EXPERIMENT_IDS, default_config, run_experiments
from .io import read_matrix, read_vector, write_matrix, write_series, write_vector
from .recovery import estimate_noise, recover_spectrum
from .rmt import DiscreteSpectrum, eigh, sample_goe
from .shrinkage import (
    H_FUNCTIONS,
    clip_values,
    divergence_loss,
    frobenius_loss,
    mc_shrink,
    poly_h,
    reconstruct,
    rel_frob_loss,
    solve_noisy_linsys,
    stein_loss,
)

_H_CHOICES = ("t", "inv", "sqrt", "square", "pinv", "custom-poly")


@click.group()
@click.version_option(version=__version__)
@click.option("--seed", default=0, show_default=True, help="Master random seed.")
@click.option("--threads", default=1, show_default=True, help="Worker threads for sweeps and experiment batches.")
@click.option("--out-dir", default="results", show_default=True, help="Output directory for experiment artifacts.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True, help="Console report format.")
@click.pass_context
def cli(ctx, seed, threads, out_dir, fmt):
    """Eigenvalue shrinkage and spectrum deconvolution for noisy symmetric matrices."""
    ctx.obj = {"seed": seed, "threads": threads, "out_dir": out_dir, "format": fmt}


def _resolve_h(name, poly_coeffs):
    if name == "custom-poly":
        if not poly_coeffs:
            raise ValidationError("--poly-coeffs is required with --h custom-poly")
        return poly_h([float(c) for c in poly_coeffs.split(",")])
    return H_FUNCTIONS[name]


def _report(ctx, payload):
    if ctx.obj["format"] == "json":
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            click.echo(f"{key},{value}")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True), help="Observed eigenvalues, one per line.")
@click.option("--sigma2", required=True, type=float, help="Noise level sigma^2.")
@click.option("--restarts", default=10, show_default=True)
@click.option("--seed", default=None, type=int, help="Override the global seed.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Recovered eigenvalues output.")
@click.pass_context
def deconvolve(ctx, in_path, sigma2, restarts, seed, out_path):
    """Recover the spectrum of A from the observed spectrum of A_hat."""
    if sigma2 < 0:
        raise ValidationError("sigma2 must be nonnegative")
    lam_hat = read_vector(in_path)
    result = recover_spectrum(
        lam_hat,
        float(np.sqrt(sigma2)),
        restarts=restarts,
        seed=ctx.obj["seed"] if seed is None else seed,
    )
    write_vector(out_path, result.t_star.values)
    _report(ctx, {"objective": result.objective, "iterations": result.iterations, "out": out_path})


@cli.command("estimate-noise")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--grid", required=True, help="sigma^2 grid as start:stop:step, e.g. 0.1:2.0:0.05.")
@click.option("--restarts", default=10, show_default=True)
@click.option("--threshold-frac", default=0.01, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def estimate_noise_cmd(ctx, in_path, grid, restarts, threshold_frac, seed, out_path):
    """Scree sweep to estimate an unknown noise level."""
    try:
        start, stop, step = (float(t) for t in grid.split(":"))
    except ValueError:
        raise ValidationError(f"cannot parse grid {grid!r}; expected start:stop:step") from None
    values = np.arange(start, stop + step * 1e-9, step)
    lam_hat = read_vector(in_path)
    sweep = estimate_noise(
        lam_hat,
        values,
        restarts=restarts,
        seed=ctx.obj["seed"] if seed is None else seed,
        threshold_frac=threshold_frac,
        workers=ctx.obj["threads"],
    )
    below = sweep.objectives <= sweep.threshold
    write_series(
        out_path,
        [
            ("sigma2", sweep.grid),
            ("objective", sweep.objectives),
            ("chosen", [int(b) for b in below]),
        ],
    )
    _report(ctx, {"chosen_sigma2": sweep.chosen_sigma2, "threshold": sweep.threshold, "out": out_path})


@cli.command()
@click.option("--h", "h_name", type=click.Choice(_H_CHOICES), default="t", show_default=True)
@click.option("--poly-coeffs", default=None, help="Comma-separated coefficients (ascending powers) for custom-poly.")
@click.option("--sigma", required=True, type=float, help="Noise scale sigma.")
@click.option("--K", "k", default=1, show_default=True, help="Monte-Carlo replicates.")
@click.option("--seed", default=None, type=int)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True), help="Observed matrix A_hat (CSV).")
@click.option("--spectrum", "spectrum_path", required=True, type=click.Path(exists=True), help="Spectrum of A (true or recovered), one value per line.")
@click.option("--clip", "clip_floor", default=0.3, show_default=True, help="Lower clip applied to the spectrum for h unbounded near 0.")
@click.option("--true", "true_path", default=None, type=click.Path(exists=True), help="True matrix A; enables the loss report.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Shrunk diagonal output, one value per line.")
@click.pass_context
def shrink(ctx, h_name, poly_coeffs, sigma, k, seed, in_path, spectrum_path, clip_floor, true_path, out_path):
    """Monte-Carlo nonlinear shrinkage of the observed eigenvalues."""
    h = _resolve_h(h_name, poly_coeffs)
    a_hat = read_matrix(in_path)
    lam = read_vector(spectrum_path)
    if getattr(h, "positive_only", False) or h_name == "pinv":
        lam = clip_values(lam, clip_floor)
    result = mc_shrink(sigma, lam, h, k, ctx.obj["seed"] if seed is None else seed)
    write_vector(out_path, result.d)
    payload = {"h": result.h_id, "K": result.k, "out": out_path}
    if true_path is not None:
        a_true = read_matrix(true_path)
        decomp = eigh(a_hat)
        target = eigh(a_true)
        h_true = np.array([float(h(t)) for t in target.values])
        estimate = reconstruct(decomp, result.d)
        truth = reconstruct(target, h_true)
        losses = {"frobenius": frobenius_loss(estimate, truth)}
        try:
            losses["stein"] = stein_loss(truth, estimate)
            losses["divergence"] = divergence_loss(truth, estimate)
            losses["rel_frob"] = rel_frob_loss(truth, estimate)
        except ValidationError:
            pass  # losses needing positive definiteness are skipped
        click.echo(json.dumps({"losses": losses}, indent=2, sort_keys=True))
    _report(ctx, payload)


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--sigma2", required=True, type=float)
@click.option("--spectrum", "spectrum_path", default=None, type=click.Path(exists=True), help="Known spectrum of A; recovered from A_hat when omitted.")
@click.option("--K", "k", default=1, show_default=True)
@click.option("--restarts", default=10, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def denoise(ctx, in_path, sigma2, spectrum_path, k, restarts, seed, out_path):
    """Estimate A itself (h(t) = t): recover the spectrum, shrink, rebuild."""
    seed = ctx.obj["seed"] if seed is None else seed
    sigma = float(np.sqrt(sigma2))
    a_hat = read_matrix(in_path)
    decomp = eigh(a_hat)
    if spectrum_path is None:
        lam = recover_spectrum(decomp.values, sigma, restarts=restarts, seed=seed).t_star.values
    else:
        lam = read_vector(spectrum_path)
    result = mc_shrink(sigma, lam, H_FUNCTIONS["t"], k, seed)
    write_matrix(out_path, reconstruct(decomp, result.d))
    _report(ctx, {"out": out_path, "K": k})


@cli.command("solve-linsys")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--b", "b_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["rhs_isotropic", "solution_isotropic"]), default="rhs_isotropic", show_default=True)
@click.option("--sigma2", required=True, type=float)
@click.option("--spectrum", "spectrum_path", default=None, type=click.Path(exists=True))
@click.option("--restarts", default=10, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def solve_linsys(ctx, in_path, b_path, mode, sigma2, spectrum_path, restarts, seed, out_path):
    """Solve A x = b given the noisy A_hat via the matched spectral filter."""
    seed = ctx.obj["seed"] if seed is None else seed
    sigma = float(np.sqrt(sigma2))
    a_hat = read_matrix(in_path)
    b = read_vector(b_path)
    decomp = eigh(a_hat)
    if spectrum_path is not None:
        lam = read_vector(spectrum_path)
    elif sigma > 0:
        lam = recover_spectrum(decomp.values, sigma, restarts=restarts, seed=seed).t_star.values
    else:
        lam = decomp.values
    x = solve_noisy_linsys(decomp, b, mode, DiscreteSpectrum(lam), sigma)
    write_vector(out_path, x)
    _report(ctx, {"mode": mode, "out": out_path})


@cli.command()
@click.option("--figure", "figures", required=True, multiple=True, help="Figure number 1-6, or 'all'. Repeatable.")
@click.option("--n", "n_override", default=None, type=int, help="Override the experiment size.")
@click.option("--restarts", default=None, type=int)
@click.pass_context
def reproduce(ctx, figures, n_override, restarts):
    """Rerun the benchmark experiments at desk scale."""
    wanted = []
    for f in figures:
        if f == "all":
            wanted.extend(EXPERIMENT_IDS)
        else:
            try:
                wanted.append(EXPERIMENT_IDS[int(f) - 1])
            except (ValueError, IndexError):
                raise ValidationError(f"unknown figure {f!r}; use 1-6 or 'all'") from None
    overrides = {"output_dir": ctx.obj["out_dir"], "workers": ctx.obj["threads"]}
    if n_override is not None:
        overrides["n"] = n_override
    if restarts is not None:
        overrides["restarts"] = restarts
    configs = [default_config(exp_id, **overrides) for exp_id in wanted]
    summaries = run_experiments(configs, workers=ctx.obj["threads"])
    for summary in summaries:
        click.echo(json.dumps(summary, sort_keys=True))


@cli.command()
@click.pass_context
def selftest(ctx):
    """Fast internal consistency checks (a reduced acceptance sweep)."""
    from .stieltjes import boundary_uv, shrinker_general, shrinker_identity, solve_m
    from .recovery import recovery_gradient, recovery_objective
    from .rng import generator

    failures = []

    def check(name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        click.echo(f"{status} {name}{(': ' + detail) if detail else ''}")
        if not ok:
            failures.append(name)

    rng = generator(20240)
    delta0 = DiscreteSpectrum([0.0])
    errs = []
    for _ in range(20):
        z = complex(rng.uniform(-4, 4), rng.uniform(0.05, 4))
        root = np.sqrt(z * z - 4 + 0j)
        closed = (-z + root) / 2
        if closed.imag <= 0:
            closed = (-z - root) / 2
        errs.append(abs(solve_m(delta0, 1.0, z) - closed))
    check("stieltjes_fixed_point", max(errs) < 1e-10, f"max err {max(errs):.1e}")

    spectrum = DiscreteSpectrum([1.0, 4.0, 9.0])
    bv = boundary_uv(spectrum, 1.0, 4.2)
    f_gen = shrinker_general(spectrum, 1.0, 4.2, lambda t: t)
    f_closed = shrinker_identity(spectrum, 1.0, 4.2)
    check("shrinker_consistency", abs(f_gen - f_closed) < 1e-8 and bv.v > 0)

    n = 12
    lam_hat = np.sort(rng.standard_normal(n))[::-1] * 2 + 4
    zhat = sample_goe(n, 7) * 0.5
    t = lam_hat + 0.1 * rng.standard_normal(n)
    g = recovery_gradient(t, zhat, lam_hat)
    fd = np.empty(n)
    h = 1e-6
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd[i] = (recovery_objective(t + e, zhat, lam_hat) - recovery_objective(t - e, zhat, lam_hat)) / (2 * h)
    rel = np.max(np.abs(g - fd)) / max(1e-12, np.max(np.abs(fd)))
    check("recovery_gradient", rel < 1e-4, f"rel err {rel:.1e}")

    d = mc_shrink(0.5, spectrum.values, H_FUNCTIONS["t"], 1, 3).d
    check("mc_trace_identity", abs(d.sum() - spectrum.values.sum()) < 1e-9)

    if failures:
        raise NumericalError(f"selftest failures: {', '.join(failures)}")
    click.echo("selftest: all checks passed")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 130
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 2
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
