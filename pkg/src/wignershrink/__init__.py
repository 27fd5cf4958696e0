"""Estimate functions of a large symmetric matrix from one noisy
observation A_hat = A + sigma n**-0.5 Z via nonlinear eigenvalue
shrinkage, including recovery of the spectrum of A and of the noise
level sigma from A_hat alone."""

__version__ = "0.1.0"

from .errors import (
    NumericalError,
    OutOfSupportError,
    ValidationError,
    WignerShrinkError,
)
from .rmt import (
    DiscreteSpectrum,
    NoisyModel,
    SpectralDecomposition,
    eigh,
    sample_goe,
    sample_wigner,
    semicircle_cdf,
    weyl_bound_check,
)
from .stieltjes import (
    V_FLOOR,
    BoundaryStieltjes,
    FunctionalBoundary,
    boundary_uv,
    boundary_uv_h,
    loss_shrinkers,
    shrinker_general,
    shrinker_identity,
    shrinker_inverse,
    shrinker_pseudoinverse,
    shrinker_reg_pseudoinverse,
    shrinker_square,
    small_noise_mse,
    solve_m,
)
from .shrinkage import (
    H_FUNCTIONS,
    HFunction,
    ShrinkageResult,
    SupportProjector,
    clip_values,
    divergence_loss,
    frobenius_loss,
    mc_shrink,
    oracle_d,
    poly_h,
    reconstruct,
    rel_frob_loss,
    solve_noisy_linsys,
    stein_loss,
    windowed_mean,
)
from .recovery import (
    NoiseSweep,
    RecoveryConfig,
    RecoveryResult,
    estimate_noise,
    recover_spectrum,
    recovery_gradient,
    recovery_objective,
)
from .experiments import (
    EXPERIMENT_IDS,
    ExperimentConfig,
    KernelRecipe,
    build_kernel_matrix,
    default_config,
    run_experiment,
    run_experiments,
    spectrum_values,
    wasserstein2,
)
