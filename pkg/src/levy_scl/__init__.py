"""Simulation toolkit for scalar conservation laws with multiplicative
compensated-Poisson jump noise: vanishing-viscosity solver, entropy
machinery and Monte Carlo rate estimators."""

from .levy_noise import (
    AtomicMeasure,
    JumpCoefficient,
    JumpPath,
    PowerLawMeasure,
    SeedDerivation,
    compensator_integral,
    sample_path,
    small_jump_check,
    truncated_intensity,
)
from .solvers import (
    Field,
    FluxModel,
    Grid1D,
    SolverConfig,
    Trajectory,
    burgers_flux,
    diffusion_step,
    heat_kernel_solution,
    hyperbolic_step,
    linear_flux,
    solve,
)
from .entropy_tools import (
    EntropyFamily,
    EntropyFluxPair,
    beta,
    beta_prime,
    beta_second,
    dissipation_functional,
    entropy_flux_beta,
    entropy_residual,
    ito_correction,
    kruzkov_flux,
    noise_distance,
)
from .estimators import (
    EnsembleStat,
    WeightPhi,
    besov_seminorm,
    bv_seminorm,
    ensemble_mean,
    fit_rate,
    lp_norm,
    modulus_of_continuity,
    mollified_increment,
    weighted_l1_distance,
)

__version__ = "0.1.0"
