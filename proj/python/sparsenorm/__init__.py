"""Norm and noise-level estimation for sparse vectors in correlated Gaussian noise."""

from ._sparsenorm import (  # noqa: F401
    ConfigParseError,
    CovarianceModel,
    DegenerateSampleError,
    RegimeError,
    chi1_cdf,
    chi1_quantile,
    dyadic_threshold,
    estimate_known_sigma,
    estimate_norm_known,
    estimate_star,
    estimate_star_eta,
    estimate_star_star,
    make_signal,
    mills_ratio,
    observe,
    rate_phi,
    rate_phi_star,
    rate_psi_star,
    rate_psi_tilde,
    run_experiment_csv,
    run_test,
    separation_radius,
    sigma_sq_D,
    sigma_sq_S,
    sigma_sq_eta,
    std_normal_cdf,
    std_normal_quantile,
    truncated_moments,
)

__version__ = "0.1.0"
