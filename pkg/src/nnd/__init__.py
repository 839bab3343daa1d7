"""Nuclear norm distribution: densities, samplers, penalty learning, diagnostics."""

from .diagnostics import (
    EssReport,
    SpectralReport,
    ess,
    ks_statistic,
    spectral_compare,
    two_sample_ks,
    wasserstein_1d,
)
from .distributions import (
    NP_CALIBRATED_SIGMA2,
    NndParams,
    NpParams,
    bessel_k0,
    gamma_cdf,
    nnd_log_density_unnorm,
    np_1x1_density,
    np_asymptotic_log_density,
    np_asymptotic_log_density_1x1,
    np_limit_eigenvalue_density,
    np_limit_eigenvalue_radial_cdf,
    np_limit_squared_sv_density,
    np_limit_squared_sv_edge,
    sample_gamma,
    sample_haar_orthogonal,
    sample_inverse_gamma,
    sample_nnd_singular_values,
    sample_nnd_via_svd,
    sample_normal_product,
    sample_uniform_stiefel,
    singular_value_log_density_unnorm,
)
from .exceptions import ConfigurationError, NumericalError, SamplingError
from .linalg import SvdTriple, as_matrix, nuclear_norm, prox_nuclear, svd
from .models import (
    CompletionModel,
    DenoisingModel,
    ExperimentResult,
    MetricSummary,
    PriorModel,
    fit_lambda_moment,
    lambda_grid,
    log_posterior_complete,
    log_posterior_denoise,
    make_lowrank_problem,
    metrics,
    posterior_mean,
    run_experiment,
)
from .samplers import (
    ChainConfig,
    ChainOutput,
    ChainState,
    HyperState,
    gamma2_update,
    lambda_gibbs_update,
    prox_grad_completion_step,
    prox_langevin_denoise_step,
    prox_langevin_prior_step,
    robbins_monro_update,
    run_chain,
    svd_gibbs_step,
)
from .vmf import matrix_vmf_refresh, sample_matrix_vmf, sample_vmf_sphere

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
