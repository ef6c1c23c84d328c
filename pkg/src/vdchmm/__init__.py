"""Variable-duration copula hidden Markov model for disease trajectories."""

from .copulas import CopulaParam, copula_cdf, copula_cdf_multi, joint_pmf
from .covariates import CovariateSpec, RISK_FACTORS
from .criteria import compute_loo, compute_lpd, compute_waic, out_of_sample_lpd, pointwise_loglik
from .decision import (
    CostModel,
    EvaluationReport,
    RegimenMap,
    evaluate,
    fit_regimen_map,
    recommend_online,
    recommend_series,
)
from .emissions import MISSING, EmissionTable, build_emission_tables, log_emission, truncated_poisson_pmf
from .fitting import FitResult, fit_cohort, information_criteria, prepare_cohort
from .forward import (
    FilterResult,
    ForwardState,
    brute_force_loglik,
    filter_sequence,
    forward_init,
    forward_step,
    sequence_loglik,
)
from .likelihood import CohortData, cohort_loglik, pack_cohort
from .mcmc import Diagnostics, McmcConfig, PosteriorDraws, log_posterior, run_mcmc, sample_prior_params
from .model import (
    ModelConfig,
    ModelError,
    ParameterSet,
    PriorSpec,
    log_prior,
    model_from_json,
    model_to_json,
)
from .records import REGIMENS, PatientRecord, phase_names
from .simulate import CohortSpec, empirical_dependence, simulate_cohort
from .transforms import (
    from_unconstrained,
    log_jacobian,
    parameter_names,
    qr_reparametrize,
    to_unconstrained,
    unconstrained_dim,
)

__version__ = "0.1.0"
