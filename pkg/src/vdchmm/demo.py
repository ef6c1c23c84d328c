"""A canned three-phase synthetic study regime.

One fixed ground truth used by the example scripts and the verification
suite: duration-dependent transitions (stable phases grow stickier,
acute episodes resolve faster the longer they last), a lower-tail copula
linking pain and activity limitation, and three transition covariates
(treatment, age, BMI). Symptom scales overlap enough that single-week
symptoms are ambiguous about the phase.
"""

from __future__ import annotations

import numpy as np

from .covariates import CovariateSpec
from .model import ModelConfig, ParameterSet
from .simulate import CohortSpec

DEMO_COVARIATES = CovariateSpec(
    include_treatment=True,
    risk_factors=("age", "bmi"),
    include_lagged=False,
)


def demo_config(num_states: int = 3, copula_family: str = "survival_gumbel",
                use_duration: bool = True, use_covariates: bool = True,
                duration_cap: int = 52) -> ModelConfig:
    return ModelConfig(
        num_states=num_states, num_margins=2, scale_max=(10, 7),
        duration_cap=duration_cap, copula_family=copula_family,
        covariate_dim=DEMO_COVARIATES.dim(2) if use_covariates else 0,
        use_duration=use_duration, use_covariates=use_covariates,
    )


def demo_params(config: ModelConfig | None = None) -> ParameterSet:
    config = config or demo_config()
    delta = np.array([
        [0.0, -2.6, -4.2],
        [-1.9, 0.0, -2.4],
        [-3.0, -1.3, 0.0],
    ])
    omega = np.array([
        [0.0, -0.12, -0.15],
        [0.08, 0.0, -0.05],
        [0.10, 0.12, 0.0],
    ])
    beta = np.zeros((3, 3, 3))
    if config.use_covariates:
        # columns: treatment, age (standardized), bmi (standardized)
        beta[0, 1] = (-0.6, 0.25, 0.20)
        beta[0, 2] = (-0.4, 0.15, 0.30)
        beta[1, 0] = (0.7, -0.20, -0.15)
        beta[1, 2] = (-0.5, 0.20, 0.25)
        beta[2, 0] = (0.6, -0.15, -0.20)
        beta[2, 1] = (0.5, -0.10, -0.10)
    params = ParameterSet(
        initial_dist=np.array([0.55, 0.30, 0.15]),
        intercepts=delta,
        duration_coefs=omega if config.use_duration else np.zeros((3, 3)),
        covariate_coefs=beta if config.use_covariates else np.zeros((3, 3, 0)),
        emission_rates=np.array([[0.4, 0.25], [3.0, 2.0], [7.0, 5.0]]),
        copula_params=np.full(3, 2.5) if config.has_copula else None,
    )
    params.validate(config)
    return params


def demo_cohort_spec(num_patients: int, horizon: int = 52,
                     label_flip_prob: float = 0.0,
                     treatment_prob: float = 0.0192,
                     missing_prob: float = 0.0) -> CohortSpec:
    config = demo_config()
    return CohortSpec(
        num_patients=num_patients, horizon=horizon, config=config,
        params=demo_params(config), covariates=DEMO_COVARIATES,
        treatment_prob=treatment_prob, label_flip_prob=label_flip_prob,
        missing_prob=missing_prob,
    )
