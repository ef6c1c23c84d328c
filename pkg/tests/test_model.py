import math

import numpy as np
import pytest

from vdchmm import (
    ModelConfig,
    ModelError,
    ParameterSet,
    PriorSpec,
    log_prior,
    model_from_json,
    model_to_json,
)

from conftest import random_model


def simple_params(num_states=2, p=0):
    off = ~np.eye(num_states, dtype=bool)
    delta = np.zeros((num_states, num_states))
    return ParameterSet(
        initial_dist=np.full(num_states, 1.0 / num_states),
        intercepts=delta,
        duration_coefs=np.zeros((num_states, num_states)),
        covariate_coefs=np.zeros((num_states, num_states, p)),
        emission_rates=np.arange(1.0, num_states + 1.0)[:, None] * np.ones((num_states, 2)),
        copula_params=np.full(num_states, 2.0),
    )


def test_config_validation():
    with pytest.raises(ModelError):
        ModelConfig(num_states=0, num_margins=2, scale_max=(10, 7))
    with pytest.raises(ModelError):
        ModelConfig(num_states=2, num_margins=2, scale_max=(10,))
    with pytest.raises(ModelError):
        ModelConfig(num_states=2, num_margins=2, scale_max=(10, 0))
    with pytest.raises(ModelError):
        ModelConfig(num_states=2, num_margins=2, scale_max=(10, 7), copula_family="frank")


def test_variants_map_to_switch_combinations():
    base = ModelConfig(num_states=3, num_margins=2, scale_max=(10, 7))
    expected = {
        "hmm": (False, False),
        "hmmx": (False, True),
        "vd-hmm": (True, False),
        "vdc-hmmx": (True, True),
    }
    for name, (dur, cov) in expected.items():
        restricted = base.with_variant(name)
        assert (restricted.use_duration, restricted.use_covariates) == (dur, cov)


def test_parameterset_invariants_enforced():
    config = ModelConfig(num_states=2, num_margins=2, scale_max=(10, 7),
                         covariate_dim=0, use_covariates=False)
    params = simple_params()
    params.validate(config)

    bad = ParameterSet(
        initial_dist=np.array([0.7, 0.4]),
        intercepts=params.intercepts,
        duration_coefs=params.duration_coefs,
        covariate_coefs=params.covariate_coefs,
        emission_rates=params.emission_rates,
        copula_params=params.copula_params,
    )
    with pytest.raises(ModelError, match="probability"):
        bad.validate(config)

    unordered = ParameterSet(
        initial_dist=params.initial_dist,
        intercepts=params.intercepts,
        duration_coefs=params.duration_coefs,
        covariate_coefs=params.covariate_coefs,
        emission_rates=np.array([[2.0, 1.0], [1.0, 1.0]]),
        copula_params=params.copula_params,
    )
    with pytest.raises(ModelError, match="increasing"):
        unordered.validate(config)

    nonzero_diag = ParameterSet(
        initial_dist=params.initial_dist,
        intercepts=np.array([[0.5, 0.0], [0.0, 0.0]]),
        duration_coefs=params.duration_coefs,
        covariate_coefs=params.covariate_coefs,
        emission_rates=params.emission_rates,
        copula_params=params.copula_params,
    )
    with pytest.raises(ModelError, match="diagonal"):
        nonzero_diag.validate(config)


def test_log_prior_component_values():
    # one free intercept at zero contributes the normal(0, 10) density there
    config = ModelConfig(num_states=2, num_margins=1, scale_max=(10,),
                         copula_family="independence", use_duration=False,
                         use_covariates=False)
    params = ParameterSet(
        initial_dist=np.array([0.5, 0.5]),
        intercepts=np.zeros((2, 2)),
        duration_coefs=np.zeros((2, 2)),
        covariate_coefs=np.zeros((2, 2, 0)),
        emission_rates=np.array([[1.0], [2.0]]),
    )
    base = log_prior(params, config, PriorSpec())
    with_duration = log_prior(params,
                              ModelConfig(num_states=2, num_margins=1, scale_max=(10,),
                                          copula_family="independence", use_duration=True,
                                          use_covariates=False),
                              PriorSpec())
    # adding the two omega = 0 coordinates adds two standard-normal log densities
    assert with_duration - base == pytest.approx(2 * -0.5 * math.log(2 * math.pi), abs=1e-12)

    delta_at_zero = -math.log(10.0 * math.sqrt(2 * math.pi))
    assert delta_at_zero == pytest.approx(-3.2215, abs=5e-5)
    shifted = ParameterSet(
        initial_dist=params.initial_dist,
        intercepts=np.array([[0.0, 3.0], [0.0, 0.0]]),
        duration_coefs=params.duration_coefs,
        covariate_coefs=params.covariate_coefs,
        emission_rates=params.emission_rates,
    )
    # moving one intercept from 0 to 3 changes the prior by the density ratio
    assert log_prior(shifted, config, PriorSpec()) - base == pytest.approx(-0.5 * (3.0 / 10.0) ** 2)


def test_log_prior_dirichlet_uniform_is_log_gamma():
    config = ModelConfig(num_states=3, num_margins=1, scale_max=(10,),
                         copula_family="independence", use_duration=False,
                         use_covariates=False)
    params = ParameterSet(
        initial_dist=np.array([1 / 3, 1 / 3, 1 / 3]),
        intercepts=np.zeros((3, 3)),
        duration_coefs=np.zeros((3, 3)),
        covariate_coefs=np.zeros((3, 3, 0)),
        emission_rates=np.array([[1.0], [2.0], [3.0]]),
    )
    skewed = ParameterSet(
        initial_dist=np.array([0.6, 0.3, 0.1]),
        intercepts=params.intercepts,
        duration_coefs=params.duration_coefs,
        covariate_coefs=params.covariate_coefs,
        emission_rates=params.emission_rates,
    )
    # flat Dirichlet: same density log Gamma(3) = log 2 anywhere on the simplex
    assert log_prior(params, config, PriorSpec()) == pytest.approx(
        log_prior(skewed, config, PriorSpec()), abs=1e-12
    )
    rest = log_prior(params, config, PriorSpec())
    no_pi = ParameterSet(
        initial_dist=np.array([1.0]),
        intercepts=np.zeros((1, 1)),
        duration_coefs=np.zeros((1, 1)),
        covariate_coefs=np.zeros((1, 1, 0)),
        emission_rates=np.array([[1.0]]),
    )
    one_state = ModelConfig(num_states=1, num_margins=1, scale_max=(10,),
                            copula_family="independence", use_duration=False,
                            use_covariates=False)
    per_rate = log_prior(no_pi, one_state, PriorSpec())
    # 3-state prior = log Gamma(3) + six zero intercepts + three rate densities
    expected = math.log(2.0) + 6 * -math.log(10.0 * math.sqrt(2 * math.pi))
    for rate in (1.0, 2.0, 3.0):
        expected += math.log(2.0) - math.log(5.0) - 0.5 * math.log(2 * math.pi) - rate ** 2 / 50.0
    assert rest == pytest.approx(expected, abs=1e-12)
    assert per_rate == pytest.approx(
        math.log(2.0) - math.log(5.0) - 0.5 * math.log(2 * math.pi) - 1.0 / 50.0, abs=1e-12
    )


def test_log_prior_finite_on_valid_sets(rng):
    for _ in range(50):
        config, params = random_model(rng)
        assert np.isfinite(log_prior(params, config, PriorSpec()))


def test_json_round_trip(rng):
    for _ in range(10):
        config, params = random_model(rng)
        text = model_to_json(config, params)
        config2, params2 = model_from_json(text)
        assert config2 == config
        np.testing.assert_allclose(params2.initial_dist, params.initial_dist, rtol=0, atol=0)
        np.testing.assert_allclose(params2.emission_rates, params.emission_rates, rtol=0, atol=0)
        np.testing.assert_allclose(params2.intercepts, params.intercepts, rtol=0, atol=0)
