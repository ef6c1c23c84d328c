import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdchmm import ModelConfig, ModelError
from vdchmm.transitions import TransitionContext, transition_row, transition_tensor

from conftest import random_model
from oracles import multinomial_logit_row


def _params(rng, num_states=3, p=0, use_duration=True):
    config, params = random_model(rng, num_states=num_states, num_margins=1,
                                  covariate_dim=p, use_duration=use_duration)
    return config, params


def test_all_zero_coefficients_give_uniform_row(rng):
    config, params = _params(rng, num_states=3)
    zeroed = type(params)(
        initial_dist=params.initial_dist,
        intercepts=np.zeros((3, 3)), duration_coefs=np.zeros((3, 3)),
        covariate_coefs=params.covariate_coefs, emission_rates=params.emission_rates,
        copula_params=params.copula_params,
    )
    for d in (1, 5, 40):
        row = transition_row(zeroed, TransitionContext(0, d))
        np.testing.assert_allclose(row, np.full(3, 1 / 3), atol=1e-15)


def test_two_state_log2_duration_slope():
    config = ModelConfig(num_states=2, num_margins=1, scale_max=(5,),
                         copula_family="independence", use_covariates=False)
    params_cls = None
    from vdchmm import ParameterSet

    omega = np.zeros((2, 2))
    omega[0, 1] = np.log(2.0)
    params = ParameterSet(
        initial_dist=np.array([0.5, 0.5]),
        intercepts=np.zeros((2, 2)),
        duration_coefs=omega,
        covariate_coefs=np.zeros((2, 2, 0)),
        emission_rates=np.array([[1.0], [2.0]]),
    )
    row = transition_row(params, TransitionContext(0, 1))
    np.testing.assert_allclose(row, [1 / 3, 2 / 3], atol=1e-14)


def test_row_stochastic_over_1000_draws():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        config, params = random_model(rng, num_margins=1, scale=1.5)
        x = rng.normal(size=config.covariate_dim)
        d = int(rng.integers(1, config.duration_cap + 1))
        j = int(rng.integers(config.num_states))
        row = transition_row(params, TransitionContext(j, d, x),
                             duration_cap=config.duration_cap)
        assert abs(row.sum() - 1.0) <= 1e-12
        assert np.all(row >= 0)


def test_matches_independent_logit_construction(rng):
    for _ in range(100):
        config, params = random_model(rng, num_margins=1)
        x = rng.normal(size=config.covariate_dim)
        j = int(rng.integers(config.num_states))
        d = int(rng.integers(1, config.duration_cap + 1))
        ours = transition_row(params, TransitionContext(j, d, x))
        reference = multinomial_logit_row(
            params.intercepts[j], params.duration_coefs[j],
            params.covariate_coefs[j], j, d, x,
        )
        np.testing.assert_allclose(ours, reference, atol=1e-14)


def test_zero_duration_coefs_make_rows_duration_free(rng):
    config, params = _params(rng, num_states=3, use_duration=False)
    rows = [transition_row(params, TransitionContext(1, d)) for d in (1, 7, 30)]
    for row in rows[1:]:
        np.testing.assert_array_equal(row, rows[0])


def test_positive_slope_increases_leave_probability_with_duration():
    from vdchmm import ParameterSet

    omega = np.zeros((2, 2))
    omega[0, 1] = 0.3
    params = ParameterSet(
        initial_dist=np.array([0.5, 0.5]),
        intercepts=np.zeros((2, 2)),
        duration_coefs=omega,
        covariate_coefs=np.zeros((2, 2, 0)),
        emission_rates=np.array([[1.0], [2.0]]),
    )
    probs = [transition_row(params, TransitionContext(0, d), duration_cap=50)[1]
             for d in range(1, 20)]
    assert all(b > a for a, b in zip(probs, probs[1:]))
    # finite-difference sign equals the slope sign
    assert probs[1] - probs[0] > 0


def test_duration_saturates_at_cap(rng):
    config, params = _params(rng, num_states=2)
    cap = config.duration_cap
    at_cap = transition_row(params, TransitionContext(0, cap), duration_cap=cap)
    beyond = transition_row(params, TransitionContext(0, cap + 10), duration_cap=cap)
    np.testing.assert_array_equal(at_cap, beyond)


def test_tensor_shape_and_consistency(rng):
    config, params = random_model(rng, num_states=3, num_margins=1, horizon=6)
    x = rng.normal(size=config.covariate_dim)
    tensor = transition_tensor(params, config, x)
    assert tensor.shape == (3, config.duration_cap, 3)
    np.testing.assert_allclose(tensor.sum(axis=2), 1.0, atol=1e-12)
    for j in range(3):
        for d in range(1, config.duration_cap + 1):
            np.testing.assert_array_equal(
                tensor[j, d - 1],
                transition_row(params, TransitionContext(j, d, x),
                               duration_cap=config.duration_cap),
            )


def test_constant_tensor_without_duration_effect(rng):
    config, params = random_model(rng, num_states=2, num_margins=1,
                                  use_duration=False, horizon=5)
    tensor = transition_tensor(params, config)
    for d in range(1, tensor.shape[1]):
        np.testing.assert_array_equal(tensor[:, d], tensor[:, 0])


def test_single_state_tensor_is_one(rng):
    config, params = random_model(rng, num_states=1, num_margins=1, horizon=4)
    tensor = transition_tensor(params, config)
    np.testing.assert_array_equal(tensor, np.ones_like(tensor))


def test_context_validation():
    with pytest.raises(ModelError):
        TransitionContext(0, 0)
    with pytest.raises(ModelError):
        TransitionContext(0, 1, np.array([np.nan]))
