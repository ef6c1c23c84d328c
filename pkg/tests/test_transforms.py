import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdchmm import (
    ModelConfig,
    ModelError,
    ParameterSet,
    PriorSpec,
    from_unconstrained,
    log_jacobian,
    log_prior,
    to_unconstrained,
    unconstrained_dim,
)
from vdchmm.transforms import back_transform_coefs, parameter_names, qr_reparametrize

from conftest import random_model
from oracles import numerical_log_jacobian


def test_single_state_single_margin_zero_vector():
    config = ModelConfig(num_states=1, num_margins=1, scale_max=(10,),
                         copula_family="independence", covariate_dim=0,
                         use_duration=False, use_covariates=False)
    assert unconstrained_dim(config) == 1
    params = from_unconstrained(np.zeros(1), config)
    assert params.emission_rates[0, 0] == pytest.approx(1.0)
    assert params.initial_dist[0] == 1.0
    np.testing.assert_allclose(to_unconstrained(params, config), [0.0], atol=1e-15)


def test_gumbel_boundary_maps_to_minus_infinity():
    config = ModelConfig(num_states=1, num_margins=2, scale_max=(10, 7),
                         copula_family="survival_gumbel", covariate_dim=0,
                         use_duration=False, use_covariates=False)
    params = ParameterSet(
        initial_dist=np.array([1.0]),
        intercepts=np.zeros((1, 1)),
        duration_coefs=np.zeros((1, 1)),
        covariate_coefs=np.zeros((1, 1, 0)),
        emission_rates=np.array([[1.0, 1.0]]),
        copula_params=np.array([1.0]),
    )
    v = to_unconstrained(params, config)
    assert v[-1] == -np.inf


def test_round_trip_1000_random_parameter_sets():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        config, params = random_model(rng, scale=1.2)
        v = to_unconstrained(params, config)
        back = from_unconstrained(v, config)
        for a, b in [(params.initial_dist, back.initial_dist),
                     (params.intercepts, back.intercepts),
                     (params.duration_coefs, back.duration_coefs),
                     (params.covariate_coefs, back.covariate_coefs),
                     (params.emission_rates, back.emission_rates)]:
            np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)
        if params.copula_params is not None:
            np.testing.assert_allclose(params.copula_params, back.copula_params,
                                       atol=1e-12, rtol=0)


def test_from_unconstrained_always_valid(rng):
    for _ in range(300):
        config, _ = random_model(rng)
        v = rng.normal(0, 5, size=unconstrained_dim(config))
        params = from_unconstrained(v, config)
        params.validate(config)
        assert np.all(params.emission_rates > 0)
        assert np.all(np.diff(params.emission_rates[:, 0]) > 0)


def test_log_prior_finite_on_bounded_unconstrained_inputs(rng):
    priors = PriorSpec()
    for _ in range(200):
        config, _ = random_model(rng)
        v = rng.uniform(-20, 20, size=unconstrained_dim(config))
        params = from_unconstrained(v, config)
        total = log_prior(params, config, priors) + log_jacobian(v, config)
        assert np.isfinite(total)


def test_dimension_mismatch_rejected():
    config = ModelConfig(num_states=2, num_margins=2, scale_max=(10, 7))
    with pytest.raises(ModelError, match="length"):
        from_unconstrained(np.zeros(unconstrained_dim(config) + 1), config)


def test_invalid_parameters_rejected_by_to_unconstrained():
    config = ModelConfig(num_states=2, num_margins=1, scale_max=(10,),
                         copula_family="independence", use_duration=False,
                         use_covariates=False)
    bad = ParameterSet(
        initial_dist=np.array([0.5, 0.5]),
        intercepts=np.zeros((2, 2)),
        duration_coefs=np.zeros((2, 2)),
        covariate_coefs=np.zeros((2, 2, 0)),
        emission_rates=np.array([[2.0], [1.0]]),  # unordered first margin
    )
    with pytest.raises(ModelError):
        to_unconstrained(bad, config)


def test_parameter_names_align_with_dimension(rng):
    for _ in range(20):
        config, _ = random_model(rng)
        assert len(parameter_names(config)) == unconstrained_dim(config)


def test_log_jacobian_matches_numerical_determinant(rng):
    # flatten only the free coordinates so the jacobian is square
    for _ in range(10):
        config, _ = random_model(rng, scale=0.5)
        dim = unconstrained_dim(config)
        v = rng.normal(0, 0.5, size=dim)

        def flat_constrained(vec):
            p = from_unconstrained(vec, config)
            s = config.num_states
            off = ~np.eye(s, dtype=bool)
            parts = [p.initial_dist[:-1], p.intercepts[off]]
            if config.use_duration:
                parts.append(p.duration_coefs[off])
            if config.use_covariates and config.covariate_dim > 0:
                parts.append(p.covariate_coefs[off].ravel())
            parts.append(p.emission_rates.ravel(order="F"))
            if p.copula_params is not None:
                parts.append(p.copula_params)
            return np.concatenate([np.atleast_1d(x) for x in parts])

        expected = numerical_log_jacobian(flat_constrained, v)
        assert log_jacobian(v, config) == pytest.approx(expected, abs=1e-4)


# ---------------------------------------------------------------------------
# QR reparametrization
# ---------------------------------------------------------------------------

def test_qr_identity_for_orthonormal_column():
    x = np.zeros((4, 1))
    x[:2, 0], x[2:, 0] = 0.5, -0.5
    q, r = qr_reparametrize(x)
    np.testing.assert_allclose(np.abs(q), np.abs(x), atol=1e-12)
    assert abs(abs(r[0, 0]) - 1.0) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_qr_linear_predictor_invariance(seed):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(6, 40), rng.integers(1, 5)
    x = rng.normal(size=(n, p))
    x -= x.mean(axis=0)
    q, r = qr_reparametrize(x)
    coef_q = rng.normal(size=p)
    coef_orig = back_transform_coefs(coef_q, r)
    np.testing.assert_allclose(q @ coef_q, x @ coef_orig, atol=1e-10)


def test_qr_rank_deficiency_names_column():
    x = np.column_stack([np.ones(10), np.arange(10.0)])
    x -= x.mean(axis=0)  # constant column becomes zero
    with pytest.raises(ModelError, match="column 0"):
        qr_reparametrize(x)
