import itertools

import numpy as np
import pytest

from vdchmm import CopulaParam, ModelError, copula_cdf, copula_cdf_multi, joint_pmf

from oracles import corner_sum_pmf, gumbel_survival_cdf, truncated_poisson

GRID = np.linspace(0.0, 1.0, 101)

FAMILY_PARAMS = [
    CopulaParam("independence"),
    CopulaParam("survival_gumbel", 1.0),
    CopulaParam("survival_gumbel", 2.0),
    CopulaParam("survival_gumbel", 4.5),
    CopulaParam("amh", -0.7),
    CopulaParam("amh", 0.5),
    CopulaParam("clayton", 0.8),
    CopulaParam("clayton", 3.0),
]


def test_frozen_point_values():
    assert copula_cdf(CopulaParam("survival_gumbel", 1.0), 0.5, 0.5) == pytest.approx(0.25, abs=1e-12)
    assert copula_cdf(CopulaParam("survival_gumbel", 2.0), 0.5, 0.5) == pytest.approx(
        2.0 ** -np.sqrt(2.0), abs=1e-12
    )
    assert 2.0 ** -np.sqrt(2.0) == pytest.approx(0.375214, abs=5e-7)
    assert copula_cdf(CopulaParam("amh", 0.5), 0.5, 0.5) == pytest.approx(0.25 / 0.875, abs=1e-12)
    for param in FAMILY_PARAMS:
        assert copula_cdf(param, 0.7, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert copula_cdf(param, 0.7, 1.0) == pytest.approx(0.7, abs=1e-12)


@pytest.mark.parametrize("param", FAMILY_PARAMS, ids=lambda p: f"{p.family}-{p.value}")
def test_grid_axioms(param):
    u, v = np.meshgrid(GRID, GRID, indexing="ij")
    grid = copula_cdf(param, u, v)
    # groundedness and uniform margins
    np.testing.assert_allclose(grid[0, :], 0.0, atol=1e-12)
    np.testing.assert_allclose(grid[:, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(grid[-1, :], GRID, atol=1e-12)
    np.testing.assert_allclose(grid[:, -1], GRID, atol=1e-12)
    # 2-increasing over every rectangle: for each ordered column pair the
    # increment row must dominate its own running maximum
    n = len(GRID)
    i1, i2 = np.triu_indices(n, k=1)
    increments = grid[i2, :] - grid[i1, :]
    running_max = np.maximum.accumulate(increments, axis=1)
    violation = increments[:, 1:] - running_max[:, :-1]
    assert violation.min() >= -1e-12


def test_survival_gumbel_at_one_is_product_copula():
    u, v = np.meshgrid(GRID, GRID, indexing="ij")
    grid = copula_cdf(CopulaParam("survival_gumbel", 1.0), u, v)
    np.testing.assert_allclose(grid, u * v, atol=1e-12)


def test_survival_gumbel_lower_tail_ordering():
    u = 0.01
    ratios = [copula_cdf(CopulaParam("survival_gumbel", nu), u, u) / u
              for nu in (1.0, 1.5, 2.0, 4.0)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_bivariate_matches_independent_formula(rng):
    for nu in (1.3, 2.0, 3.7):
        for _ in range(50):
            u, v = rng.random(2)
            ours = copula_cdf(CopulaParam("survival_gumbel", nu), u, v)
            assert ours == pytest.approx(gumbel_survival_cdf(nu, np.array([u, v])), abs=1e-13)


def test_multivariate_agrees_with_bivariate(rng):
    for param in FAMILY_PARAMS:
        pts = rng.random((40, 2))
        multi = copula_cdf_multi(param, pts)
        bi = copula_cdf(param, pts[:, 0], pts[:, 1])
        np.testing.assert_allclose(multi, bi, atol=1e-12)


def test_trivariate_collapses_when_one_margin_is_sure(rng):
    # C(u, v, 1) must equal C(u, v); AMH extension needs a nonnegative parameter
    params = [CopulaParam("survival_gumbel", 2.5), CopulaParam("clayton", 1.5),
              CopulaParam("amh", 0.4), CopulaParam("independence")]
    for param in params:
        pts = rng.random((30, 2))
        with_one = np.column_stack([pts, np.ones(30)])
        np.testing.assert_allclose(
            copula_cdf_multi(param, with_one),
            copula_cdf(param, pts[:, 0], pts[:, 1]),
            atol=1e-10,
        )


def test_domain_violations_raise():
    with pytest.raises(ModelError):
        copula_cdf(CopulaParam("survival_gumbel", 2.0), -0.1, 0.5)
    with pytest.raises(ModelError):
        copula_cdf(CopulaParam("survival_gumbel", 2.0), 0.5, 1.2)
    with pytest.raises(ModelError):
        CopulaParam("survival_gumbel", 0.5)
    with pytest.raises(ModelError):
        CopulaParam("amh", 1.0)
    with pytest.raises(ModelError):
        CopulaParam("clayton", 0.0)


# ---------------------------------------------------------------------------
# joint pmf construction
# ---------------------------------------------------------------------------

def test_joint_pmf_independence_is_exact_product():
    f1 = truncated_poisson(1.3, 5)
    f2 = truncated_poisson(0.7, 3)
    cdfs = [np.cumsum(f1), np.cumsum(f2)]
    pmf = joint_pmf(CopulaParam("independence"), cdfs)
    # exactly the product of the marginals implied by the CDF tables
    g1, g2 = (np.diff(np.concatenate(([0.0], c))) for c in cdfs)
    np.testing.assert_array_equal(pmf, np.outer(g1, g2))
    np.testing.assert_allclose(pmf, np.outer(f1, f2), atol=1e-15)


def test_joint_pmf_bernoulli_hand_computation():
    # both margins put mass 1/2 on {0, 1}; corners come out by hand
    cdf = np.array([0.5, 1.0])
    pmf = joint_pmf(CopulaParam("survival_gumbel", 2.0), [cdf, cdf])
    c = 2.0 ** -np.sqrt(2.0)
    np.testing.assert_allclose(pmf[0, 0], c, atol=1e-9)
    np.testing.assert_allclose(pmf[1, 1], 1.0 - 0.5 - 0.5 + c, atol=1e-9)
    np.testing.assert_allclose(pmf[0, 1], 0.5 - c, atol=1e-9)
    np.testing.assert_allclose(pmf[1, 0], 0.5 - c, atol=1e-9)


@pytest.mark.parametrize("param", FAMILY_PARAMS, ids=lambda p: f"{p.family}-{p.value}")
def test_joint_pmf_full_grid_normalizes_and_keeps_margins(param, rng):
    # the 11 x 8 pain-by-activity grid of the study
    f1 = truncated_poisson(2.4, 10)
    f2 = truncated_poisson(1.1, 7)
    pmf = joint_pmf(param, [np.cumsum(f1), np.cumsum(f2)])
    assert pmf.shape == (11, 8)
    assert np.all(pmf >= 0)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(pmf.sum(axis=1), f1, atol=1e-9)
    np.testing.assert_allclose(pmf.sum(axis=0), f2, atol=1e-9)


def test_joint_pmf_matches_cell_by_cell_corner_sums(rng):
    f1 = truncated_poisson(1.8, 6)
    f2 = truncated_poisson(0.9, 4)
    cdfs = [np.cumsum(f1), np.cumsum(f2)]
    for c in cdfs:
        c[-1] = 1.0
    nu = 2.7
    ours = joint_pmf(CopulaParam("survival_gumbel", nu), cdfs)
    reference = corner_sum_pmf(lambda u: gumbel_survival_cdf(nu, u), cdfs)
    np.testing.assert_allclose(ours, reference, atol=1e-10)


def test_joint_pmf_single_margin_is_cdf_difference():
    f = truncated_poisson(2.0, 6)
    cdf = np.cumsum(f)
    cdf[-1] = 1.0
    out = joint_pmf(CopulaParam("survival_gumbel", 3.0), [cdf])
    np.testing.assert_allclose(out, np.diff(np.concatenate(([0.0], cdf))), atol=0)


def test_joint_pmf_three_margins_normalizes(rng):
    fs = [truncated_poisson(r, l) for r, l in ((1.5, 4), (0.8, 3), (2.2, 5))]
    cdfs = [np.cumsum(f) for f in fs]
    for c in cdfs:
        c[-1] = 1.0
    for param in (CopulaParam("survival_gumbel", 2.0), CopulaParam("clayton", 1.2),
                  CopulaParam("amh", 0.3)):
        pmf = joint_pmf(param, cdfs)
        assert pmf.shape == (5, 4, 6)
        assert np.all(pmf >= 0)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(pmf.sum(axis=(1, 2)), fs[0], atol=1e-8)


def test_joint_pmf_rejects_bad_cdf_tables():
    good = np.cumsum(truncated_poisson(1.0, 4))
    good[-1] = 1.0
    with pytest.raises(ModelError, match="decreasing"):
        joint_pmf(CopulaParam("independence"), [np.array([0.5, 0.4, 1.0]), good])
    with pytest.raises(ModelError, match="end at 1"):
        joint_pmf(CopulaParam("independence"), [np.array([0.2, 0.8]), good])
