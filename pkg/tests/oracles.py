"""Independent reference implementations used to verify the library.

Everything here is written from the definitions using only numpy/scipy,
deliberately avoiding the library's own code paths, so agreement is
meaningful.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, poisson


def truncated_poisson(rate: float, scale_max: int) -> np.ndarray:
    """Marginal pmf by direct summation of Poisson terms."""
    terms = np.array([poisson.pmf(y, rate) for y in range(scale_max + 1)])
    return terms / terms.sum()


def corner_sum_pmf(cdf_value_fn, marginal_cdfs: list[np.ndarray]) -> np.ndarray:
    """Joint pmf by the explicit alternating corner sum, cell by cell.

    ``cdf_value_fn(u_vector)`` evaluates the joint CDF of the copula at
    one point; marginal CDFs use the convention F(-1) = 0.
    """
    shape = tuple(len(f) for f in marginal_cdfs)
    out = np.zeros(shape)
    m = len(marginal_cdfs)
    for cell in np.ndindex(shape):
        total = 0.0
        for corner in np.ndindex(*(2,) * m):
            u = []
            for k in range(m):
                idx = cell[k] - corner[k]
                u.append(0.0 if idx < 0 else marginal_cdfs[k][idx])
            total += (-1.0) ** sum(corner) * cdf_value_fn(np.array(u))
        out[cell] = total
    return out


def gumbel_survival_cdf(nu: float, u: np.ndarray) -> float:
    """Bivariate survival Gumbel CDF straight from its closed form."""
    a, b = u
    if a == 0.0 or b == 0.0:
        return 0.0
    if a == 1.0:
        return b
    if b == 1.0:
        return a
    inner = (-np.log(1 - a)) ** nu + (-np.log(1 - b)) ** nu
    return a + b - 1 + np.exp(-inner ** (1.0 / nu))


def stationary_hmm_loglik(pi: np.ndarray, transition: np.ndarray,
                          emission_probs: np.ndarray) -> float:
    """Textbook scaled forward pass for a stationary HMM.

    ``emission_probs[t, s]`` is the probability of the week-t observation
    under state s.
    """
    alpha = pi * emission_probs[0]
    c = alpha.sum()
    ll = np.log(c)
    alpha = alpha / c
    for t in range(1, emission_probs.shape[0]):
        alpha = (alpha @ transition) * emission_probs[t]
        c = alpha.sum()
        ll += np.log(c)
        alpha = alpha / c
    return float(ll)


def multinomial_logit_row(delta_row, omega_row, beta_rows, j, d, x) -> np.ndarray:
    """Transition row from raw coefficients, written independently."""
    n = len(delta_row)
    eta = np.array([
        0.0 if l == j else delta_row[l] + omega_row[l] * d + float(np.dot(x, beta_rows[l]))
        for l in range(n)
    ])
    w = np.exp(eta - eta.max())
    return w / w.sum()


def recursive_seq_likelihood(pi, emission_probs, row_fn, duration_cap) -> float:
    """Likelihood by a depth-first recursion over state sequences.

    ``row_fn(t, j, d)`` returns the transition row out of week t (0-based)
    from state j at sojourn d. Linear-space recursion, so only suitable
    for short sequences; serves as a dynamic-programming-free check.
    """
    n_weeks, n_states = emission_probs.shape

    def walk(t, state, duration, prob):
        p = prob * emission_probs[t, state]
        if t == n_weeks - 1:
            return p
        row = row_fn(t, state, min(duration, duration_cap))
        total = 0.0
        for nxt in range(n_states):
            d_next = duration + 1 if nxt == state else 1
            total += walk(t + 1, nxt, d_next, p * row[nxt])
        return total

    total = sum(walk(0, s, 1, pi[s]) for s in range(n_states))
    return float(np.log(total))


def numerical_log_jacobian(fn, v: np.ndarray, eps: float = 1e-6) -> float:
    """log |det d fn / d v| by central finite differences.

    ``fn`` maps the unconstrained vector to a flat constrained vector of
    the same length (free coordinates only).
    """
    n = v.size
    jac = np.empty((n, n))
    for i in range(n):
        lo, hi = v.copy(), v.copy()
        lo[i] -= eps
        hi[i] += eps
        jac[:, i] = (fn(hi) - fn(lo)) / (2 * eps)
    sign, logdet = np.linalg.slogdet(jac)
    assert sign > 0, "jacobian must have positive determinant"
    return float(logdet)


def grid_posterior_mean_rate(observations, scale_max: int, prior_sd: float,
                             grid_max: float = 60.0, grid_size: int = 120_000) -> float:
    """Posterior mean of a single truncated-Poisson rate by quadrature.

    One state, one margin: likelihood is a product of truncated Poisson
    pmfs, prior a half-normal. Everything from scipy directly.
    """
    rates = np.linspace(1e-6, grid_max, grid_size)
    log_post = norm.logpdf(rates, scale=prior_sd) + np.log(2.0)
    for y in observations:
        log_pmf = poisson.logpmf(y, rates) - np.log(poisson.cdf(scale_max, rates))
        log_post += log_pmf
    log_post -= log_post.max()
    w = np.exp(log_post)
    return float(np.trapezoid(w * rates, rates) / np.trapezoid(w, rates))


def halfnormal_quantile(q: float, sd: float) -> float:
    """Quantile of |N(0, sd)|."""
    return float(sd * norm.ppf(0.5 + q / 2.0))
