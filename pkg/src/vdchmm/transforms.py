"""Bijective maps between constrained parameters and an unconstrained vector.

The sampler walks an unconstrained space; these transforms guarantee that
every point of that space maps to a valid parameter set (simplex initial
distribution, positive rates, ordered first-margin rates, copula
parameters inside their domain). Layout of the vector, in order:

    initial_dist   stick-breaking coordinates      (S - 1)
    intercepts     off-diagonal, row-major          S(S-1)
    duration_coefs off-diagonal, row-major          S(S-1)   [if used]
    covariate_coefs off-diagonal x covariate        S(S-1)p  [if used]
    emission_rates margin 1: log rate + log increments   S
                   margins 2..m: log rates               S(m-1)
    copula_params  one per state, family transform       S    [if coupled]
"""

from __future__ import annotations

import numpy as np

from .model import ModelConfig, ModelError, ParameterSet


def unconstrained_dim(config: ModelConfig) -> int:
    s, m, p = config.num_states, config.num_margins, config.covariate_dim
    n = (s - 1) + s * (s - 1) + s * m
    if config.use_duration:
        n += s * (s - 1)
    if config.use_covariates and p > 0:
        n += s * (s - 1) * p
    if config.has_copula:
        n += s
    return n


def parameter_names(config: ModelConfig) -> list[str]:
    """Column names for the unconstrained vector, used by draw files."""
    s, m, p = config.num_states, config.num_margins, config.covariate_dim
    names = [f"pi_stick[{k}]" for k in range(1, s)]
    offdiag = [(j, l) for j in range(s) for l in range(s) if l != j]
    names += [f"delta[{j + 1},{l + 1}]" for j, l in offdiag]
    if config.use_duration:
        names += [f"omega[{j + 1},{l + 1}]" for j, l in offdiag]
    if config.use_covariates and p > 0:
        names += [f"beta[{j + 1},{l + 1},{c + 1}]" for j, l in offdiag for c in range(p)]
    names += [f"log_rate_inc[{k + 1},1]" for k in range(s)]
    for margin in range(2, m + 1):
        names += [f"log_rate[{k + 1},{margin}]" for k in range(s)]
    if config.has_copula:
        names += [f"copula_u[{k + 1}]" for k in range(s)]
    assert len(names) == unconstrained_dim(config)
    return names


def to_unconstrained(params: ParameterSet, config: ModelConfig) -> np.ndarray:
    """Map a valid parameter set to its unconstrained coordinates.

    Boundary parameter values (e.g. a survival-Gumbel parameter exactly 1)
    map to infinite coordinates rather than raising.
    """
    params.validate(config)
    s = config.num_states
    off = ~np.eye(s, dtype=bool)
    parts = [_simplex_to_stick(params.initial_dist), params.intercepts[off]]
    if config.use_duration:
        parts.append(params.duration_coefs[off])
    if config.use_covariates and config.covariate_dim > 0:
        parts.append(params.covariate_coefs[off].ravel())
    rates = params.emission_rates
    with np.errstate(divide="ignore"):
        first = np.concatenate(([np.log(rates[0, 0])], np.log(np.diff(rates[:, 0]))))
        parts.append(first)
        if config.num_margins > 1:
            parts.append(np.log(rates[:, 1:]).ravel(order="F"))
        if config.has_copula:
            v = params.copula_params
            if config.copula_family == "survival_gumbel":
                parts.append(np.log(v - 1.0))
            elif config.copula_family == "clayton":
                parts.append(np.log(v))
            else:  # amh: scaled logit of [-1, 1)
                w = (v + 1.0) / 2.0
                parts.append(np.log(w) - np.log1p(-w))
    return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


def from_unconstrained(v: np.ndarray, config: ModelConfig) -> ParameterSet:
    """Inverse of :func:`to_unconstrained`; always yields a valid set."""
    v = np.asarray(v, dtype=float)
    if v.shape != (unconstrained_dim(config),):
        raise ModelError(
            f"expected unconstrained vector of length {unconstrained_dim(config)}, got {v.shape}"
        )
    s, m, p = config.num_states, config.num_margins, config.covariate_dim
    off = ~np.eye(s, dtype=bool)
    pos = 0

    pi = _stick_to_simplex(v[pos:pos + s - 1], s)
    pos += s - 1

    delta = np.zeros((s, s))
    delta[off] = v[pos:pos + s * (s - 1)]
    pos += s * (s - 1)

    omega = np.zeros((s, s))
    if config.use_duration:
        omega[off] = v[pos:pos + s * (s - 1)]
        pos += s * (s - 1)

    beta = np.zeros((s, s, p))
    if config.use_covariates and p > 0:
        beta[off] = v[pos:pos + s * (s - 1) * p].reshape(s * (s - 1), p)
        pos += s * (s - 1) * p

    rates = np.empty((s, m))
    rates[:, 0] = np.cumsum(np.exp(v[pos:pos + s]))
    pos += s
    if m > 1:
        rates[:, 1:] = np.exp(v[pos:pos + s * (m - 1)]).reshape(s, m - 1, order="F")
        pos += s * (m - 1)

    copula = None
    if config.has_copula:
        u = v[pos:pos + s]
        pos += s
        if config.copula_family == "survival_gumbel":
            copula = 1.0 + np.exp(u)
        elif config.copula_family == "clayton":
            copula = np.exp(u)
        else:
            copula = 2.0 / (1.0 + np.exp(-u)) - 1.0

    return ParameterSet(
        initial_dist=pi,
        intercepts=delta,
        duration_coefs=omega,
        covariate_coefs=beta,
        emission_rates=rates,
        copula_params=copula,
    )


def log_jacobian(v: np.ndarray, config: ModelConfig) -> float:
    """Log |d(constrained)/d(unconstrained)| at the unconstrained point v.

    Added to the constrained-scale log prior so the posterior is correct
    over the unconstrained space the sampler actually explores.
    """
    v = np.asarray(v, dtype=float)
    s, m, p = config.num_states, config.num_margins, config.covariate_dim
    pos = 0
    total = 0.0

    # stick-breaking: sum over log z + log(1-z) + log(remaining mass)
    stick = v[pos:pos + s - 1]
    pos += s - 1
    remaining = 1.0
    with np.errstate(divide="ignore"):
        for k, y in enumerate(stick):
            z = _sigmoid(y - np.log(s - 1 - k))
            total += _log_sigmoid_pair(y - np.log(s - 1 - k)) + np.log(remaining)
            remaining *= 1.0 - z

    pos += s * (s - 1)  # intercepts: identity
    if config.use_duration:
        pos += s * (s - 1)
    if config.use_covariates and p > 0:
        pos += s * (s - 1) * p

    # exp-based coordinates contribute their own value
    n_exp = s * m
    total += float(np.sum(v[pos:pos + n_exp]))
    pos += n_exp

    if config.has_copula:
        u = v[pos:pos + s]
        if config.copula_family in ("survival_gumbel", "clayton"):
            total += float(np.sum(u))
        else:  # amh: dv'/du = 2 sigmoid(u)(1 - sigmoid(u))
            total += float(np.sum(np.log(2.0) + _log_sigmoid_pair(u)))
    return total


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def _log_sigmoid_pair(x):
    """log sigmoid(x) + log(1 - sigmoid(x)), stable for large |x|."""
    x = np.asarray(x, dtype=float)
    return -np.logaddexp(0.0, -x) - np.logaddexp(0.0, x)


def _simplex_to_stick(pi: np.ndarray) -> np.ndarray:
    """Stan-style stick-breaking coordinates; zero vector <-> uniform."""
    s = pi.shape[0]
    if s == 1:
        return np.empty(0)
    out = np.empty(s - 1)
    remaining = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(s - 1):
            z = pi[k] / remaining if remaining > 0 else 0.0
            out[k] = np.log(z) - np.log1p(-z) + np.log(s - 1 - k)
            remaining -= pi[k]
    return out


def _stick_to_simplex(y: np.ndarray, s: int) -> np.ndarray:
    if s == 1:
        return np.ones(1)
    pi = np.empty(s)
    remaining = 1.0
    for k in range(s - 1):
        z = _sigmoid(y[k] - np.log(s - 1 - k))
        pi[k] = z * remaining
        remaining -= pi[k]
    pi[s - 1] = remaining
    # guard against negative zero from cancellation
    np.clip(pi, 0.0, 1.0, out=pi)
    return pi


def qr_reparametrize(covariates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of a centered covariate matrix for numerically stable fits.

    Columns must be centered beforehand. Returns (Q, R) with orthonormal
    columns in Q; coefficients fitted against Q are mapped back to the
    original scale via ``solve(R, coef)``, leaving the linear predictor
    unchanged.

    Raises ModelError on a rank-deficient matrix, naming the offending
    column (a constant covariate centers to an all-zero column).
    """
    x = np.asarray(covariates, dtype=float)
    if x.ndim != 2:
        raise ModelError("covariate matrix must be 2-dimensional")
    n, p = x.shape
    if n < p:
        raise ModelError(f"need at least {p} rows to identify {p} covariates")
    col_norms = np.linalg.norm(x, axis=0)
    scale = max(np.max(col_norms), 1.0)
    q, r = np.linalg.qr(x, mode="reduced")
    diag = np.abs(np.diagonal(r))
    bad = np.where(diag <= 1e-10 * scale)[0]
    if bad.size:
        raise ModelError(
            f"covariate matrix is rank-deficient: column {int(bad[0])} is collinear "
            "with the preceding columns (or constant after centering)"
        )
    return q, r


def back_transform_coefs(coefs_q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Map coefficients fitted on the QR design back to the original scale.

    The last axis of ``coefs_q`` indexes covariates.
    """
    coefs_q = np.asarray(coefs_q, dtype=float)
    flat = coefs_q.reshape(-1, coefs_q.shape[-1])
    out = np.linalg.solve(r, flat.T).T
    return out.reshape(coefs_q.shape)
