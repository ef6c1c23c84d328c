"""Duration-augmented forward algorithm: exact likelihood and filtering.

The recursion runs on a (state, sojourn) lattice so the transition out of
each week can depend on how long the current state has been occupied.
All math here is in log space with log-sum-exp; a faster rescaled kernel
for whole cohorts lives in :mod:`vdchmm.likelihood` and is checked
against this reference.

``brute_force_loglik`` enumerates every latent state sequence and exists
purely as a verification oracle for the recursion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .emissions import EmissionTable, build_emission_tables, log_emission
from .model import ModelConfig, ModelError, ParameterSet
from .transitions import TransitionContext, transition_row, transition_tensor


@dataclass(frozen=True)
class ForwardState:
    """Filtered joint posterior over (state, sojourn) after one week.

    ``log_alpha[s, d-1]`` is the normalized log probability of being in
    state s with sojourn d given everything observed so far; cells with
    d greater than the elapsed weeks are -inf. ``log_norm`` accumulates
    the log normalizers, i.e. the running log-likelihood.
    """

    week: int
    log_alpha: np.ndarray
    log_norm: float

    def state_marginals(self) -> np.ndarray:
        """Posterior over states, sojourn marginalized out."""
        with np.errstate(divide="ignore"):
            log_m = logsumexp(self.log_alpha, axis=1)
        return np.exp(log_m - logsumexp(log_m))


@dataclass(frozen=True)
class FilterResult:
    """Per-week filtered marginals, most likely states, and log-likelihood."""

    marginals: np.ndarray      # (weeks, states)
    map_states: np.ndarray     # (weeks,) int, 0-based
    loglik: float


def forward_init(params: ParameterSet, config: ModelConfig,
                 tables: list[EmissionTable], y1) -> ForwardState:
    s, cap = config.num_states, config.duration_cap
    log_alpha = np.full((s, cap), -np.inf)
    with np.errstate(divide="ignore"):
        for state in range(s):
            log_alpha[state, 0] = np.log(params.initial_dist[state]) + log_emission(tables, state, y1)
    c = logsumexp(log_alpha[:, 0])
    if not np.isfinite(c):
        return ForwardState(week=1, log_alpha=log_alpha, log_norm=-np.inf)
    log_alpha[:, 0] -= c
    return ForwardState(week=1, log_alpha=log_alpha, log_norm=float(c))


def forward_step(state: ForwardState, params: ParameterSet, config: ModelConfig,
                 tables: list[EmissionTable], trans: np.ndarray, y_t) -> ForwardState:
    """Advance the lattice one week.

    ``trans`` is the transition tensor for the step out of the previous
    week, i.e. built from that week's covariate row.
    """
    s, cap = config.num_states, config.duration_cap
    with np.errstate(divide="ignore"):
        log_trans = np.log(trans)
    prev = state.log_alpha

    # switching: sojourn resets to 1; the diagonal is masked out
    log_switch = log_trans.copy()
    log_switch[np.arange(s), :, np.arange(s)] = -np.inf
    new = np.full((s, cap), -np.inf)
    with np.errstate(invalid="ignore"):
        new[:, 0] = logsumexp(prev[:, :, None] + log_switch, axis=(0, 1))

        # staying: sojourn advances, saturating at the cap
        stay = prev + log_trans[np.arange(s), :, np.arange(s)]
        new[:, 1:] = stay[:, :-1]
        if cap > 1:
            new[:, cap - 1] = np.logaddexp(new[:, cap - 1], stay[:, cap - 1])
        else:
            new[:, 0] = np.logaddexp(new[:, 0], stay[:, 0])

        for k in range(s):
            new[k, :] += log_emission(tables, k, y_t)
    c = logsumexp(new)
    if not np.isfinite(c):
        return ForwardState(week=state.week + 1, log_alpha=new, log_norm=-np.inf)
    return ForwardState(week=state.week + 1, log_alpha=new - c,
                        log_norm=state.log_norm + float(c))


def _covariate_row(covariates, t: int) -> np.ndarray:
    if covariates is None:
        return np.empty(0)
    return np.asarray(covariates[t], dtype=float)


def filter_sequence(params: ParameterSet, config: ModelConfig,
                    observations: np.ndarray,
                    covariates: np.ndarray | None = None,
                    up_to: int | None = None,
                    tie_break: str = "lowest",
                    tables: list[EmissionTable] | None = None) -> FilterResult:
    """Run the forward pass through week ``up_to`` and collect filtrates.

    Covariate row t feeds the transition out of week t (1-based); results
    for weeks 1..t are identical whatever later horizon is requested.
    ``tie_break`` picks the lowest (most stable) or highest (most severe)
    state index when marginals tie exactly.
    """
    obs = np.asarray(observations)
    if obs.ndim == 1:
        obs = obs[:, None]
    horizon = obs.shape[0] if up_to is None else int(up_to)
    if horizon < 1 or horizon > obs.shape[0]:
        raise ModelError(f"horizon must be in 1..{obs.shape[0]}")
    if tie_break not in ("lowest", "highest"):
        raise ModelError("tie_break must be 'lowest' or 'highest'")
    if tables is None:
        tables = build_emission_tables(params, config)

    marginals = np.empty((horizon, config.num_states))
    fwd = forward_init(params, config, tables, obs[0])
    marginals[0] = fwd.state_marginals()
    for t in range(1, horizon):
        trans = transition_tensor(params, config, _covariate_row(covariates, t - 1))
        fwd = forward_step(fwd, params, config, tables, trans, obs[t])
        marginals[t] = fwd.state_marginals()

    if tie_break == "lowest":
        map_states = np.argmax(marginals, axis=1)
    else:
        map_states = config.num_states - 1 - np.argmax(marginals[:, ::-1], axis=1)
    return FilterResult(marginals=marginals, map_states=map_states,
                        loglik=float(fwd.log_norm))


def sequence_loglik(params: ParameterSet, config: ModelConfig,
                    observations: np.ndarray,
                    covariates: np.ndarray | None = None,
                    tables: list[EmissionTable] | None = None) -> float:
    """Log-likelihood of one observation sequence via the forward pass."""
    obs = np.asarray(observations)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.shape[0] == 0:
        raise ModelError("empty observation sequence")
    if tables is None:
        tables = build_emission_tables(params, config)
    fwd = forward_init(params, config, tables, obs[0])
    for t in range(1, obs.shape[0]):
        if not np.isfinite(fwd.log_norm):
            return -np.inf
        trans = transition_tensor(params, config, _covariate_row(covariates, t - 1))
        fwd = forward_step(fwd, params, config, tables, trans, obs[t])
    return float(fwd.log_norm)


def brute_force_loglik(params: ParameterSet, config: ModelConfig,
                       observations: np.ndarray,
                       covariates: np.ndarray | None = None) -> float:
    """Reference likelihood by summing over all latent state sequences.

    Tracks the sojourn implied by each state-sequence prefix so the
    duration-dependent transitions are evaluated exactly. Written for
    clarity, not speed; refuses instances beyond a million sequences.
    """
    obs = np.asarray(observations)
    if obs.ndim == 1:
        obs = obs[:, None]
    n_weeks = obs.shape[0]
    s, cap = config.num_states, config.duration_cap
    if s ** n_weeks > 1_000_000:
        raise ModelError(f"{s}^{n_weeks} state sequences is too many to enumerate")
    tables = build_emission_tables(params, config)

    log_b = np.array([[log_emission(tables, state, obs[t]) for state in range(s)]
                      for t in range(n_weeks)])
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.initial_dist)
        log_rows = {}
        for t in range(n_weeks - 1):
            x = _covariate_row(covariates, t)
            for j in range(s):
                for d in range(1, min(t + 1, cap) + 1):
                    row = transition_row(params, TransitionContext(j, d, x), duration_cap=cap)
                    log_rows[(t, j, d)] = np.log(row)

    terms = []
    for seq in itertools.product(range(s), repeat=n_weeks):
        ll = log_pi[seq[0]] + log_b[0, seq[0]]
        duration = 1
        for t in range(1, n_weeks):
            ll += log_rows[(t - 1, seq[t - 1], min(duration, cap))][seq[t]]
            ll += log_b[t, seq[t]]
            duration = duration + 1 if seq[t] == seq[t - 1] else 1
        terms.append(ll)
    return float(logsumexp(terms))
