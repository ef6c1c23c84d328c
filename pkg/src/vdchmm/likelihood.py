"""Vectorized cohort log-likelihood for the sampler's hot loop.

Sequences are padded to a common length with fully-missing weeks, which
leaves the likelihood unchanged (unit emission, row-stochastic
transitions). The per-patient recursion runs in linear space with
per-step rescaling, which is algebraically identical to the log-space
reference in :mod:`vdchmm.forward` and is verified against it in tests.
A numba kernel is used when available, with a numpy fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emissions import MISSING, build_emission_tables, log_emission
from .model import ModelConfig, ParameterSet

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range

#: transition logit halves are clipped here; the two halves are
#: multiplied, so the combined exponent stays below overflow while the
#: softmax output is unchanged to double precision for any sane logits
_CLIP = 350.0


@dataclass(frozen=True)
class CohortData:
    """Observation and covariate arrays packed for the fast kernel."""

    obs: np.ndarray            # (N, T, m) int, MISSING for absent values
    covariates: np.ndarray     # (N, max(T-1, 1), p) float
    lengths: np.ndarray        # (N,) true sequence lengths
    full_codes: np.ndarray     # (N, T) raveled cell index, or -1 partial, -2 missing
    partial_rows: tuple        # ((i, t), ...) rows needing slow emission lookup
    ids: tuple = ()            # patient identifiers, parallel to the first axis

    @property
    def num_patients(self) -> int:
        return self.obs.shape[0]


def pack_cohort(observations: list[np.ndarray],
                covariates: list[np.ndarray] | None,
                config: ModelConfig,
                ids: tuple | None = None) -> CohortData:
    """Pad per-patient arrays to a rectangle and pre-index observations."""
    n = len(observations)
    if n == 0:
        raise ValueError("cohort must contain at least one patient")
    if ids is None:
        ids = tuple(range(n))
    elif len(ids) != n:
        raise ValueError("ids must match the number of patients")
    m = config.num_margins
    lengths = np.array([np.asarray(o).shape[0] for o in observations], dtype=np.int64)
    t_max = int(lengths.max())
    obs = np.full((n, t_max, m), MISSING, dtype=np.int64)
    for i, o in enumerate(observations):
        o = np.asarray(o)
        if o.ndim == 1:
            o = o[:, None]
        obs[i, :o.shape[0]] = o

    p = config.covariate_dim
    cov = np.zeros((n, max(t_max - 1, 1), p))
    if covariates is not None and p > 0:
        for i, c in enumerate(covariates):
            c = np.asarray(c, dtype=float)
            rows = min(c.shape[0], t_max - 1)
            if rows > 0:
                cov[i, :rows] = c[:rows]

    shape = tuple(l + 1 for l in config.scale_max)
    full_codes = np.full((n, t_max), -2, dtype=np.int64)
    partial = []
    for i in range(n):
        for t in range(t_max):
            row = obs[i, t]
            observed = row != MISSING
            if not observed.any():
                continue
            if observed.all():
                full_codes[i, t] = int(np.ravel_multi_index(tuple(row), shape))
            else:
                full_codes[i, t] = -1
                partial.append((i, t))
    return CohortData(obs=obs, covariates=cov, lengths=lengths,
                      full_codes=full_codes, partial_rows=tuple(partial),
                      ids=tuple(ids))


def emission_log_probs(data: CohortData, params: ParameterSet,
                       config: ModelConfig, tables=None) -> np.ndarray:
    """log b_s(y_it) for every patient-week-state, zeros where missing."""
    if tables is None:
        tables = build_emission_tables(params, config)
    n, t_max = data.full_codes.shape
    s = config.num_states
    out = np.zeros((n, t_max, s))
    full = data.full_codes >= 0
    idx = data.full_codes[full]
    for state in range(s):
        flat = tables[state].log_pmf.ravel()
        out[:, :, state][full] = flat[idx]
    for (i, t) in data.partial_rows:
        for state in range(s):
            out[i, t, state] = log_emission(tables, state, data.obs[i, t])
    return out


def _effective_duration_cap(config: ModelConfig, t_max: int) -> int:
    if not config.use_duration:
        return 1  # rows do not depend on sojourn; a flat lattice is exact
    return min(config.duration_cap, t_max)


def duration_factors(params: ParameterSet, config: ModelConfig, cap: int) -> np.ndarray:
    """exp(delta + omega * d) per (origin, duration, destination), diagonal one.

    Multiplied with :func:`covariate_factors` this gives exp(logit); both
    halves are clipped so the product cannot overflow.
    """
    s = config.num_states
    durations = np.arange(1, cap + 1, dtype=float)
    eta1 = params.intercepts[:, None, :] + params.duration_coefs[:, None, :] * durations[None, :, None]
    e1 = np.exp(np.clip(eta1, -_CLIP, _CLIP))
    e1[np.arange(s), :, np.arange(s)] = 1.0
    return e1


def covariate_factors(params: ParameterSet, config: ModelConfig,
                      data: CohortData) -> np.ndarray:
    """exp(x . beta) per (patient, week, origin, destination), diagonal one."""
    s = config.num_states
    if config.use_covariates and config.covariate_dim > 0:
        z = np.einsum("itp,jlp->itjl", data.covariates, params.covariate_coefs)
        w = np.exp(np.clip(z, -_CLIP, _CLIP))
        w[:, :, np.arange(s), np.arange(s)] = 1.0
    else:
        n, rows = data.covariates.shape[0], data.covariates.shape[1]
        w = np.ones((n, rows, s, s))
    return w


def forward_from_factors(pi: np.ndarray, e1: np.ndarray, w: np.ndarray,
                         b: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Per-patient log-likelihoods from precomputed factor arrays."""
    out = np.empty(b.shape[0])
    if _HAVE_NUMBA:
        _forward_cohort(pi, e1, w, b, lengths, out)
    else:
        _forward_cohort_numpy(pi, e1, w, b, lengths, out)
    return out


def cohort_loglik(params: ParameterSet, config: ModelConfig,
                  data: CohortData, tables=None) -> np.ndarray:
    """Per-patient sequence log-likelihoods for a packed cohort."""
    cap = _effective_duration_cap(config, data.full_codes.shape[1])
    e1 = duration_factors(params, config, cap)
    w = covariate_factors(params, config, data)
    b = np.exp(emission_log_probs(data, params, config, tables))
    return forward_from_factors(params.initial_dist, e1, w, b, data.lengths)


@njit(cache=True)
def _forward_patient(pi, e1, w_i, b_i, length):
    n_states, cap, _ = e1.shape
    alpha = np.zeros((n_states, cap))
    new = np.zeros((n_states, cap))
    c = 0.0
    for s in range(n_states):
        a = pi[s] * b_i[0, s]
        alpha[s, 0] = a
        c += a
    if c <= 0.0:
        return -np.inf
    for s in range(n_states):
        alpha[s, 0] /= c
    ll = np.log(c)
    for t in range(1, length):
        for s in range(n_states):
            for d in range(cap):
                new[s, d] = 0.0
        d_lim = min(t, cap)
        for j in range(n_states):
            for d in range(d_lim):
                a = alpha[j, d]
                if a <= 0.0:
                    continue
                denom = 0.0
                for l in range(n_states):
                    denom += e1[j, d, l] * w_i[t - 1, j, l]
                inv = a / denom
                for k in range(n_states):
                    if k != j:
                        new[k, 0] += inv * e1[j, d, k] * w_i[t - 1, j, k]
                d_next = d + 1 if d + 1 < cap else cap - 1
                new[j, d_next] += inv
        c = 0.0
        for s in range(n_states):
            bv = b_i[t, s]
            for d in range(cap):
                v = new[s, d] * bv
                new[s, d] = v
                c += v
        if c <= 0.0:
            return -np.inf
        for s in range(n_states):
            for d in range(cap):
                alpha[s, d] = new[s, d] / c
        ll += np.log(c)
    return ll


@njit(parallel=True, cache=True)
def _forward_cohort(pi, e1, w, b, lengths, out):
    for i in prange(out.shape[0]):
        out[i] = _forward_patient(pi, e1, w[i], b[i], lengths[i])


def _forward_cohort_numpy(pi, e1, w, b, lengths, out):  # pragma: no cover - numba fallback
    n_states, cap, _ = e1.shape
    for i in range(out.shape[0]):
        alpha = np.zeros((n_states, cap))
        alpha[:, 0] = pi * b[i, 0]
        c = alpha.sum()
        if c <= 0:
            out[i] = -np.inf
            continue
        alpha /= c
        ll = np.log(c)
        dead = False
        for t in range(1, int(lengths[i])):
            rates = e1 * w[i, t - 1][:, None, :]
            denom = rates.sum(axis=2)
            gamma = rates / denom[:, :, None]
            stay = alpha / denom
            moved = np.einsum("jd,jdk->k", alpha, gamma) - stay.sum(axis=1)
            new = np.zeros((n_states, cap))
            new[:, 0] = moved
            new[:, 1:] += stay[:, :-1]
            new[:, cap - 1] += stay[:, cap - 1]
            new *= b[i, t][:, None]
            c = new.sum()
            if c <= 0:
                out[i] = -np.inf
                dead = True
                break
            alpha = new / c
            ll += np.log(c)
        if not dead:
            out[i] = ll
