"""Truncated-Poisson margins and their copula-coupled joint emission tables.

Each latent state owns one joint pmf over the full discrete observation
grid (e.g. 11 x 8 for pain x activity). Tables are built once per
parameter set and reused across every patient-week lookup; missing
margins are marginalized exactly rather than imputed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .copulas import CopulaParam, joint_pmf
from .model import ModelConfig, ModelError, ParameterSet

#: Sentinel for a missing value in an integer observation vector.
MISSING = -1


def truncated_poisson_pmf(rate: float, scale_max: int) -> np.ndarray:
    """Poisson pmf renormalized onto {0, .., scale_max}.

    Computed in log space so rates up to the hundreds stay finite.
    """
    if not rate > 0:
        raise ModelError(f"rate must be positive, got {rate!r}")
    if scale_max < 1:
        raise ModelError("scale_max must be >= 1")
    y = np.arange(scale_max + 1)
    log_terms = y * np.log(rate) - rate - gammaln(y + 1)
    log_terms -= logsumexp(log_terms)
    return np.exp(log_terms)


@dataclass(frozen=True)
class EmissionTable:
    """Per-state joint emission pmf with its marginal building blocks."""

    state: int
    pmf: np.ndarray                      # shape (L1+1, .., Lm+1)
    log_pmf: np.ndarray                  # -inf where pmf is exactly 0
    marginal_pmfs: tuple[np.ndarray, ...]
    marginal_cdfs: tuple[np.ndarray, ...]


def build_emission_tables(params: ParameterSet, config: ModelConfig) -> list[EmissionTable]:
    """One joint table per latent state from its rates and copula parameter."""
    tables = []
    for s in range(config.num_states):
        margins = [
            truncated_poisson_pmf(params.emission_rates[s, k], config.scale_max[k])
            for k in range(config.num_margins)
        ]
        cdfs = [np.minimum(np.cumsum(f), 1.0) for f in margins]
        for c in cdfs:
            c[-1] = 1.0
        if config.num_margins == 1:
            pmf = margins[0]
        elif not config.has_copula:
            pmf = margins[0]
            for f in margins[1:]:
                pmf = np.multiply.outer(pmf, f)
        else:
            param = CopulaParam(config.copula_family, float(params.copula_params[s]))
            pmf = joint_pmf(param, cdfs)
        with np.errstate(divide="ignore"):
            log_pmf = np.where(pmf > 0, np.log(np.maximum(pmf, 1e-300)), -np.inf)
        tables.append(
            EmissionTable(
                state=s,
                pmf=pmf,
                log_pmf=log_pmf,
                marginal_pmfs=tuple(margins),
                marginal_cdfs=tuple(cdfs),
            )
        )
    return tables


def log_emission(tables: list[EmissionTable], state: int, observation) -> float:
    """Log emission probability of one (possibly partially missing) week.

    A fully missing observation contributes probability one. With a single
    observed margin the exact model marginal (the truncated Poisson) is
    used; with several observed margins among missing ones, the joint
    table is summed over the missing axes.
    """
    table = tables[state]
    y = np.asarray(observation, dtype=int)
    m = len(table.marginal_pmfs)
    if y.shape != (m,):
        raise ModelError(f"observation must have {m} entries")
    observed = y != MISSING
    for k in range(m):
        if observed[k] and not 0 <= y[k] < table.pmf.shape[k]:
            raise ModelError(
                f"margin {k}: observation {y[k]} outside scale 0..{table.pmf.shape[k] - 1}"
            )
    n_obs = int(observed.sum())
    if n_obs == 0:
        return 0.0
    if n_obs == m:
        return float(table.log_pmf[tuple(y)])
    if n_obs == 1:
        k = int(np.argmax(observed))
        p = table.marginal_pmfs[k][y[k]]
        return float(np.log(p)) if p > 0 else -np.inf
    sub = table.pmf.sum(axis=tuple(int(k) for k in range(m) if not observed[k]))
    p = sub[tuple(y[observed])]
    return float(np.log(p)) if p > 0 else -np.inf
