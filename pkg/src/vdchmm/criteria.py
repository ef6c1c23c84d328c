"""Predictive-density model-selection criteria: lpd, WAIC, LOO.

The pointwise unit is one patient (a whole observation sequence), the
exchangeable unit of the cohort likelihood. All public values are on the
deviance scale (-2 x log predictive density), so smaller is better.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import logsumexp

from .likelihood import CohortData, cohort_loglik
from .mcmc import PosteriorDraws
from .model import ModelConfig, ModelError
from .transforms import from_unconstrained


def pointwise_loglik(draws: PosteriorDraws, data: CohortData,
                     config: ModelConfig) -> np.ndarray:
    """Per-draw, per-patient sequence log-likelihoods, shape (draws, patients)."""
    if draws.num_draws == 0:
        raise ModelError("need at least one draw")
    out = np.empty((draws.num_draws, data.num_patients))
    for d in range(draws.num_draws):
        params = from_unconstrained(draws.draws[d], config)
        out[d] = cohort_loglik(params, config, data)
    return out


def _lpd_raw(pointwise: np.ndarray) -> float:
    n_draws = pointwise.shape[0]
    return float(np.sum(logsumexp(pointwise, axis=0) - np.log(n_draws)))


def compute_lpd(pointwise: np.ndarray) -> float:
    """Log pointwise predictive density on the deviance scale."""
    pointwise = _check_matrix(pointwise, min_draws=1)
    return -2.0 * _lpd_raw(pointwise)


def compute_waic(pointwise: np.ndarray) -> float:
    """Widely applicable information criterion, deviance scale.

    The effective-parameter penalty is the summed posterior variance of
    the pointwise log-likelihoods.
    """
    pointwise = _check_matrix(pointwise, min_draws=2)
    penalty = float(np.sum(np.var(pointwise, axis=0, ddof=1)))
    return -2.0 * (_lpd_raw(pointwise) - penalty)


def compute_loo(pointwise: np.ndarray, weight_quantile: float = 0.999) -> float:
    """Leave-one-out predictive density via truncated importance sampling.

    Raw importance weights 1/p(y_i | draw) are capped at their
    ``weight_quantile`` quantile per patient. A patient whose largest
    normalized weight still carries more than half the mass is reported
    through a RuntimeWarning: the estimate for that point is unstable.
    """
    pointwise = _check_matrix(pointwise, min_draws=2)
    n_draws, n_points = pointwise.shape
    total = 0.0
    unstable = []
    for i in range(n_points):
        lw = -pointwise[:, i]
        cap = np.quantile(lw, weight_quantile)
        lw = np.minimum(lw, cap)
        norm = logsumexp(lw)
        if np.exp(lw.max() - norm) > 0.5:
            unstable.append(i)
        total += logsumexp(lw + pointwise[:, i]) - norm
    if unstable:
        warnings.warn(
            f"LOO importance weights are dominated by one draw for "
            f"{len(unstable)} patient(s); estimate may be unstable",
            RuntimeWarning,
        )
    return -2.0 * total


def out_of_sample_lpd(draws: PosteriorDraws, heldout: CohortData,
                      config: ModelConfig) -> float:
    """lpd of held-out sequences under the training posterior, deviance scale.

    Refuses evaluation when any held-out patient id also appears in the
    training set recorded on the draws.
    """
    if draws.train_ids:
        overlap = set(draws.train_ids) & set(heldout.ids)
        if overlap:
            raise ModelError(
                f"held-out cohort shares {len(overlap)} patient id(s) with the "
                f"training set, e.g. {sorted(overlap)[:3]}"
            )
    pw = pointwise_loglik(draws, heldout, config)
    return -2.0 * _lpd_raw(pw)


def _check_matrix(pointwise: np.ndarray, min_draws: int) -> np.ndarray:
    pointwise = np.asarray(pointwise, dtype=float)
    if pointwise.ndim != 2:
        raise ModelError("pointwise log-likelihoods must be a (draws, patients) matrix")
    if pointwise.shape[0] < min_draws:
        raise ModelError(f"need at least {min_draws} draw(s)")
    return pointwise
