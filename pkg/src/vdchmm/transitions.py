"""Duration- and covariate-dependent transition probabilities.

Rows follow a multinomial logit with the current state as base case:
staying has logit zero, and moving from j to k has logit
delta[j,k] + omega[j,k] * d + x . beta[j,k], where d is the sojourn
already spent in j (saturating at the duration cap) and x the current
covariate row. Positive omega[j,k] makes leaving toward k more likely
the longer the stay; all-zero omega collapses to a stationary chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, ModelError, ParameterSet


@dataclass(frozen=True)
class TransitionContext:
    """One transition's inputs: origin state, sojourn, covariate row."""

    current_state: int
    duration: int
    covariates: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "covariates", np.asarray(self.covariates, dtype=float))
        if self.duration < 1:
            raise ModelError("duration must be >= 1")
        if self.covariates.size and not np.all(np.isfinite(self.covariates)):
            raise ModelError("covariates must be finite")


def transition_logits(params: ParameterSet, j: int, duration: int, x: np.ndarray) -> np.ndarray:
    """Logit row for origin j (the j-th entry, staying, is zero)."""
    eta = params.intercepts[j] + params.duration_coefs[j] * float(duration)
    if x.size:
        eta = eta + params.covariate_coefs[j] @ x
    eta = eta.copy()
    eta[j] = 0.0
    return eta


def transition_row(params: ParameterSet, ctx: TransitionContext,
                   duration_cap: int | None = None) -> np.ndarray:
    """Probability row over destination states; sums to one.

    Durations beyond the cap saturate: the row at d > cap equals the row
    at the cap, which is exact whenever the cap covers the horizon.
    """
    d = ctx.duration if duration_cap is None else min(ctx.duration, duration_cap)
    eta = transition_logits(params, ctx.current_state, d, ctx.covariates)
    eta -= eta.max()
    w = np.exp(eta)
    return w / w.sum()


def transition_tensor(params: ParameterSet, config: ModelConfig,
                      covariates: np.ndarray | None = None) -> np.ndarray:
    """All rows as a tensor indexed [origin, duration - 1, destination]."""
    x = np.empty(0) if covariates is None else np.asarray(covariates, dtype=float)
    s, cap = config.num_states, config.duration_cap
    out = np.empty((s, cap, s))
    for j in range(s):
        for d in range(1, cap + 1):
            out[j, d - 1] = transition_row(
                params, TransitionContext(j, d, x), duration_cap=cap
            )
    return out
