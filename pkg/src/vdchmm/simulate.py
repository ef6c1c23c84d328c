"""Synthetic cohort generation from a known ground-truth model.

Each patient is an independent draw: a risk profile from the published
cohort summary statistics, a latent phase/sojourn path from the
transition model, weekly observations by inverse-CDF sampling of the
state's joint emission table, and the true phase recorded as the regimen
label (optionally corrupted by a flip rate to mimic annotation noise).
Patient i uses substream i of the master seed, so cohorts are
reproducible regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau

from .covariates import RISK_FACTORS, CategoricalFactor, ContinuousFactor, CovariateSpec, encode_profile
from .emissions import MISSING, build_emission_tables
from .model import ModelConfig, ModelError, ParameterSet
from .records import PatientRecord, phase_names
from .transitions import TransitionContext, transition_row


@dataclass(frozen=True)
class CohortSpec:
    """Everything needed to generate one synthetic cohort."""

    num_patients: int
    config: ModelConfig
    params: ParameterSet
    horizon: int = 52
    covariates: CovariateSpec = field(default_factory=CovariateSpec)
    treatment_prob: float = 0.0192
    missing_prob: float = 0.0
    label_flip_prob: float = 0.0

    def __post_init__(self):
        if self.num_patients < 1 or self.horizon < 1:
            raise ModelError("need at least one patient and one week")
        for name, p in (("treatment_prob", self.treatment_prob),
                        ("missing_prob", self.missing_prob),
                        ("label_flip_prob", self.label_flip_prob)):
            if not 0.0 <= p <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1]")
        self.params.validate(self.config)
        expected = self.covariates.dim(self.config.num_margins)
        if self.config.use_covariates and self.config.covariate_dim != expected:
            raise ModelError(
                f"config.covariate_dim is {self.config.covariate_dim} but the covariate "
                f"spec produces {expected} columns"
            )


def draw_profile(rng: np.random.Generator) -> dict:
    """One risk profile from the published summary distributions."""
    profile: dict = {}
    for name, factor in RISK_FACTORS.items():
        if isinstance(factor, ContinuousFactor):
            while True:
                value = rng.normal(factor.mean, factor.sd)
                if factor.low <= value <= factor.high:
                    break
            profile[name] = round(float(value), 2)
        else:
            u = rng.random()
            cum = np.cumsum(factor.frequencies)
            cum[-1] = 1.0
            profile[name] = factor.levels[int(np.searchsorted(cum, u))]
    return profile


def _sample_index(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="right").clip(0, len(cdf) - 1))


def simulate_patient(spec: CohortSpec, patient_id: int, seed: int) -> PatientRecord:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(patient_id,)))
    config, params = spec.config, spec.params
    m, horizon, cap = config.num_margins, spec.horizon, config.duration_cap
    tables = build_emission_tables(params, config)
    flat_cdfs = [np.cumsum(t.pmf.ravel()) for t in tables]
    for c in flat_cdfs:
        c[-1] = 1.0
    shape = tuple(l + 1 for l in config.scale_max)
    names = phase_names(config.num_states)

    profile = draw_profile(rng)
    enc = encode_profile(profile, spec.covariates.risk_factors)

    obs = np.empty((horizon, m), dtype=int)
    treatments = np.zeros(horizon, dtype=int)
    labels = []
    state, duration = _sample_index(np.cumsum(params.initial_dist), rng.random()), 1
    for t in range(horizon):
        cell = _sample_index(flat_cdfs[state], rng.random())
        obs[t] = np.asarray(np.unravel_index(cell, shape))
        if spec.treatment_prob > 0:
            treatments[t] = int(rng.random() < spec.treatment_prob)
        labels.append(names[state])
        if t < horizon - 1:
            x = _assemble_covariates(spec.covariates, treatments[t], enc, obs, t)
            row = transition_row(params, TransitionContext(state, min(duration, cap), x),
                                 duration_cap=cap)
            nxt = _sample_index(np.cumsum(row), rng.random())
            duration = min(duration + 1, cap) if nxt == state else 1
            state = nxt

    if spec.label_flip_prob > 0 and len(names) > 1:
        for t in range(horizon):
            if rng.random() < spec.label_flip_prob:
                others = [n for n in names if n != labels[t]]
                labels[t] = others[int(rng.random() * len(others))]

    if spec.missing_prob > 0:
        mask = rng.random(size=(horizon, m)) < spec.missing_prob
        obs[mask] = MISSING

    return PatientRecord(patient_id=patient_id, profile=profile, observations=obs,
                         treatments=treatments, phases=tuple(labels))


def _assemble_covariates(cov_spec: CovariateSpec, treatment: int,
                         enc: np.ndarray, obs: np.ndarray, t: int) -> np.ndarray:
    parts = []
    if cov_spec.include_treatment:
        parts.append([float(treatment)])
    if cov_spec.risk_factors:
        parts.append(enc)
    if cov_spec.include_lagged:
        parts.append(obs[t - 1].astype(float) if t > 0 else obs[0].astype(float))
    if not parts:
        return np.empty(0)
    return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


def simulate_cohort(spec: CohortSpec, seed: int) -> list[PatientRecord]:
    """Generate ``spec.num_patients`` independent patients."""
    return [simulate_patient(spec, i, seed) for i in range(spec.num_patients)]


@dataclass(frozen=True)
class DependenceSummary:
    """Kendall tau-b between the two margins plus the conditional table."""

    tau_b: float
    degenerate: bool
    conditional: np.ndarray   # rows: margin-2 level, cols: margin-1 level; rows sum to 1


def empirical_dependence(cohort: list[PatientRecord],
                         scale_max: tuple[int, int] = (10, 7)) -> DependenceSummary:
    """Dependence between the two margins over all fully observed weeks."""
    if not cohort or cohort[0].observations.shape[1] != 2:
        raise ModelError("dependence summary requires a two-margin cohort")
    pairs = np.concatenate([r.observations for r in cohort])
    pairs = pairs[(pairs != MISSING).all(axis=1)]
    if pairs.shape[0] == 0:
        raise ModelError("no fully observed weeks")
    degenerate = bool(np.all(pairs[:, 0] == pairs[0, 0]) or np.all(pairs[:, 1] == pairs[0, 1]))
    tau = float("nan") if degenerate else float(kendalltau(pairs[:, 0], pairs[:, 1]).statistic)

    table = np.zeros((scale_max[1] + 1, scale_max[0] + 1))
    for y1, y2 in pairs:
        table[y2, y1] += 1.0
    sums = table.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        table = np.where(sums > 0, table / np.maximum(sums, 1.0), 0.0)
    return DependenceSummary(tau_b=tau, degenerate=degenerate, conditional=table)
