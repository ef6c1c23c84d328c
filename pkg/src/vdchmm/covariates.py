"""Risk-factor encoding and transition-covariate design construction.

The nine static risk factors carry their published cohort summary
statistics, which serve two purposes: the synthetic generator draws
profiles from them, and continuous factors are standardized against them
so coefficients live on a comparable scale. Categorical factors are
one-hot encoded against their first level.

A design row at week t feeds the transition out of week t and contains,
in order: the treatment flag, the encoded selected risk factors, and the
previous week's health measurements (the current week's at t = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .emissions import MISSING
from .records import PatientRecord


@dataclass(frozen=True)
class ContinuousFactor:
    name: str
    mean: float
    sd: float
    low: float
    high: float

    def encode(self, value) -> list[float]:
        return [(float(value) - self.mean) / self.sd]

    def column_names(self) -> list[str]:
        return [self.name]


@dataclass(frozen=True)
class CategoricalFactor:
    name: str
    levels: tuple[str, ...]
    frequencies: tuple[float, ...]

    def encode(self, value) -> list[float]:
        if value not in self.levels:
            raise ValueError(f"{self.name}: unknown level {value!r}; expected one of {self.levels}")
        return [1.0 if value == lvl else 0.0 for lvl in self.levels[1:]]

    def column_names(self) -> list[str]:
        return [f"{self.name}={lvl}" for lvl in self.levels[1:]]


RISK_FACTORS = {
    f.name: f
    for f in (
        ContinuousFactor("age", 43.20, 11.44, 18, 65),
        ContinuousFactor("height", 175.99, 8.86, 153, 201),
        ContinuousFactor("bmi", 26.26, 4.66, 18, 59),
        ContinuousFactor("general_health", 67.57, 20.49, 0, 100),
        CategoricalFactor("gender", ("Female", "Male"), (0.4593, 0.5407)),
        CategoricalFactor("leg_pain", ("No pain", "Mild pain", "Moderate-severe pain"),
                          (0.4198, 0.3395, 0.2407)),
        CategoricalFactor("episode_duration",
                          ("0-2 weeks", "2-4 weeks", "1-3 months", "More than 3 months"),
                          (0.6255, 0.1369, 0.1068, 0.1309)),
        CategoricalFactor("prior_episodes", ("None", "1-3", "More than 3"),
                          (0.1611, 0.3462, 0.4928)),
        CategoricalFactor("workload",
                          ("Sitting", "Sitting and walking", "Light physical work",
                           "Heavy physical work"),
                          (0.2403, 0.3574, 0.1993, 0.2030)),
    )
}

ALL_FACTOR_NAMES = tuple(RISK_FACTORS)


@dataclass(frozen=True)
class CovariateSpec:
    """Which pieces enter the transition covariate vector."""

    include_treatment: bool = True
    risk_factors: tuple[str, ...] = ALL_FACTOR_NAMES
    include_lagged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "risk_factors", tuple(self.risk_factors))
        unknown = [n for n in self.risk_factors if n not in RISK_FACTORS]
        if unknown:
            raise ValueError(f"unknown risk factor(s): {unknown}")

    def column_names(self, num_margins: int = 2) -> tuple[str, ...]:
        names: list[str] = []
        if self.include_treatment:
            names.append("treatment")
        for factor in self.risk_factors:
            names.extend(RISK_FACTORS[factor].column_names())
        if self.include_lagged:
            names.extend(f"lag_y{k + 1}" for k in range(num_margins))
        return tuple(names)

    def dim(self, num_margins: int = 2) -> int:
        return len(self.column_names(num_margins))


def encode_profile(profile: dict, factors: tuple[str, ...]) -> np.ndarray:
    out: list[float] = []
    for name in factors:
        if name not in profile:
            raise ValueError(f"profile is missing risk factor {name!r}")
        out.extend(RISK_FACTORS[name].encode(profile[name]))
    return np.asarray(out, dtype=float)


def locf_filled(observations: np.ndarray) -> np.ndarray:
    """Observations with missing values carried forward (zeros before the
    first reported value)."""
    obs = np.asarray(observations, dtype=float)
    out = obs.copy()
    for k in range(obs.shape[1]):
        last = 0.0
        for t in range(obs.shape[0]):
            if obs[t, k] == MISSING:
                out[t, k] = last
            else:
                last = obs[t, k]
    return out


def build_design(record: PatientRecord, spec: CovariateSpec) -> np.ndarray:
    """Per-week covariate rows for one patient, shape (weeks, dim)."""
    t_len = record.num_weeks
    m = record.observations.shape[1]
    parts = []
    if spec.include_treatment:
        parts.append(record.treatments[:, None].astype(float))
    if spec.risk_factors:
        enc = encode_profile(record.profile, spec.risk_factors)
        parts.append(np.tile(enc, (t_len, 1)))
    if spec.include_lagged:
        filled = locf_filled(record.observations)
        lag = np.empty((t_len, m))
        lag[0] = filled[0]
        lag[1:] = filled[:-1]
        parts.append(lag)
    if not parts:
        return np.zeros((t_len, 0))
    return np.concatenate(parts, axis=1)


def cohort_designs(records: list[PatientRecord], spec: CovariateSpec) -> list[np.ndarray]:
    return [build_design(r, spec) for r in records]
