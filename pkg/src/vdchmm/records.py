"""Patient-level data containers shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emissions import MISSING

#: Treatment regimen labels in increasing severity.
REGIMENS = ("stable", "unstable", "acute")


@dataclass(frozen=True)
class PatientRecord:
    """One patient: static risk profile plus weekly series.

    ``observations`` is (weeks, margins) int with :data:`MISSING` for
    values the patient did not report; ``phases`` holds the per-week
    regimen labels (ground truth or expert annotation) when available.
    """

    patient_id: int
    profile: dict
    observations: np.ndarray
    treatments: np.ndarray
    phases: tuple[str, ...] | None = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=int)
        if obs.ndim == 1:
            obs = obs[:, None]
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        tr = np.asarray(self.treatments, dtype=int)
        tr.setflags(write=False)
        object.__setattr__(self, "treatments", tr)
        if tr.shape[0] != obs.shape[0]:
            raise ValueError("treatments must align with observations")
        if self.phases is not None:
            object.__setattr__(self, "phases", tuple(self.phases))
            if len(self.phases) != obs.shape[0]:
                raise ValueError("phases must align with observations")

    @property
    def num_weeks(self) -> int:
        return self.observations.shape[0]


def phase_names(num_states: int) -> tuple[str, ...]:
    """Regimen label per latent state under the severity ordering."""
    if num_states == 1:
        return ("stable",)
    if num_states == 2:
        return ("stable", "acute")
    if num_states == 3:
        return REGIMENS
    raise ValueError(f"no regimen naming defined for {num_states} states")
