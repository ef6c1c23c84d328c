"""Regimen mapping, on-line recommendation, and evaluation metrics.

Filtered latent states are mapped onto treatment regimens through the
label frequencies observed in training; recommendations at week t use
observations 1..t only. Evaluation reports confusion-based accuracy,
pro-rata over-/under-treatment cost against published annual regimen
costs, and a disability-weighted quality-of-life improvement fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import FilterResult, filter_sequence
from .model import ModelConfig, ModelError, ParameterSet
from .records import REGIMENS, PatientRecord

_SEVERITY = {name: i for i, name in enumerate(REGIMENS)}


@dataclass(frozen=True)
class CostModel:
    """Annual per-patient regimen costs (USD) and disability weights."""

    stable_cost: float = 208.57
    unstable_cost: float = 374.14
    acute_cost: float = 464.71
    weeks_per_year: int = 52
    dw_mild: float = 0.040
    dw_severe: float = 0.370

    def __post_init__(self):
        if not self.stable_cost < self.unstable_cost < self.acute_cost:
            raise ModelError("regimen costs must increase with severity")

    def annual_cost(self, regimen: str) -> float:
        return {"stable": self.stable_cost, "unstable": self.unstable_cost,
                "acute": self.acute_cost}[regimen]

    def disability_weight(self, true_regimen: str) -> float:
        """Weight applied to a mis-treated week, keyed on the true phase."""
        return self.dw_severe if true_regimen == "acute" else self.dw_mild


@dataclass(frozen=True)
class RegimenMap:
    """Per-state regimen frequencies with the argmax decision rule.

    Exact frequency ties resolve toward the more severe regimen.
    """

    frequencies: np.ndarray          # (states, regimens), rows sum to 1
    labels: tuple[str, ...]          # argmax regimen per state

    def __call__(self, state: int) -> str:
        return self.labels[state]


def fit_regimen_map(states, labels, num_states: int) -> RegimenMap:
    """Estimate the state-to-regimen map from aligned training pairs."""
    states = np.asarray(states, dtype=int)
    labels = list(labels)
    if states.size == 0 or states.size != len(labels):
        raise ModelError("need aligned, nonempty states and labels")
    counts = np.zeros((num_states, len(REGIMENS)))
    for s, lab in zip(states, labels):
        if lab not in _SEVERITY:
            raise ModelError(f"unknown regimen label {lab!r}")
        counts[s, _SEVERITY[lab]] += 1.0
    unvisited = np.where(counts.sum(axis=1) == 0)[0]
    if unvisited.size:
        raise ModelError(
            f"state(s) {[int(s) + 1 for s in unvisited]} never visited in training; "
            "cannot assign a regimen"
        )
    freq = counts / counts.sum(axis=1, keepdims=True)
    chosen = []
    for s in range(num_states):
        best = np.where(counts[s] == counts[s].max())[0]
        chosen.append(REGIMENS[int(best.max())])  # ties toward severe
    return RegimenMap(frequencies=freq, labels=tuple(chosen))


def filter_record(params: ParameterSet, config: ModelConfig, record: PatientRecord,
                  design: np.ndarray | None, up_to: int | None = None,
                  tables=None, tie_break: str = "lowest") -> FilterResult:
    """Forward-filter one patient record with its covariate design."""
    cov = None
    if config.use_covariates and config.covariate_dim > 0:
        if design is None:
            raise ModelError("model uses covariates but no design was given")
        cov = design
    return filter_sequence(params, config, record.observations, cov,
                           up_to=up_to, tables=tables, tie_break=tie_break)


def recommend_online(params: ParameterSet, config: ModelConfig, regimen_map: RegimenMap,
                     record: PatientRecord, design: np.ndarray | None,
                     week: int, tables=None) -> str:
    """Regimen for one week using only observations 1..week."""
    result = filter_record(params, config, record, design, up_to=week, tables=tables)
    return regimen_map(int(result.map_states[week - 1]))


def recommend_series(params: ParameterSet, config: ModelConfig, regimen_map: RegimenMap,
                     record: PatientRecord, design: np.ndarray | None,
                     tables=None) -> list[str]:
    """All weekly recommendations in one pass.

    Identical to calling :func:`recommend_online` week by week because
    filtered results for weeks 1..t never depend on later observations.
    """
    result = filter_record(params, config, record, design, tables=tables)
    return [regimen_map(int(s)) for s in result.map_states]


@dataclass(frozen=True)
class EvaluationReport:
    """Accuracy, cost, and quality-of-life metrics over patient-weeks."""

    confusion: np.ndarray                 # (true, predicted) counts
    per_class_recall: dict[str, float]
    per_class_f1: dict[str, float]
    per_class_balanced_accuracy: dict[str, float]
    balanced_accuracy: float              # mean per-class recall
    macro_f1: float
    total_cost: float                     # USD per patient-year
    under_treatment_cost: float
    over_treatment_cost: float
    qaly_improvement: float               # fraction of achievable QALY gain
    num_weeks: int

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "labels": list(REGIMENS),
            "per_class_recall": self.per_class_recall,
            "per_class_f1": self.per_class_f1,
            "per_class_balanced_accuracy": self.per_class_balanced_accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "macro_f1": self.macro_f1,
            "total_cost": self.total_cost,
            "under_treatment_cost": self.under_treatment_cost,
            "over_treatment_cost": self.over_treatment_cost,
            "qaly_improvement": self.qaly_improvement,
            "num_weeks": self.num_weeks,
        }


def evaluate(predictions, truths, cost_model: CostModel | None = None) -> EvaluationReport:
    """Score aligned prediction/truth label streams over patient-weeks.

    Costs are the weekly pro-rata absolute deviation between the
    suggested and the needed regimen's annual cost, reported per patient
    and year, split into under-treatment (suggested too light) and
    over-treatment. The QALY improvement is the disability-weighted share
    of mis-treatable weeks that were treated correctly, which is 100% for
    perfect predictions and 0% for a never-correct (\"no treatment\")
    strategy.
    """
    cost_model = cost_model or CostModel()
    preds = list(predictions)
    trues = list(truths)
    if len(preds) != len(trues) or not preds:
        raise ModelError("predictions and truths must be nonempty and aligned")
    for lab in preds + trues:
        if lab not in _SEVERITY:
            raise ModelError(f"unknown regimen label {lab!r}")

    k = len(REGIMENS)
    confusion = np.zeros((k, k), dtype=int)
    under = over = 0.0
    dw_total = dw_recovered = 0.0
    for pred, true in zip(preds, trues):
        confusion[_SEVERITY[true], _SEVERITY[pred]] += 1
        deviation = (cost_model.annual_cost(pred) - cost_model.annual_cost(true)) / cost_model.weeks_per_year
        if deviation < 0:
            under += -deviation
        else:
            over += deviation
        dw = cost_model.disability_weight(true)
        dw_total += dw
        if pred == true:
            dw_recovered += dw

    years = len(preds) / cost_model.weeks_per_year
    recalls, f1s, bals = {}, {}, {}
    present = [c for c in range(k) if confusion[c].sum() > 0]
    for c in present:
        name = REGIMENS[c]
        tp = confusion[c, c]
        fn = confusion[c].sum() - tp
        fp = confusion[:, c].sum() - tp
        tn = len(preds) - tp - fn - fp
        recall = tp / (tp + fn)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        specificity = tn / (tn + fp) if tn + fp > 0 else 1.0
        recalls[name] = float(recall)
        f1s[name] = float(2 * precision * recall / (precision + recall)) if precision + recall > 0 else 0.0
        bals[name] = float((recall + specificity) / 2.0)

    under_py = under / years
    over_py = over / years
    return EvaluationReport(
        confusion=confusion,
        per_class_recall=recalls,
        per_class_f1=f1s,
        per_class_balanced_accuracy=bals,
        balanced_accuracy=float(np.mean(list(recalls.values()))),
        macro_f1=float(np.mean(list(f1s.values()))),
        total_cost=under_py + over_py,
        under_treatment_cost=under_py,
        over_treatment_cost=over_py,
        qaly_improvement=dw_recovered / dw_total,
        num_weeks=len(preds),
    )
