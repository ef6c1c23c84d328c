"""Symptom-based decision-rule baselines.

Four supervised classifiers of increasing history depth, all ridge-
penalized multinomial logits trained on expert labels:

* ``myopic``: current measurements plus their interaction,
* ``myopic_risk``: adds the static risk profile and the treatment flag,
* ``moving_average``: adds the running mean of all past measurements,
* ``arma3``: adds three autoregressive lags per margin.

Every feature uses only information available at the decision week, so
the baselines are evaluated in the same on-line fashion as the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .covariates import ALL_FACTOR_NAMES, encode_profile, locf_filled
from .model import ModelError
from .records import REGIMENS, PatientRecord

BASELINE_KINDS = ("myopic", "myopic_risk", "moving_average", "arma3")
_LABEL_INDEX = {name: i for i, name in enumerate(REGIMENS)}


def baseline_features(record: PatientRecord, kind: str) -> np.ndarray:
    """Per-week feature rows for one patient; rows align with weeks."""
    if kind not in BASELINE_KINDS:
        raise ModelError(f"unknown baseline kind {kind!r}")
    y = locf_filled(record.observations)
    t_len, m = y.shape
    if m != 2:
        raise ModelError("baselines are defined for two measurement margins")
    cols = [y[:, 0], y[:, 1], y[:, 0] * y[:, 1]]
    if kind in ("myopic_risk", "moving_average", "arma3"):
        enc = encode_profile(record.profile, ALL_FACTOR_NAMES)
        cols.extend(np.full(t_len, v) for v in enc)
        cols.append(record.treatments.astype(float))
    if kind in ("moving_average", "arma3"):
        for k in range(m):
            csum = np.cumsum(y[:, k])
            mean_past = np.empty(t_len)
            mean_past[0] = y[0, k]  # no history yet: use the current value
            for t in range(1, t_len):
                mean_past[t] = csum[t - 1] / t
            cols.append(mean_past)
    if kind == "arma3":
        for k in range(m):
            for lag in (1, 2, 3):
                lagged = np.empty(t_len)
                for t in range(t_len):
                    lagged[t] = y[max(t - lag, 0), k]  # back-fill from the earliest week
                cols.append(lagged)
    return np.column_stack(cols)


@dataclass
class BaselineClassifier:
    """Ridge-penalized multinomial logit over baseline features."""

    kind: str
    penalty: float = 1e-4
    weights: np.ndarray | None = None      # (classes, features + 1), bias last
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    def fit(self, features: np.ndarray, labels) -> "BaselineClassifier":
        x = np.asarray(features, dtype=float)
        y = np.array([_LABEL_INDEX[lab] for lab in labels])
        classes = np.unique(y)
        if classes.size < len(REGIMENS):
            missing = [REGIMENS[i] for i in range(len(REGIMENS)) if i not in classes]
            raise ModelError(f"training labels lack class(es): {missing}")
        self.feature_mean = x.mean(axis=0)
        scale = x.std(axis=0)
        self.feature_scale = np.where(scale > 1e-12, scale, 1.0)
        xs = (x - self.feature_mean) / self.feature_scale
        n, f = xs.shape
        k = len(REGIMENS)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0

        def objective(wflat):
            w = wflat.reshape(k, f + 1)
            logits = xs @ w[:, :f].T + w[:, f]
            logits -= logits.max(axis=1, keepdims=True)
            expl = np.exp(logits)
            probs = expl / expl.sum(axis=1, keepdims=True)
            nll = -np.sum(onehot * (logits - np.log(expl.sum(axis=1, keepdims=True))))
            grad = (probs - onehot).T @ np.hstack([xs, np.ones((n, 1))])
            nll += 0.5 * self.penalty * np.sum(w[:, :f] ** 2)
            grad[:, :f] += self.penalty * w[:, :f]
            return nll, grad.ravel()

        res = minimize(objective, np.zeros(k * (f + 1)), jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "ftol": 1e-12, "gtol": 1e-9})
        self.weights = res.x.reshape(k, f + 1)
        return self

    def predict(self, features: np.ndarray) -> list[str]:
        if self.weights is None:
            raise ModelError("classifier is not fitted")
        x = np.asarray(features, dtype=float)
        xs = (x - self.feature_mean) / self.feature_scale
        f = xs.shape[1]
        logits = xs @ self.weights[:, :f].T + self.weights[:, f]
        return [REGIMENS[int(i)] for i in np.argmax(logits, axis=1)]


def baseline_fit(kind: str, cohort: list[PatientRecord]) -> BaselineClassifier:
    """Fit one baseline on every labeled patient-week of the cohort."""
    feats, labels = [], []
    for record in cohort:
        if record.phases is None:
            raise ModelError(f"patient {record.patient_id} has no labels")
        feats.append(baseline_features(record, kind))
        labels.extend(record.phases)
    return BaselineClassifier(kind=kind).fit(np.concatenate(feats), labels)


def baseline_predict(classifier: BaselineClassifier, cohort: list[PatientRecord]) -> list[list[str]]:
    return [classifier.predict(baseline_features(r, classifier.kind)) for r in cohort]
