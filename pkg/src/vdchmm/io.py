"""CSV and JSON serialization for cohorts, fits, and reports.

Cohort files follow the fixed study layout: ``observations.csv``
(patient_id, week, pain, activity, treatment, missing_pain,
missing_activity), ``profiles.csv`` (patient_id plus the nine risk
factors with categorical levels as their published strings), and
``truth_labels.csv`` (patient_id, week, phase). All files are UTF-8 with
a header row and RFC-4180 quoting; floats are written with shortest
round-trip repr so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .covariates import ALL_FACTOR_NAMES, CovariateSpec
from .emissions import MISSING
from .fitting import FitResult
from .mcmc import Diagnostics, McmcConfig, PosteriorDraws
from .model import config_from_dict, config_to_dict, params_from_dict, params_to_dict
from .records import PatientRecord
from .simulate import CohortSpec


class DataError(ValueError):
    """Malformed or inconsistent input files."""


MARGIN_NAMES = ("pain", "activity")


def _margin_columns(num_margins: int) -> tuple[str, ...]:
    if num_margins == 2:
        return MARGIN_NAMES
    return tuple(f"y{k + 1}" for k in range(num_margins))


# ---------------------------------------------------------------------------
# cohort files
# ---------------------------------------------------------------------------

def write_cohort(cohort: list[PatientRecord], out_dir: Path,
                 write_labels: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = cohort[0].observations.shape[1]
    margin_cols = _margin_columns(m)
    written = []

    path = out_dir / "observations.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["patient_id", "week", *margin_cols, "treatment",
                  *[f"missing_{c}" for c in margin_cols]]
        writer.writerow(header)
        for record in cohort:
            for t in range(record.num_weeks):
                row = [record.patient_id, t + 1]
                for k in range(m):
                    v = record.observations[t, k]
                    row.append("" if v == MISSING else int(v))
                row.append(int(record.treatments[t]))
                row.extend(int(record.observations[t, k] == MISSING) for k in range(m))
                writer.writerow(row)
    written.append(path)

    path = out_dir / "profiles.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", *ALL_FACTOR_NAMES])
        for record in cohort:
            writer.writerow([record.patient_id,
                             *[_fmt(record.profile.get(n, "")) for n in ALL_FACTOR_NAMES]])
    written.append(path)

    if write_labels and all(r.phases is not None for r in cohort):
        path = out_dir / "truth_labels.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patient_id", "week", "phase"])
            for record in cohort:
                for t, phase in enumerate(record.phases):
                    writer.writerow([record.patient_id, t + 1, phase])
        written.append(path)
    return written


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def read_cohort(data_dir: Path, num_margins: int = 2,
                require_labels: bool = False) -> list[PatientRecord]:
    data_dir = Path(data_dir)
    obs_path = data_dir / "observations.csv"
    if not obs_path.exists():
        raise DataError(f"missing input file {obs_path}")
    margin_cols = _margin_columns(num_margins)

    rows_by_patient: dict[str, list[dict]] = {}
    with open(obs_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"patient_id", "week", *margin_cols, "treatment"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise DataError(f"{obs_path} lacks required columns {sorted(needed)}")
        for row in reader:
            rows_by_patient.setdefault(row["patient_id"], []).append(row)

    profiles: dict[str, dict] = {}
    prof_path = data_dir / "profiles.csv"
    if prof_path.exists():
        with open(prof_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                profile = {}
                for name in ALL_FACTOR_NAMES:
                    if name in row and row[name] != "":
                        raw = row[name]
                        try:
                            profile[name] = float(raw)
                        except ValueError:
                            profile[name] = raw
                profiles[row["patient_id"]] = profile

    labels: dict[str, dict[int, str]] = {}
    label_path = data_dir / "truth_labels.csv"
    if label_path.exists():
        with open(label_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                labels.setdefault(row["patient_id"], {})[int(row["week"])] = row["phase"]
    elif require_labels:
        raise DataError(f"missing input file {label_path}")

    cohort = []
    for pid, rows in rows_by_patient.items():
        rows.sort(key=lambda r: int(r["week"]))
        weeks = [int(r["week"]) for r in rows]
        if weeks != list(range(1, len(rows) + 1)):
            raise DataError(f"patient {pid}: weeks must be consecutive from 1")
        obs = np.full((len(rows), num_margins), MISSING, dtype=int)
        treatments = np.zeros(len(rows), dtype=int)
        for t, row in enumerate(rows):
            for k, col in enumerate(margin_cols):
                miss = row.get(f"missing_{col}", "0") == "1"
                if not miss and row[col] != "":
                    obs[t, k] = int(row[col])
            treatments[t] = int(row["treatment"])
        phases = None
        if pid in labels:
            if sorted(labels[pid]) != weeks:
                raise DataError(f"patient {pid}: labels do not cover every week")
            phases = tuple(labels[pid][w] for w in weeks)
        elif require_labels:
            raise DataError(f"patient {pid} has no labels in {label_path}")
        pid_value = int(pid) if pid.isdigit() else pid
        cohort.append(PatientRecord(patient_id=pid_value, profile=profiles.get(pid, {}),
                                    observations=obs, treatments=treatments, phases=phases))
    if not cohort:
        raise DataError(f"{obs_path} contains no patients")
    cohort.sort(key=lambda r: (isinstance(r.patient_id, str), r.patient_id))
    return cohort


# ---------------------------------------------------------------------------
# cohort generation spec
# ---------------------------------------------------------------------------

def cohort_spec_to_json(spec: CohortSpec) -> str:
    doc = {
        "cohort": {
            "num_patients": spec.num_patients,
            "horizon": spec.horizon,
            "treatment_prob": spec.treatment_prob,
            "missing_prob": spec.missing_prob,
            "label_flip_prob": spec.label_flip_prob,
            "covariates": {
                "include_treatment": spec.covariates.include_treatment,
                "risk_factors": list(spec.covariates.risk_factors),
                "include_lagged": spec.covariates.include_lagged,
            },
        },
        "model": {
            "config": config_to_dict(spec.config),
            "params": params_to_dict(spec.params),
        },
    }
    return json.dumps(doc, indent=2)


def cohort_spec_from_json(text: str) -> CohortSpec:
    doc = json.loads(text)
    try:
        config = config_from_dict(doc["model"]["config"])
        params = params_from_dict(doc["model"]["params"], config)
        c = doc["cohort"]
        cov = c.get("covariates", {})
        spec = CohortSpec(
            num_patients=int(c["num_patients"]),
            horizon=int(c.get("horizon", 52)),
            config=config,
            params=params,
            covariates=CovariateSpec(
                include_treatment=bool(cov.get("include_treatment", True)),
                risk_factors=tuple(cov.get("risk_factors", ALL_FACTOR_NAMES)),
                include_lagged=bool(cov.get("include_lagged", True)),
            ),
            treatment_prob=float(c.get("treatment_prob", 0.0192)),
            missing_prob=float(c.get("missing_prob", 0.0)),
            label_flip_prob=float(c.get("label_flip_prob", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid cohort spec: {exc}") from exc
    return spec


# ---------------------------------------------------------------------------
# fit artifacts
# ---------------------------------------------------------------------------

def save_fit(fit: FitResult, out_dir: Path, mcmc: McmcConfig,
             criteria: dict[str, float] | None = None,
             heldout: dict | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    draws = fit.draws

    with open(out_dir / "draws.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", *draws.names, "log_posterior"])
        for i in range(draws.num_draws):
            writer.writerow([int(draws.chain_ids[i]),
                             *[repr(float(v)) for v in draws.draws[i]],
                             repr(float(draws.log_posterior[i]))])

    np.save(out_dir / "pointwise.npy", draws.pointwise)

    diag = fit.diagnostics
    summary = {
        "config": config_to_dict(fit.config),
        "mcmc": {"num_chains": mcmc.num_chains, "iterations": mcmc.iterations,
                 "warmup": mcmc.warmup, "seed": mcmc.seed},
        "covariates": {
            "include_treatment": fit.covariate_spec.include_treatment,
            "risk_factors": list(fit.covariate_spec.risk_factors),
            "include_lagged": fit.covariate_spec.include_lagged,
            "column_names": list(fit.covariate_names),
            "encoding": "categorical factors one-hot against their first level; "
                        "continuous factors standardized by published cohort moments; "
                        "columns centered then QR-rotated for sampling",
            "centering": fit.centering.tolist(),
            "qr_r": fit.qr_r.tolist() if fit.qr_r is not None else None,
        },
        "posterior_mean": params_to_dict(fit.posterior_mean),
        "diagnostics": {
            "rhat": dict(zip(draws.names, np.asarray(diag.rhat).tolist())),
            "ess": dict(zip(draws.names, np.asarray(diag.ess).tolist())),
            "acceptance": diag.acceptance,
            "max_rhat": diag.max_rhat,
            "converged": diag.converged,
            "rhat_threshold": diag.rhat_threshold,
        },
        "train_ids": list(draws.train_ids),
    }
    if criteria:
        summary["criteria"] = criteria
    if heldout:
        summary["heldout"] = heldout
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)


def load_fit(fit_dir: Path) -> tuple[FitResult, dict]:
    fit_dir = Path(fit_dir)
    summary_path = fit_dir / "summary.json"
    if not summary_path.exists():
        raise DataError(f"missing input file {summary_path}")
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    config = config_from_dict(summary["config"])

    draws_path = fit_dir / "draws.csv"
    if not draws_path.exists():
        raise DataError(f"missing input file {draws_path}")
    with open(draws_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[1:-1])
        rows = list(reader)
    chain_ids = np.array([int(r[0]) for r in rows])
    matrix = np.array([[float(v) for v in r[1:]] for r in rows])
    pointwise = np.load(fit_dir / "pointwise.npy")

    cov = summary["covariates"]
    draws = PosteriorDraws(
        draws=matrix[:, :-1], log_posterior=matrix[:, -1], pointwise=pointwise,
        chain_ids=chain_ids, names=names,
        train_ids=tuple(summary.get("train_ids", ())),
    )
    diag_d = summary["diagnostics"]
    diagnostics = Diagnostics(
        rhat=np.array([diag_d["rhat"][n] for n in names]),
        ess=np.array([diag_d["ess"][n] for n in names]),
        acceptance=diag_d["acceptance"],
        rhat_threshold=diag_d.get("rhat_threshold", 1.02),
    )
    spec = CovariateSpec(include_treatment=cov["include_treatment"],
                         risk_factors=tuple(cov["risk_factors"]),
                         include_lagged=cov["include_lagged"])
    qr_r = np.array(cov["qr_r"]) if cov["qr_r"] is not None else None
    fit = FitResult(
        config=config, covariate_spec=spec, draws=draws, diagnostics=diagnostics,
        posterior_mean=params_from_dict(summary["posterior_mean"], config),
        covariate_names=tuple(cov["column_names"]),
        centering=np.array(cov["centering"]), qr_r=qr_r,
    )
    return fit, summary


# ---------------------------------------------------------------------------
# recommendations and reports
# ---------------------------------------------------------------------------

def write_recommendations(rows: list[tuple], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "week", "regimen"])
        writer.writerows(rows)


def write_report(reports: dict[str, dict], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2)
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric", "value"])
        for model, rep in reports.items():
            for metric, value in rep.items():
                if isinstance(value, (int, float)):
                    writer.writerow([model, metric, _fmt(float(value))])
                elif isinstance(value, dict):
                    for sub, v in value.items():
                        writer.writerow([model, f"{metric}[{sub}]", _fmt(float(v))])
