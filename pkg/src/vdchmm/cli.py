"""Command-line pipeline: simulate, fit, select, recommend, evaluate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.
Every failure prints a single ``vdchmm: error: ...`` line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BASELINE_KINDS, baseline_fit, baseline_predict
from .covariates import ALL_FACTOR_NAMES, CovariateSpec
from .criteria import out_of_sample_lpd
from .decision import evaluate, fit_regimen_map, recommend_series
from .emissions import build_emission_tables
from .fitting import fit_cohort, information_criteria, prepare_cohort
from .io import (
    DataError,
    cohort_spec_from_json,
    load_fit,
    read_cohort,
    save_fit,
    write_cohort,
    write_recommendations,
    write_report,
)
from .mcmc import McmcConfig, McmcError
from .model import ModelConfig, ModelError, VARIANTS
from .simulate import simulate_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3

COPULA_ALIASES = {
    "independence": "independence",
    "gumbel": "survival_gumbel",
    "amh": "amh",
    "clayton": "clayton",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunManifest:
    """What a command ran with; written next to its outputs."""

    command: str
    inputs: dict
    outputs: list
    seed: int | None = None
    settings: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> None:
        with open(Path(out_dir) / "run_manifest.json", "w", encoding="utf-8") as fh:
            json.dump({"command": self.command, "inputs": self.inputs,
                       "outputs": [str(p) for p in self.outputs],
                       "seed": self.seed, "settings": self.settings}, fh, indent=2)


def _check_inputs(*paths: Path) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise DataError(f"missing input file {p}")


def _check_outputs(force: bool, *paths: Path) -> None:
    if force:
        return
    for p in paths:
        if Path(p).exists():
            raise DataError(f"output {p} exists; pass --force to overwrite")


def _covariate_spec(arg: str) -> CovariateSpec:
    tokens = [t.strip() for t in arg.split(",") if t.strip()]
    if tokens == ["all"]:
        return CovariateSpec()
    if tokens == ["none"]:
        return CovariateSpec(include_treatment=False, risk_factors=(), include_lagged=False)
    factors = []
    include_treatment = include_lagged = False
    for tok in tokens:
        if tok == "treatment":
            include_treatment = True
        elif tok == "lagged":
            include_lagged = True
        elif tok in ALL_FACTOR_NAMES:
            factors.append(tok)
        else:
            raise UsageError(f"unknown covariate token {tok!r}")
    return CovariateSpec(include_treatment=include_treatment,
                         risk_factors=tuple(factors), include_lagged=include_lagged)


def build_parser() -> _Parser:
    parser = _Parser(prog="vdchmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic cohort")
    sim.add_argument("spec", type=Path, help="cohort spec JSON")
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--force", action="store_true")

    fit = sub.add_parser("fit", help="estimate the model on a cohort")
    fit.add_argument("data", type=Path, help="cohort directory")
    fit.add_argument("--out", type=Path, required=True)
    fit.add_argument("--states", type=int, default=3)
    fit.add_argument("--dmax", type=int, default=52)
    fit.add_argument("--copula", choices=sorted(COPULA_ALIASES), default="gumbel")
    fit.add_argument("--variant", choices=sorted(VARIANTS), default="vdc-hmmx")
    fit.add_argument("--covariates", default="all",
                     help="comma list of: treatment, lagged, risk factor names; or all/none")
    fit.add_argument("--chains", type=int, default=2)
    fit.add_argument("--iters", type=int, default=3500)
    fit.add_argument("--warmup", type=int, default=1000)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--threads", type=int, default=None)
    fit.add_argument("--heldout", type=Path, default=None,
                     help="held-out cohort directory for out-of-sample lpd")
    fit.add_argument("--allow-nonconverged", action="store_true")
    fit.add_argument("--force", action="store_true")

    sel = sub.add_parser("select", help="compare fits by predictive criteria")
    sel.add_argument("fits", type=Path, nargs="+")
    sel.add_argument("--heldout", type=Path, required=True)
    sel.add_argument("--out", type=Path, default=None, help="optional CSV output")
    sel.add_argument("--threads", type=int, default=None)
    sel.add_argument("--force", action="store_true")

    rec = sub.add_parser("recommend", help="weekly on-line regimen recommendations")
    rec.add_argument("--fit", type=Path, required=True)
    rec.add_argument("--train", type=Path, required=True, help="labeled training cohort")
    rec.add_argument("--data", type=Path, required=True, help="cohort to recommend for")
    rec.add_argument("--out", type=Path, required=True)
    rec.add_argument("--threads", type=int, default=None)
    rec.add_argument("--force", action="store_true")

    ev = sub.add_parser("evaluate", help="score recommendations against labels")
    ev.add_argument("--fit", type=Path, required=True)
    ev.add_argument("--train", type=Path, required=True)
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--out", type=Path, required=True)
    ev.add_argument("--baselines", action="store_true")
    ev.add_argument("--threads", type=int, default=None)
    ev.add_argument("--force", action="store_true")
    return parser


def _set_threads(threads):
    if threads is None:
        return
    if threads < 1:
        raise UsageError("--threads must be positive")
    try:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass


def cmd_simulate(args) -> int:
    _check_inputs(args.spec)
    out = Path(args.out)
    targets = [out / "observations.csv", out / "profiles.csv", out / "truth_labels.csv"]
    _check_outputs(args.force, *targets)
    spec = cohort_spec_from_json(Path(args.spec).read_text(encoding="utf-8"))
    cohort = simulate_cohort(spec, args.seed)
    written = write_cohort(cohort, out)
    RunManifest("simulate", {"spec": str(args.spec)}, written, seed=args.seed,
                settings={"num_patients": spec.num_patients, "horizon": spec.horizon}).write(out)
    print(f"wrote {spec.num_patients} patients x {spec.horizon} weeks to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    _set_threads(args.threads)
    _check_inputs(args.data / "observations.csv")
    out = Path(args.out)
    _check_outputs(args.force, out / "draws.csv", out / "summary.json")
    cohort = read_cohort(args.data)
    cov_spec = _covariate_spec(args.covariates)
    config = ModelConfig(
        num_states=args.states, num_margins=2, scale_max=(10, 7),
        duration_cap=args.dmax, copula_family=COPULA_ALIASES[args.copula],
        covariate_dim=cov_spec.dim(2),
    ).with_variant(args.variant)
    mcmc = McmcConfig(num_chains=args.chains, iterations=args.iters,
                      warmup=args.warmup, seed=args.seed)

    heldout_cohort = None
    if args.heldout is not None:
        _check_inputs(args.heldout / "observations.csv")
        heldout_cohort = read_cohort(args.heldout)
        train_ids = {r.patient_id for r in cohort}
        overlap = train_ids & {r.patient_id for r in heldout_cohort}
        if overlap:
            raise DataError(
                f"held-out cohort shares {len(overlap)} patient id(s) with training data, "
                f"e.g. {sorted(overlap)[:3]}"
            )

    fit = fit_cohort(cohort, config, cov_spec, mcmc=mcmc)
    criteria = information_criteria(fit)
    heldout_info = None
    if heldout_cohort is not None:
        data, _, _ = prepare_cohort(heldout_cohort, config, cov_spec,
                                    centering=fit.centering, qr_r=fit.qr_r)
        criteria["lpd_out_of_sample"] = out_of_sample_lpd(fit.draws, data, config)
        heldout_info = {"dir": str(args.heldout), "ids": [r.patient_id for r in heldout_cohort]}
    save_fit(fit, out, mcmc, criteria=criteria, heldout=heldout_info)
    RunManifest("fit", {"data": str(args.data), "heldout": str(args.heldout) if args.heldout else None},
                [out / "draws.csv", out / "summary.json", out / "pointwise.npy"],
                seed=args.seed,
                settings={"variant": args.variant, "copula": args.copula,
                          "states": args.states, "covariates": args.covariates}).write(out)
    print(f"fit written to {out}; max split R-hat {fit.diagnostics.max_rhat:.4f}")
    for name, value in criteria.items():
        print(f"  {name}: {value:.2f}")
    if not fit.diagnostics.converged and not args.allow_nonconverged:
        raise McmcError(
            f"non-converged: max split R-hat {fit.diagnostics.max_rhat:.4f} exceeds "
            f"{fit.diagnostics.rhat_threshold}; rerun with more iterations or pass --allow-nonconverged"
        )
    return EXIT_OK


def cmd_select(args) -> int:
    _set_threads(args.threads)
    _check_inputs(args.heldout / "observations.csv")
    heldout_cohort = read_cohort(args.heldout)
    heldout_ids = [r.patient_id for r in heldout_cohort]
    rows = []
    for fit_dir in args.fits:
        fit, summary = load_fit(fit_dir)
        criteria = dict(summary.get("criteria", {}))
        stored = summary.get("heldout")
        if "lpd_out_of_sample" not in criteria or not stored or stored.get("ids") != heldout_ids:
            data, _, _ = prepare_cohort(heldout_cohort, fit.config, fit.covariate_spec,
                                        centering=fit.centering, qr_r=fit.qr_r)
            criteria["lpd_out_of_sample"] = out_of_sample_lpd(fit.draws, data, fit.config)
        rows.append((str(fit_dir), criteria))

    best = min(range(len(rows)), key=lambda i: rows[i][1]["lpd_out_of_sample"])
    header = f"{'fit':<40} {'LOO':>12} {'WAIC':>12} {'lpd in':>12} {'lpd out':>12}"
    print(header)
    for i, (name, crit) in enumerate(rows):
        marker = " *best*" if i == best else ""
        print(f"{name:<40} {crit['loo']:>12.2f} {crit['waic']:>12.2f} "
              f"{crit['lpd_in_sample']:>12.2f} {crit['lpd_out_of_sample']:>12.2f}{marker}")
    if args.out is not None:
        _check_outputs(args.force, args.out)
        import csv as _csv

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["fit", "loo", "waic", "lpd_in_sample", "lpd_out_of_sample", "best"])
            for i, (name, crit) in enumerate(rows):
                writer.writerow([name, repr(crit["loo"]), repr(crit["waic"]),
                                 repr(crit["lpd_in_sample"]), repr(crit["lpd_out_of_sample"]),
                                 int(i == best)])
    return EXIT_OK


def _recommend_rows(fit, train_dir: Path, data_dir: Path):
    train = read_cohort(train_dir, require_labels=True)
    cohort = read_cohort(data_dir)
    config = fit.config
    params = fit.posterior_mean
    tables = build_emission_tables(params, config)

    states, labels = [], []
    for record in train:
        design = fit.centered_design(record)
        from .decision import filter_record

        result = filter_record(params, config, record, design, tables=tables)
        states.extend(int(s) for s in result.map_states)
        labels.extend(record.phases)
    regimen_map = fit_regimen_map(states, labels, config.num_states)

    rows, per_patient = [], {}
    for record in cohort:
        design = fit.centered_design(record)
        recs = recommend_series(params, config, regimen_map, record, design, tables=tables)
        per_patient[record.patient_id] = recs
        rows.extend((record.patient_id, t + 1, r) for t, r in enumerate(recs))
    return rows, per_patient, cohort, train, regimen_map


def cmd_recommend(args) -> int:
    _set_threads(args.threads)
    _check_inputs(args.fit / "summary.json", args.train / "observations.csv",
                  args.data / "observations.csv")
    out = Path(args.out)
    _check_outputs(args.force, out / "recommendations.csv")
    fit, _ = load_fit(args.fit)
    rows, _, _, _, _ = _recommend_rows(fit, args.train, args.data)
    out.mkdir(parents=True, exist_ok=True)
    write_recommendations(rows, out / "recommendations.csv")
    RunManifest("recommend", {"fit": str(args.fit), "train": str(args.train),
                              "data": str(args.data)},
                [out / "recommendations.csv"]).write(out)
    print(f"wrote {len(rows)} recommendations to {out / 'recommendations.csv'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _set_threads(args.threads)
    _check_inputs(args.fit / "summary.json", args.train / "observations.csv",
                  args.data / "observations.csv")
    out = Path(args.out)
    _check_outputs(args.force, out / "recommendations.csv", out / "report.json",
                   out / "report.csv")
    fit, _ = load_fit(args.fit)
    rows, per_patient, cohort, train, _ = _recommend_rows(fit, args.train, args.data)
    for record in cohort:
        if record.phases is None:
            raise DataError(f"patient {record.patient_id} has no labels to evaluate against")
    out.mkdir(parents=True, exist_ok=True)
    write_recommendations(rows, out / "recommendations.csv")

    preds, trues = [], []
    for record in cohort:
        preds.extend(per_patient[record.patient_id])
        trues.extend(record.phases)
    reports = {"vdc-hmmx": evaluate(preds, trues).to_dict()}

    if args.baselines:
        for kind in BASELINE_KINDS:
            clf = baseline_fit(kind, train)
            predictions = baseline_predict(clf, cohort)
            flat = [p for series in predictions for p in series]
            reports[kind] = evaluate(flat, trues).to_dict()

    write_report(reports, out)
    RunManifest("evaluate", {"fit": str(args.fit), "train": str(args.train),
                             "data": str(args.data)},
                [out / "recommendations.csv", out / "report.json", out / "report.csv"],
                settings={"baselines": bool(args.baselines)}).write(out)
    for model, rep in reports.items():
        print(f"{model}: balanced accuracy {100 * rep['balanced_accuracy']:.2f}%, "
              f"total cost {rep['total_cost']:.2f} USD/patient-year")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vdchmm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except McmcError as exc:
        print(f"vdchmm: error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (DataError, ModelError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"vdchmm: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
