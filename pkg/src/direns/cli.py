"""Command-line pipeline: simulate, fit, evaluate, select, losses.

Subcommands compose into the full workflow: generate or ingest ensemble
prediction CSVs, fit per-input Dirichlet parameters, evaluate calibration
diagnostics, calibrate a variance threshold under a target risk, run
selective classification, and evaluate closed-form evidential losses.

Reports are deterministic JSON (no timestamps; provenance carries input
digests, settings, seed, and version), curves are plain CSV.  Exit codes:
0 success, 1 validation error, 2 I/O error.  The DIRENS_THREADS
environment variable overrides the default worker count for batch
fitting; results are identical at any thread count.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .calibration import (
    DEFAULT_BINS,
    DEFAULT_CONFIDENCE_THRESHOLD,
    LabeledPrediction,
    calibration_report,
)
from .dirichlet import DirichletParams, predictive_mean, total_variance
from .estimators import (
    DEFAULT_ALPHA0_CAP,
    DEFAULT_EPS,
    DEFAULT_MAX_ITER,
    DEFAULT_P_FLOOR,
    EnsembleSample,
    fit_batch,
)
from .evidential import annealed_lambda, digamma_loss, log_evidence_penalty, mse_kl_loss, mse_loss
from .fileio import (
    AlphaRow,
    ValidationError,
    atomic_write_text,
    format_float,
    pair_labels,
    read_alphas,
    read_labels,
    read_predictions,
    sha256_of_file,
    write_alphas,
    write_curve,
    write_labels,
    write_predictions,
    write_report,
)
from .selective import (
    DEFAULT_TARGET_RISK,
    ScoredSample,
    calibrate_threshold,
    risk_coverage_curve,
    selective_report,
    variance_bin_edges,
    variance_histograms,
)
from .simulate import SimulationConfig, generate

__all__ = ["main"]

LOSSES = ("mse", "digamma", "mse-kl", "log-ev")
MEAN_ROW_ID = "__dataset_mean__"


class _Parser(argparse.ArgumentParser):
    # Route argparse's usage failures through the validation exit code.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ValidationError(f"{self.prog}: {message}")


def _json_float(x: float) -> object:
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _provenance(inputs: dict, settings: dict, seed: Optional[int]) -> dict:
    return {
        "inputs": {
            name: {"path": path, "sha256": sha256_of_file(path)}
            for name, path in sorted(inputs.items())
        },
        "settings": settings,
        "seed": seed,
        "version": __version__,
    }


def _parse_float_list(raw: str, name: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",")]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list of numbers") from None


def _parse_pair(raw: str, name: str) -> tuple[float, float]:
    values = _parse_float_list(raw, name)
    if len(values) != 2:
        raise ValidationError(f"{name} must be exactly two comma-separated numbers")
    return values[0], values[1]


# ---------------------------------------------------------------- simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    scheme = args.scheme.replace("-", "_")
    config = SimulationConfig(
        n=args.n,
        m=args.m,
        k=args.k,
        seed=args.seed,
        scheme=scheme,
        alpha=np.array(_parse_float_list(args.alpha, "--alpha")) if args.alpha else None,
        collapse_alpha0=args.alpha0,
        frac_incorrect=args.frac_incorrect,
        correct_alpha0=_parse_pair(args.correct_alpha0, "--correct-alpha0"),
        incorrect_alpha0=_parse_pair(args.incorrect_alpha0, "--incorrect-alpha0"),
        peak=args.peak,
    )
    try:
        data = generate(config)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    rows = (
        (sid, mid, data.ensembles[sid][j])
        for sid in data.sample_ids
        for j, mid in enumerate(data.model_ids)
    )
    write_predictions(args.preds_out, config.k, list(rows))
    write_labels(args.labels_out, list(data.labels.items()))
    write_alphas(
        args.alphas_out,
        [AlphaRow(sample_id=sid, degenerate=False, alpha=data.alphas[sid]) for sid in data.sample_ids],
    )
    return 0


# --------------------------------------------------------------------- fit


def cmd_fit(args: argparse.Namespace) -> int:
    data = read_predictions(args.preds)
    model_ids = data.model_ids
    if args.models_limit is not None:
        if args.models_limit < 2:
            raise ValidationError("--models-limit must be at least 2")
        if args.models_limit > len(model_ids):
            raise ValidationError(
                f"--models-limit {args.models_limit} exceeds the {len(model_ids)} "
                "models present"
            )
        model_ids = model_ids[: args.models_limit]
    if len(model_ids) < 2:
        raise ValidationError(
            f"{args.preds}: fitting needs at least 2 models per sample, found {len(model_ids)}"
        )
    limit = len(model_ids)
    samples = [EnsembleSample(data.ensembles[sid][:limit]) for sid in data.sample_ids]
    mode = "mom_then_mle" if args.mode == "mom-mle" else "mom"
    results = fit_batch(
        samples,
        mode,
        alpha0_cap=args.cap,
        max_iter=args.max_iter,
        eps=args.eps,
        p_floor=args.p_floor,
        n_threads=args.threads,
    )
    write_alphas(
        args.out,
        [
            AlphaRow(sample_id=sid, degenerate=res.degenerate, alpha=res.params.alpha)
            for sid, res in zip(data.sample_ids, results)
        ],
    )
    return 0


# ---------------------------------------------------------------- evaluate


def _predictions_from_alphas(path: str, labels_path: str):
    rows = read_alphas(path)
    k = int(rows[0].alpha.size)
    labels = pair_labels([r.sample_id for r in rows], read_labels(labels_path), k, labels_path)
    preds = [
        LabeledPrediction(
            mean=predictive_mean(DirichletParams(r.alpha)),
            label=labels[r.sample_id],
            sample_id=r.sample_id,
        )
        for r in rows
    ]
    return rows, labels, preds


def _calibration_document(report, n_bins: int, threshold: float) -> dict:
    return {
        "metrics": {
            "accuracy": float(report.accuracy),
            "macro_f1": float(report.macro_f1),
            "nll": float(report.nll),
            "ece": float(report.ece),
        },
        "bins": [
            {
                "lower": b.lower,
                "upper": b.upper,
                "count": b.count,
                "accuracy": b.accuracy,
                "confidence": b.confidence,
                "empty": b.empty,
            }
            for b in report.bins
        ],
        "histograms": {
            "bin_count": n_bins,
            "confidence_threshold": threshold,
            "confidence_correct": report.hist_correct.tolist(),
            "confidence_incorrect": report.hist_incorrect.tolist(),
            "high_conf_error_rate": float(report.high_conf_error_rate),
        },
    }


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.alphas:
        _, _, preds = _predictions_from_alphas(args.alphas, args.labels)
        inputs = {"alphas": args.alphas, "labels": args.labels}
    else:
        data = read_predictions(args.preds)
        if len(data.model_ids) != 1:
            raise ValidationError(
                f"{args.preds}: evaluate expects a single-model predictions file "
                f"(found {len(data.model_ids)} models); fit an ensemble first"
            )
        labels = pair_labels(data.sample_ids, read_labels(args.labels), data.k, args.labels)
        preds = [
            LabeledPrediction(mean=data.ensembles[sid][0], label=labels[sid], sample_id=sid)
            for sid in data.sample_ids
        ]
        inputs = {"predictions": args.preds, "labels": args.labels}
    report = calibration_report(preds, args.bins, args.conf_threshold)
    document = _calibration_document(report, args.bins, args.conf_threshold)
    document["selective"] = None
    document["provenance"] = _provenance(
        inputs,
        {"command": "evaluate", "bins": args.bins, "conf_threshold": args.conf_threshold},
        None,
    )
    write_report(args.out, document)
    return 0


# ------------------------------------------------------------------ select


def _scored_samples(path: str, labels_path: str) -> list[ScoredSample]:
    rows = read_alphas(path)
    k = int(rows[0].alpha.size)
    labels = pair_labels([r.sample_id for r in rows], read_labels(labels_path), k, labels_path)
    out = []
    for r in rows:
        params = DirichletParams(r.alpha)
        out.append(
            ScoredSample(
                sample_id=r.sample_id,
                mean=predictive_mean(params),
                variance=total_variance(params),
                label=labels[r.sample_id],
            )
        )
    return out


def _stratified_split(
    samples: Sequence[ScoredSample], frac: float, seed: int
) -> tuple[list[ScoredSample], list[ScoredSample]]:
    if not 0.0 < frac < 1.0:
        raise ValidationError(f"--cal-split must lie in (0, 1), got {frac}")
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[ScoredSample]] = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s)
    cal: list[ScoredSample] = []
    test: list[ScoredSample] = []
    for label in sorted(by_label):
        group = sorted(by_label[label], key=lambda s: s.sample_id)
        perm = rng.permutation(len(group))
        n_cal = int(math.floor(frac * len(group) + 0.5))
        chosen = set(perm[:n_cal].tolist())
        for i, s in enumerate(group):
            (cal if i in chosen else test).append(s)
    if not cal or not test:
        raise ValidationError(
            "the stratified split left the calibration or test side empty; "
            "adjust --cal-split or provide more samples"
        )
    cal.sort(key=lambda s: s.sample_id)
    test.sort(key=lambda s: s.sample_id)
    return cal, test


def _risk_in_range(r: float) -> float:
    if not 0.0 < r < 1.0:
        raise ValidationError(f"--risk must lie in (0, 1), got {r}")
    return r


def cmd_calibrate_threshold(args: argparse.Namespace) -> int:
    samples = _scored_samples(args.alphas, args.labels)
    cal, test = _stratified_split(samples, args.cal_split, args.seed)
    result = calibrate_threshold(cal, _risk_in_range(args.risk))
    document = {
        "threshold": {
            "tau": _json_float(result.tau),
            "target_risk": result.target_risk,
            "achieved_cal_risk": result.achieved_cal_risk,
            "cal_coverage": result.cal_coverage,
            "cal_n": len(cal),
            "test_n": len(test),
        },
        "provenance": _provenance(
            {"alphas": args.alphas, "labels": args.labels},
            {
                "command": "calibrate-threshold",
                "risk": args.risk,
                "cal_split": args.cal_split,
            },
            args.seed,
        ),
    }
    write_report(args.out, document)
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    samples = _scored_samples(args.alphas, args.labels)
    settings: dict = {"command": "select", "bins": args.bins, "conf_threshold": args.conf_threshold}
    if args.tau is not None:
        tau = float(args.tau)
        calinfo = None
        test = samples
        seed = None
        settings["tau"] = _json_float(tau)
    else:
        cal, test = _stratified_split(samples, args.cal_split, args.seed)
        calinfo = calibrate_threshold(cal, _risk_in_range(args.risk))
        tau = calinfo.tau
        seed = args.seed
        settings["risk"] = args.risk
        settings["cal_split"] = args.cal_split

    curve = risk_coverage_curve(test)
    report = selective_report(test, tau)
    hist_correct, hist_incorrect = variance_histograms(test, args.bins)
    edges = variance_bin_edges(test, args.bins)
    preds = [LabeledPrediction(mean=s.mean, label=s.label, sample_id=s.sample_id) for s in test]
    cal_report = calibration_report(preds, args.bins, args.conf_threshold)

    document = _calibration_document(cal_report, args.bins, args.conf_threshold)
    document["histograms"]["variance"] = {
        "edges": [float(e) for e in edges],
        "correct": hist_correct.tolist(),
        "incorrect": hist_incorrect.tolist(),
    }
    retained = report.retained_metrics
    document["selective"] = {
        "tau": _json_float(tau),
        "target_risk": None if calinfo is None else calinfo.target_risk,
        "achieved_cal_risk": None if calinfo is None else calinfo.achieved_cal_risk,
        "cal_coverage": None if calinfo is None else calinfo.cal_coverage,
        "cal_n": None if calinfo is None else len(cal),
        "test_n": len(test),
        "coverage": retained.n / len(test),
        "retained": {
            "n": retained.n,
            "accuracy": retained.accuracy,
            "macro_f1": retained.macro_f1,
            "nll": retained.nll,
        },
        "curve_points": len(curve),
        "single_point_curve": len(curve) == 1,
    }
    document["provenance"] = _provenance(
        {"alphas": args.alphas, "labels": args.labels}, settings, seed
    )
    write_report(args.out, document)
    if args.curve_out:
        write_curve(args.curve_out, curve)
    return 0


def cmd_risk_coverage(args: argparse.Namespace) -> int:
    samples = _scored_samples(args.alphas, args.labels)
    write_curve(args.out, risk_coverage_curve(samples))
    return 0


# ------------------------------------------------------------------ losses


def cmd_losses(args: argparse.Namespace) -> int:
    schedule_given = args.epoch is not None or args.epochs is not None
    if schedule_given and args.loss != "mse-kl":
        raise ValidationError("--epoch/--epochs apply only to --loss mse-kl")
    if (args.epoch is None) != (args.epochs is None):
        raise ValidationError("--epoch and --epochs must be given together")
    rows = read_alphas(args.alphas)
    k = int(rows[0].alpha.size)
    labels = pair_labels([r.sample_id for r in rows], read_labels(args.labels), k, args.labels)

    if args.loss == "mse-kl":
        if schedule_given:
            try:
                lambda_kl = annealed_lambda(args.lambda0, k, args.epoch, args.epochs)
            except ValueError as exc:
                raise ValidationError(str(exc)) from None
        else:
            lambda_kl = args.lambda0

    def one(r: AlphaRow) -> float:
        d = DirichletParams(r.alpha)
        y = labels[r.sample_id]
        if args.loss == "mse":
            return mse_loss(d, y)
        if args.loss == "digamma":
            return digamma_loss(d, y)
        if args.loss == "mse-kl":
            return mse_kl_loss(d, y, lambda_kl)
        return log_evidence_penalty(d, args.lambda0)

    values = [(r.sample_id, one(r)) for r in rows]
    mean = math.fsum(v for _, v in values) / len(values)
    lines = ["sample_id,loss"]
    lines += [f"{sid},{format_float(v)}" for sid, v in values]
    lines.append(f"{MEAN_ROW_ID},{format_float(mean)}")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    return 0


# -------------------------------------------------------------- arg wiring


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="direns",
        description=(
            "Dirichlet distributions from prediction ensembles: fitting, "
            "calibration diagnostics, and variance-based selective classification."
        ),
    )
    parser.add_argument("--version", action="version", version=f"direns {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic ensemble predictions")
    sim.add_argument("--preds-out", required=True)
    sim.add_argument("--labels-out", required=True)
    sim.add_argument("--alphas-out", required=True, help="ground-truth concentrations")
    sim.add_argument("--n", type=int, required=True, help="number of inputs")
    sim.add_argument("--m", type=int, required=True, help="ensemble members per input")
    sim.add_argument("--k", type=int, required=True, help="class count")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument(
        "--scheme", choices=["fixed", "two-population", "collapse"], default="fixed"
    )
    sim.add_argument("--alpha", help="fixed scheme: comma-separated concentrations")
    sim.add_argument(
        "--alpha0", type=float, default=1e7, help="collapse scheme: total concentration"
    )
    sim.add_argument("--frac-incorrect", type=float, default=0.3)
    sim.add_argument("--correct-alpha0", default="50,500", help="lo,hi range")
    sim.add_argument("--incorrect-alpha0", default="3,30", help="lo,hi range")
    sim.add_argument("--peak", type=float, default=0.8)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit per-input Dirichlet parameters")
    fit.add_argument("--preds", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--mode", choices=["mom", "mom-mle"], default="mom")
    fit.add_argument("--cap", type=float, default=DEFAULT_ALPHA0_CAP)
    fit.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    fit.add_argument("--eps", type=float, default=DEFAULT_EPS)
    fit.add_argument("--p-floor", type=float, default=DEFAULT_P_FLOOR)
    fit.add_argument("--models-limit", type=int, default=None)
    fit.add_argument("--threads", type=int, default=None)
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("evaluate", help="calibration diagnostics report")
    src = ev.add_mutually_exclusive_group(required=True)
    src.add_argument("--alphas")
    src.add_argument("--preds", help="single-model predictions file")
    ev.add_argument("--labels", required=True)
    ev.add_argument("--bins", type=int, default=DEFAULT_BINS)
    ev.add_argument("--conf-threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evaluate)

    cal = sub.add_parser("calibrate-threshold", help="calibrate a variance threshold")
    cal.add_argument("--alphas", required=True)
    cal.add_argument("--labels", required=True)
    cal.add_argument("--risk", type=float, default=DEFAULT_TARGET_RISK)
    cal.add_argument("--cal-split", type=float, default=0.5)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=cmd_calibrate_threshold)

    sel = sub.add_parser("select", help="threshold, decide, and report")
    sel.add_argument("--alphas", required=True)
    sel.add_argument("--labels", required=True)
    sel.add_argument("--risk", type=float, default=DEFAULT_TARGET_RISK)
    sel.add_argument("--cal-split", type=float, default=0.5)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--tau", type=float, default=None, help="skip calibration, use this threshold")
    sel.add_argument("--bins", type=int, default=DEFAULT_BINS)
    sel.add_argument("--conf-threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD)
    sel.add_argument("--out", required=True)
    sel.add_argument("--curve-out", default=None)
    sel.set_defaults(func=cmd_select)

    rc = sub.add_parser("risk-coverage", help="risk-coverage curve CSV")
    rc.add_argument("--alphas", required=True)
    rc.add_argument("--labels", required=True)
    rc.add_argument("--out", required=True)
    rc.set_defaults(func=cmd_risk_coverage)

    loss = sub.add_parser("losses", help="per-sample evidential losses")
    loss.add_argument("--alphas", required=True)
    loss.add_argument("--labels", required=True)
    loss.add_argument("--loss", choices=list(LOSSES), required=True)
    loss.add_argument("--lambda0", type=float, default=0.0)
    loss.add_argument("--epoch", type=float, default=None)
    loss.add_argument("--epochs", type=float, default=None)
    loss.add_argument("--out", required=True)
    loss.set_defaults(func=cmd_losses)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        code = exc.code
        return int(code) if code else 0


if __name__ == "__main__":
    sys.exit(main())
