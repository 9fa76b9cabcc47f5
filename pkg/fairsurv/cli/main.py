"""
fairsurv command-line harness.

Subcommands:
  fit        train one model (full data or one fold's training split)
  evaluate   cross-validated evaluation, paired comparison, or a saved model
  sweep      gamma / k grid search, long-format CSV
  ablation   fair vs lipschitz (optionally plain) on identical folds
  synth      synthetic dataset CSV + ground-truth sidecar
  describe   dataset characteristics

Usage examples:
  python -m fairsurv fit --config configs/rossi.yaml --variant plain
  python -m fairsurv evaluate --config configs/rossi.yaml --compare
  python -m fairsurv sweep --config configs/synthetic.yaml --k 10
  python -m fairsurv synth --n 2000 --p 2 --beta 1.0 -0.5 --censor-rate 0.3

Outputs go under --out (default Settings.output_dir):
  models/  traces/  reports/  sweeps/  data/  logs/

Exit codes:
  0  success
  1  computation error
  2  usage, configuration or I/O error
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import yaml
from pydantic import ValidationError

from fairsurv import __version__
from fairsurv.core.audit import RunLedger
from fairsurv.core.config import ExperimentConfig, Settings, TrainConfig, get_settings, load_experiment_config
from fairsurv.core.errors import ConfigError, DataError, FairSurvError
from fairsurv.core.logging_setup import configure_logging
from fairsurv.models.cox import CoxModel
from fairsurv.models.dataset import dataset_summary
from fairsurv.models.report import EvalReport
from fairsurv.services.data_io import apply_scaler, fit_scaler, kfold_split, load_csv, save_csv, write_atomic
from fairsurv.services.evaluation import evaluate
from fairsurv.services.experiments import (
    ablation_sheet,
    ablation_variants,
    compare_variants,
    cross_validate,
    load_experiment_data,
    paired_sheet,
    run_sweep,
)
from fairsurv.services.fairness import input_similarity
from fairsurv.services.synthetic import generate_misaligned, generate_synthetic
from fairsurv.services.training import fit

logger = logging.getLogger(__name__)


def _ok(msg: str) -> None:
    print(f"[OK] {msg}")


def _warn(msg: str) -> None:
    print(f"[WARN] {msg}")


def _err(msg: str) -> None:
    print(f"[ERR] {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment config (YAML)")
    common.add_argument("--data", help="Dataset CSV (overrides data.path)")
    common.add_argument("--schema", help="Dataset schema YAML (overrides data.schema_file)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--variant", choices=["fair", "lipschitz", "plain"])
    common.add_argument("--gamma", type=float, help="Fairness weight (sweep: fixes the gamma axis)")
    common.add_argument("--k", type=int, help="Neighbour list length (sweep: fixes the k axis)")
    common.add_argument("--folds", type=int, help="Number of cross-validation folds")
    common.add_argument("--out", help="Output root directory")
    common.add_argument("--subsample-cap", type=int, help="Max records for n x n similarity matrices")
    common.add_argument("--tie-credit", action="store_true", default=None, help="Give 0.5 credit to risk ties")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairsurv", description="Fairness-aware Cox survival toolkit")
    parser.add_argument("--version", action="version", version=f"fairsurv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    p_fit = sub.add_parser("fit", parents=[common], help="Train one model")
    p_fit.add_argument("--fold", type=int, help="Train on this fold's training split instead of all data")

    p_eval = sub.add_parser("evaluate", parents=[common], help="Evaluate with cross-validation or a saved model")
    p_eval.add_argument("--model", help="Saved model JSON to score on the dataset")
    p_eval.add_argument("--compare", action="store_true", help="Paired comparison against plain CPH")

    sub.add_parser("sweep", parents=[common], help="Gamma / k grid search")

    p_abl = sub.add_parser("ablation", parents=[common], help="fair vs lipschitz on identical folds")
    p_abl.add_argument("--include-plain", action="store_true", default=None, help="Add plain CPH as a third row")

    p_syn = sub.add_parser("synth", parents=[common], help="Generate a synthetic dataset")
    p_syn.add_argument("--n", type=int)
    p_syn.add_argument("--p", type=int)
    p_syn.add_argument("--beta", type=float, nargs="+", help="True coefficients")
    p_syn.add_argument("--censor-rate", type=float)
    p_syn.add_argument("--misaligned", action="store_true", default=None, help="Planted similarity/risk misalignment suite")
    p_syn.add_argument("--name", help="Output file stem")

    p_desc = sub.add_parser("describe", parents=[common], help="Print dataset characteristics")
    p_desc.add_argument("--name", help="Dataset name in the summary")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config overrides; unset flags are None and leave file values alone."""
    overrides: Dict[str, Any] = {
        "data.path": args.data,
        "data.schema_file": args.schema,
        "train.seed": args.seed,
        "train.variant": args.variant,
        "experiment.n_folds": args.folds,
        "experiment.output_dir": args.out,
        "experiment.subsample_cap": args.subsample_cap,
        "experiment.tie_credit": args.tie_credit,
    }
    if args.command == "sweep":
        overrides["experiment.gamma_grid"] = [args.gamma] if args.gamma is not None else None
        overrides["experiment.k_grid"] = [args.k] if args.k is not None else None
    else:
        overrides["train.gamma"] = args.gamma
        overrides["train.k"] = args.k
    if args.command == "ablation":
        overrides["experiment.include_plain"] = args.include_plain
    if args.command == "synth":
        overrides.update({
            "synthetic.n": args.n,
            "synthetic.p": args.p,
            "synthetic.beta_true": args.beta,
            "synthetic.censor_rate": args.censor_rate,
            "synthetic.misaligned": args.misaligned,
            "synthetic.seed": args.seed,
        })
    return overrides


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def run_stem(train: TrainConfig, fold: Optional[int] = None) -> str:
    stem = f"{train.variant}_g{train.gamma:g}_k{train.k}_s{train.seed}"
    return stem if fold is None else f"{stem}_fold{fold}"


def _write_report(report: EvalReport, out: Path, stem: str) -> None:
    write_atomic(out / "reports" / f"{stem}.json", report.to_json() + "\n")
    write_atomic(out / "reports" / f"{stem}.csv", report.to_sheet().to_csv_string())


def _record_skips(report: EvalReport, ledger: RunLedger, variant: str) -> None:
    for f in report.folds:
        if f.skipped:
            _warn(f"Fold {f.fold} skipped ({f.note})")
            ledger.record("fold_skipped", severity="warning", variant=variant, fold=f.fold, note=f.note)
    if report.subsample:
        ledger.record("subsampled", **report.subsample)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fit(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    data, sub = load_experiment_data(cfg, cfg.effective_subsample_cap(settings), cfg.train.seed)
    if sub:
        ledger.record("subsampled", **sub)
    if args.fold is not None:
        folds = kfold_split(data, cfg.experiment.n_folds, cfg.train.seed)
        if not 0 <= args.fold < folds.n_folds:
            raise ConfigError(f"--fold must lie in [0, {folds.n_folds - 1}]")
        data = data.subset(folds.train_indices(args.fold))
    scaler = fit_scaler(data)
    model, trace = fit(apply_scaler(scaler, data), cfg.train, scaler)

    stem = run_stem(cfg.train, args.fold)
    write_atomic(out / "models" / f"{stem}.json", model.to_json() + "\n")
    write_atomic(out / "traces" / f"{stem}.csv", trace.to_csv())
    ledger.record(
        "fit_completed",
        variant=cfg.train.variant, gamma=cfg.train.gamma, k=cfg.train.k, fold=args.fold,
        fndcg=trace.final_fndcg, c_index=trace.final_c_index, skipped_batches=trace.skipped_batches,
    )
    _ok(f"Model written to {out / 'models' / (stem + '.json')}")
    _ok(f"Training FNDCG@{cfg.train.k}={trace.final_fndcg:.4f}  C-index={trace.final_c_index:.4f}")
    return 0


def cmd_evaluate(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    exp = cfg.experiment
    data, sub = load_experiment_data(cfg, cfg.effective_subsample_cap(settings), cfg.train.seed)

    if args.model:
        model = CoxModel.from_json(Path(args.model).read_text(encoding="utf-8"))
        scaled = data.with_features(model.scaler.transform(data.X)) if model.scaler else data
        k = min(cfg.train.k, scaled.n - 1)
        report = evaluate(
            model, scaled, input_similarity(scaled), k, exp.tie_credit, exp.brier_grid_points,
            config={"model": Path(args.model).name},
        )
        report.subsample = sub
        stem = f"{Path(args.model).stem}_scored"
        _write_report(report, out, stem)
        _ok(f"Report written to {out / 'reports' / (stem + '.json')}")
        return 0

    if args.compare:
        variants = ["plain"] if cfg.train.variant == "plain" else ["plain", cfg.train.variant]
        reports = compare_variants(data, cfg.train, variants, exp.n_folds, exp.tie_credit, exp.brier_grid_points, sub)
        stem = f"compare_{run_stem(cfg.train)}"
        for variant, report in reports.items():
            _record_skips(report, ledger, variant)
            _write_report(report, out, f"{stem}_{variant}")
        write_atomic(out / "reports" / f"{stem}.csv", paired_sheet(reports, cfg.train.k).to_csv_string())
        _ok(f"Paired comparison written to {out / 'reports' / (stem + '.csv')}")
        return 0

    folds = kfold_split(data, exp.n_folds, cfg.train.seed)
    report = cross_validate(data, cfg.train, folds, exp.tie_credit, exp.brier_grid_points, sub)
    _record_skips(report, ledger, cfg.train.variant)
    stem = f"cv_{run_stem(cfg.train)}"
    _write_report(report, out, stem)
    _ok(
        f"FNDCG@{cfg.train.k}%={report.fndcg_at_k:.2f} C-index%={report.c_index:.2f} "
        f"Brier%={report.brier:.2f} tAUC%={report.time_dependent_auc:.2f}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    data, sub = load_experiment_data(cfg, cfg.effective_subsample_cap(settings), cfg.train.seed)
    if sub:
        ledger.record("subsampled", **sub)
    table = run_sweep(data, cfg, workers=settings.workers)
    for cell in table.failed_cells:
        _warn(f"Cell gamma={cell.gamma:g} k={cell.k} fold={cell.fold} failed: {cell.error}")
        ledger.record("cell_failed", severity="error", gamma=cell.gamma, k=cell.k, fold=cell.fold, error=cell.error)
    stem = f"sweep_{cfg.train.variant}_s{cfg.train.seed}"
    write_atomic(out / "sweeps" / f"{stem}.csv", table.long_sheet().to_csv_string())
    write_atomic(out / "sweeps" / f"{stem}_summary.csv", table.summary_sheet().to_csv_string())
    _ok(f"{len(table.rows)} configurations x {cfg.experiment.n_folds} folds written to {out / 'sweeps' / (stem + '.csv')}")
    return 0


def cmd_ablation(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    exp = cfg.experiment
    data, sub = load_experiment_data(cfg, cfg.effective_subsample_cap(settings), cfg.train.seed)
    variants = ablation_variants(exp.include_plain)
    reports = compare_variants(data, cfg.train, variants, exp.n_folds, exp.tie_credit, exp.brier_grid_points, sub)
    for variant, report in reports.items():
        _record_skips(report, ledger, variant)
    stem = f"ablation_g{cfg.train.gamma:g}_k{cfg.train.k}_s{cfg.train.seed}"
    write_atomic(out / "reports" / f"{stem}.csv", ablation_sheet(reports, cfg.train.k).to_csv_string())
    write_atomic(
        out / "reports" / f"{stem}_folds.csv",
        paired_sheet(reports, cfg.train.k, metrics=("fndcg_at_k", "c_index")).to_csv_string(),
    )
    for variant, report in reports.items():
        _ok(f"{variant:>9}: FNDCG@{cfg.train.k}%={report.fndcg_at_k:.2f} C-index%={report.c_index:.2f}")
    return 0


def cmd_synth(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    s = cfg.synthetic
    if s.misaligned:
        data, truth = generate_misaligned(s.n, s.seed, censor_rate=s.censor_rate)
    else:
        data, truth = generate_synthetic(s.n, s.p, s.beta_true, s.censor_rate, s.seed)
    name = args.name or f"synthetic_n{s.n}_s{s.seed}"
    data_dir = out / "data"
    schema = save_csv(data, str(data_dir / f"{name}.csv"))
    schema = schema.model_copy(update={"name": name})
    sidecar = {**truth.to_dict(), "n": data.n, "p": data.p, "schema": schema.model_dump()}
    write_atomic(data_dir / f"{name}.truth.json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    write_atomic(data_dir / f"{name}.schema.yaml", yaml.safe_dump(schema.model_dump(), sort_keys=False))
    ledger.record("synthetic_generated", name=name, n=data.n, censored=data.n_censored)
    _ok(f"Wrote {data.n} records ({data.censor_rate:.1%} censored) to {data_dir / (name + '.csv')}")
    return 0


def cmd_describe(args: argparse.Namespace, cfg: ExperimentConfig, out: Path, settings: Settings, ledger: RunLedger) -> int:
    if not cfg.data.path:
        raise ConfigError("data.path is not set (use --config or --data)")
    schema = cfg.data.resolve_schema()
    data = load_csv(cfg.data.path, schema)
    name = args.name or schema.name or Path(cfg.data.path).stem
    print(json.dumps(dataset_summary(data, name), indent=2))
    return 0


COMMANDS: Dict[str, Callable[..., int]] = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "ablation": cmd_ablation,
    "synth": cmd_synth,
    "describe": cmd_describe,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    settings = get_settings()
    configure_logging(settings)
    ledger: Optional[RunLedger] = None
    try:
        cfg = load_experiment_config(args.config, overrides_from_args(args))
        out = cfg.output_root(settings)
        ledger = RunLedger(log_dir=str(out / "logs"), enabled=settings.ledger_enabled)
        ledger.record("command_started", command=args.command, config=args.config, version=__version__)
        code = COMMANDS[args.command](args, cfg, out, settings, ledger)
    except (DataError, ConfigError, ValidationError, OSError) as e:
        _err(str(e))
        code = 2
    except (FairSurvError, ArithmeticError, np.linalg.LinAlgError) as e:
        _err(f"{type(e).__name__}: {e}")
        logger.debug("Computation failed", exc_info=True)
        code = 1
    if ledger is not None:
        ledger.record("command_finished", severity="info" if code == 0 else "error", command=args.command, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
