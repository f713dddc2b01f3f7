"""Command line interface.

Subcommands: ``cv`` (cross-validated evaluation, whole pool or per site),
``train`` (fit on all subjects, save a checkpoint), ``predict`` (apply a
checkpoint to new subjects), ``synth`` (generate a synthetic dataset), and
``validate`` (load and summarise a dataset).

Option precedence: command line > TOML config file (``--config``) > built-in
defaults. The config file uses flag names with underscores, e.g.
``tail_fraction = 0.25``. A seed is mandatory for every command that draws
random numbers; there is no implicit entropy source.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .augmentation import AugmentationConfig
from .connectivity import apply_mask, correlation_vector, feature_count
from .evaluation import (
    PipelineConfig,
    fit_pipeline,
    run_cv,
    run_per_site_cv,
    write_report_csv,
    write_report_json,
)
from .ingest import dump_dataset, load_dataset
from .model import TrainConfig, load_checkpoint, predict, save_checkpoint
from .synthdata import SynthSpec, generate

_MODE_DEFAULT_FOLDS = {"whole": 10, "per-site": 5}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config file must be a TOML table")
    return doc


def _resolve(cli_value, file_config: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in file_config:
        return file_config[key]
    return default


def _require_seed(value) -> int:
    if value is None:
        raise ValueError(
            "a seed is required (--seed or 'seed' in the config file); "
            "runs never draw from an implicit entropy source"
        )
    return int(value)


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="directory of time-series files")
    parser.add_argument("--pheno", required=True, help="phenotype CSV path")


def _add_pipeline_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="top-level seed (required)")
    parser.add_argument("--no-augment", action="store_true", default=None,
                        help="disable training-set augmentation")
    parser.add_argument("--tail-fraction", type=float, default=None,
                        help="fraction of features kept per mask tail (default 0.25)")
    parser.add_argument("--bottleneck", type=int, default=None,
                        help="hidden width (default: half the masked feature count)")
    parser.add_argument("--epochs", type=int, default=None,
                        help="joint training epochs (default 25)")
    parser.add_argument("--finetune-epochs", type=int, default=None,
                        help="head-only epochs after the joint phase (default 5)")
    parser.add_argument("--lr", type=float, default=None,
                        help="learning rate (default 1e-4)")
    parser.add_argument("--batch", type=int, default=None,
                        help="mini-batch size (default 8)")
    parser.add_argument("--knn", type=int, default=None,
                        help="same-class neighbours per sample (default 5)")
    parser.add_argument("--alpha-min", type=float, default=None,
                        help="lower mixing bound for augmentation (default 0.5)")
    parser.add_argument("--alpha-max", type=float, default=None,
                        help="upper mixing bound for augmentation (default 1.0)")
    parser.add_argument("--config", default=None, help="TOML config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="connclf",
        description="Classify subjects from ROI time series: correlation "
        "features, similarity-guided augmentation, tied-weight autoencoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cv = sub.add_parser("cv", help="cross-validated evaluation")
    _add_data_options(p_cv)
    _add_pipeline_options(p_cv)
    p_cv.add_argument("--out", required=True, help="output directory")
    p_cv.add_argument("--mode", choices=("whole", "per-site"), default=None,
                      help="evaluate the whole pool or each site separately")
    p_cv.add_argument("--k", type=int, default=None,
                      help="folds (default: 10 whole, 5 per-site)")
    p_cv.add_argument("--jobs", type=int, default=None,
                      help="worker threads for folds (default 1)")

    p_train = sub.add_parser("train", help="fit on all subjects, save a checkpoint")
    _add_data_options(p_train)
    _add_pipeline_options(p_train)
    p_train.add_argument("--out", required=True, help="output directory")

    p_pred = sub.add_parser("predict", help="apply a checkpoint to a dataset")
    _add_data_options(p_pred)
    p_pred.add_argument("--model", required=True, help="checkpoint path")
    p_pred.add_argument("--out", required=True, help="output directory")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="generator seed (required)")
    p_synth.add_argument("--subjects", type=int, default=None, help="subject count (default 200)")
    p_synth.add_argument("--rois", type=int, default=None, help="ROI count (default 32)")
    p_synth.add_argument("--timepoints", type=int, default=None, help="timepoints (default 120)")
    p_synth.add_argument("--sites", type=int, default=None, help="site count (default 4)")
    p_synth.add_argument("--gap", type=float, default=None,
                         help="class-1 block correlation target in [0, 1) (default 0.8)")
    p_synth.add_argument("--noise", type=float, default=None,
                         help="observation noise scale (default 0.3)")
    p_synth.add_argument("--config", default=None, help="TOML config file")

    p_val = sub.add_parser("validate", help="load a dataset and print a summary")
    _add_data_options(p_val)

    return parser


def _pipeline_config(args: argparse.Namespace, file_config: dict) -> PipelineConfig:
    seed = _require_seed(_resolve(args.seed, file_config, "seed", None))
    no_augment = _resolve(args.no_augment, file_config, "no_augment", False)
    train_config = TrainConfig(
        joint_epochs=int(_resolve(args.epochs, file_config, "epochs", 25)),
        finetune_epochs=int(
            _resolve(args.finetune_epochs, file_config, "finetune_epochs", 5)
        ),
        batch_size=int(_resolve(args.batch, file_config, "batch", 8)),
        learning_rate=float(_resolve(args.lr, file_config, "lr", 1e-4)),
        bottleneck_dim=_resolve(args.bottleneck, file_config, "bottleneck", None),
        momentum=float(_resolve(None, file_config, "momentum", 0.9)),
    )
    aug_config = AugmentationConfig(
        k_neighbors=int(_resolve(args.knn, file_config, "knn", 5)),
        alpha_min=float(_resolve(args.alpha_min, file_config, "alpha_min", 0.5)),
        alpha_max=float(_resolve(args.alpha_max, file_config, "alpha_max", 1.0)),
    )
    mode = getattr(args, "mode", None)
    resolved_mode = _resolve(mode, file_config, "mode", "whole")
    if resolved_mode not in _MODE_DEFAULT_FOLDS:
        raise ValueError(f"mode must be 'whole' or 'per-site', got {resolved_mode!r}")
    k = int(
        _resolve(
            getattr(args, "k", None), file_config, "k",
            _MODE_DEFAULT_FOLDS[resolved_mode],
        )
    )
    return PipelineConfig(
        tail_fraction=float(
            _resolve(args.tail_fraction, file_config, "tail_fraction", 0.25)
        ),
        eros_rank=int(_resolve(None, file_config, "eros_rank", 2)),
        augment=not bool(no_augment),
        cv_folds=k,
        seed=seed,
        train=train_config,
        aug=aug_config,
    )


def _format_metric(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _print_aggregate(prefix: str, aggregate: dict) -> None:
    print(
        f"{prefix} accuracy={_format_metric(aggregate['accuracy'])} "
        f"sensitivity={_format_metric(aggregate['sensitivity'])} "
        f"specificity={_format_metric(aggregate['specificity'])}"
    )


def cmd_cv(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    config = _pipeline_config(args, file_config)
    mode = _resolve(args.mode, file_config, "mode", "whole")
    jobs = int(_resolve(args.jobs, file_config, "jobs", 1))
    dataset = load_dataset(args.data, args.pheno)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if mode == "whole":
        report = run_cv(dataset, config, jobs=jobs)
        _print_aggregate(f"whole-pool {config.cv_folds}-fold:", report.aggregate)
    else:
        report = run_per_site_cv(dataset, config, jobs=jobs)
        for site_report in report.reports:
            _print_aggregate(
                f"site {site_report.site} {config.cv_folds}-fold:",
                site_report.aggregate,
            )
        for entry in report.skipped:
            print(f"site {entry['site']} skipped: {entry['reason']}")
        _print_aggregate("average over sites:", report.average)
    write_report_json(report, out_dir / "report.json")
    write_report_csv(report, out_dir / "report.csv")
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'report.csv'}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    config = _pipeline_config(args, file_config)
    dataset = load_dataset(args.data, args.pheno)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    fit = fit_pipeline(dataset.subjects, dataset.labels, config, fold_index=0)
    model_path = out_dir / "model.json"
    save_checkpoint(model_path, fit.params, fit.mask, config_echo=config.to_dict())
    final_loss = (
        fit.train_result.joint_loss_per_epoch[-1]
        if fit.train_result.joint_loss_per_epoch.size
        else float("nan")
    )
    print(
        f"trained on {len(dataset)} subjects "
        f"({len(fit.mask)} masked features); final joint loss {final_loss:.6f}"
    )
    print(f"wrote {model_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    params, mask, config_echo = load_checkpoint(args.model)
    dataset = load_dataset(args.data, args.pheno)
    n_features = feature_count(dataset.roi_count)
    if n_features != mask.source_feature_count:
        raise ValueError(
            f"checkpoint expects {mask.source_feature_count} correlation "
            f"features, but the dataset's {dataset.roi_count} ROIs give "
            f"{n_features}"
        )
    vectors = np.stack([correlation_vector(s) for s in dataset.subjects])
    features = apply_mask(vectors, mask)
    labels, probs = predict(params, features)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "predictions.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "# model: "
            + str(args.model)
            + " config: "
            + json.dumps(config_echo, sort_keys=True)
            + "\n"
        )
        fh.write("subject_id,probability,predicted_label\n")
        for subject, prob, label in zip(dataset.subjects, probs, labels):
            fh.write(f"{subject.subject_id},{repr(float(prob))},{int(label)}\n")
    print(f"wrote predictions for {len(dataset)} subjects to {out_path}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    spec = SynthSpec(
        n_subjects=int(_resolve(args.subjects, file_config, "subjects", 200)),
        n_rois=int(_resolve(args.rois, file_config, "rois", 32)),
        n_timepoints=int(_resolve(args.timepoints, file_config, "timepoints", 120)),
        n_sites=int(_resolve(args.sites, file_config, "sites", 4)),
        correlation_gap=float(_resolve(args.gap, file_config, "gap", 0.8)),
        noise_scale=float(_resolve(args.noise, file_config, "noise", 0.3)),
        seed=_require_seed(_resolve(args.seed, file_config, "seed", None)),
    )
    dataset = generate(spec)
    out_dir = Path(args.out)
    phenotype_path = dump_dataset(dataset, out_dir)
    manifest_path = out_dir / "synth_manifest.json"
    manifest_path.write_text(
        json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    if spec.correlation_gap == 0.0:
        print(
            "note: correlation_gap=0 generates statistically identical "
            "classes; expect chance-level accuracy"
        )
    print(
        f"wrote {len(dataset)} subjects ({spec.n_rois} ROIs x "
        f"{spec.n_timepoints} timepoints, {spec.n_sites} sites) to {out_dir}"
    )
    print(f"wrote {phenotype_path} and {manifest_path}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data, args.pheno)
    labels = dataset.labels
    timepoints = [s.n_timepoints for s in dataset.subjects]
    sites = sorted(set(dataset.sites))
    print(
        f"subjects={len(dataset)} rois={dataset.roi_count} "
        f"patients={int((labels == 1).sum())} controls={int((labels == 0).sum())} "
        f"sites={len(sites)} timepoints={min(timepoints)}..{max(timepoints)}"
    )
    print(f"correlation features per subject: {feature_count(dataset.roi_count)}")
    return 0


_COMMANDS = {
    "cv": cmd_cv,
    "train": cmd_train,
    "predict": cmd_predict,
    "synth": cmd_synth,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
