"""Stratified cross-validation of the full feature/augment/train pipeline.

Leakage rule, enforced by construction: the feature mask, similarity
weights, augmentation draws, and model parameters are functions of the
training fold (plus derived seeds) only. Test subjects are touched only at
prediction time.

Seed flow for top-level seed s: the fold plan shuffles with
``derive_seed(s, FOLD_PLAN)``; fold f trains with
``derive_seed(s, TRAINING, f)`` and augments with
``derive_seed(s, AUGMENTATION, f)``. Reports therefore depend only on
(dataset, config), never on wall clock or execution order.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import augmentation as augmentation_mod
from . import connectivity, eros
from . import model as model_mod
from .augmentation import AugmentationConfig
from .ingest import Dataset
from .model import TrainConfig
from .seeding import AUGMENTATION, FOLD_PLAN, TRAINING, derive_seed


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one evaluation run depends on besides the data."""

    tail_fraction: float = 0.25
    eros_rank: int = 2
    augment: bool = True
    cv_folds: int = 10
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    aug: AugmentationConfig = field(default_factory=AugmentationConfig)

    def __post_init__(self) -> None:
        if self.cv_folds < 2:
            raise ValueError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.eros_rank < 1:
            raise ValueError(f"eros_rank must be >= 1, got {self.eros_rank}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FoldPlan:
    """Fold assignment per subject, stratified by class label."""

    k: int
    assignments: np.ndarray

    def __post_init__(self) -> None:
        assignments = np.array(self.assignments, dtype=np.int64, copy=True)
        if assignments.ndim != 1:
            raise ValueError("assignments must be 1-D")
        if assignments.size and (
            assignments.min() < 0 or assignments.max() >= self.k
        ):
            raise ValueError(f"assignments must lie in [0, {self.k})")
        assignments.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(labels, k: int, seed: int, site: str | None = None) -> FoldPlan:
    """Seeded stratified fold assignment.

    Within each class the subjects are shuffled once and dealt round-robin,
    so per-class fold counts differ by at most 1. Any class with fewer than
    k members is an error naming the class (and site, when given).
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("need a non-empty 1-D label array")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.full(labels.size, -1, dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            where = f"site {site!r}" if site is not None else "dataset"
            raise ValueError(
                f"class {cls} in {where} has {members.size} subjects, "
                f"fewer than k={k} folds"
            )
        shuffled = rng.permutation(members)
        assignments[shuffled] = np.arange(members.size) % k
    return FoldPlan(k, assignments)


def compute_metrics(
    tp: int, tn: int, fp: int, fn: int
) -> tuple[float, float | None, float | None]:
    """(accuracy, sensitivity, specificity) from confusion counts.

    A metric whose denominator is zero is None, never 0. All-zero counts
    are an error.
    """
    counts = (tp, tn, fp, fn)
    if any(c < 0 for c in counts):
        raise ValueError(f"confusion counts must be non-negative, got {counts}")
    total = tp + tn + fp + fn
    if total == 0:
        raise ValueError("confusion counts are all zero")
    accuracy = (tp + tn) / total
    sensitivity = tp / (tp + fn) if tp + fn > 0 else None
    specificity = tn / (tn + fp) if tn + fp > 0 else None
    return accuracy, sensitivity, specificity


@dataclass
class FitResult:
    """Everything fit on one training set."""

    mask: connectivity.FeatureMask
    eros_weights: eros.ErosWeights | None  # None when augmentation is off
    params: model_mod.ModelParams
    train_result: model_mod.TrainResult


@dataclass
class FoldResult:
    fold_index: int
    fit: FitResult
    test_probs: np.ndarray
    test_predicted: np.ndarray
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def test_size(self) -> int:
        return int(self.test_probs.size)


def fit_pipeline(
    train_subjects,
    train_labels,
    config: PipelineConfig,
    fold_index: int = 0,
) -> FitResult:
    """Fit mask, similarity weights, augmentation, and model on training data only."""
    train_subjects = list(train_subjects)
    y = np.asarray(train_labels, dtype=np.int64)
    if len(train_subjects) != y.shape[0]:
        raise ValueError(
            f"{len(train_subjects)} subjects but {y.shape[0]} labels"
        )
    vectors = np.stack(
        [connectivity.correlation_vector(s) for s in train_subjects]
    )
    mask = connectivity.compute_mask(vectors, config.tail_fraction)
    features = connectivity.apply_mask(vectors, mask)
    labels = y
    weights = None
    if config.augment:
        summaries = [
            eros.eigen_summary(s, config.eros_rank) for s in train_subjects
        ]
        weights = eros.eros_weights(summaries)
        aug_config = replace(
            config.aug, seed=derive_seed(config.seed, AUGMENTATION, fold_index)
        )
        augmented = augmentation_mod.augment_training_set(
            features,
            y,
            train_subjects,
            aug_config,
            summaries=summaries,
            weights=weights,
        )
        features = augmented.features
        labels = augmented.labels
    train_config = replace(
        config.train, seed=derive_seed(config.seed, TRAINING, fold_index)
    )
    result = model_mod.train(features, labels, train_config)
    return FitResult(mask, weights, result.params, result)


def run_fold(
    train_subjects,
    train_labels,
    test_subjects,
    test_labels,
    config: PipelineConfig,
    fold_index: int = 0,
) -> FoldResult:
    """Fit on the training split, evaluate on the held-out split."""
    fit = fit_pipeline(train_subjects, train_labels, config, fold_index)
    test_subjects = list(test_subjects)
    y_test = np.asarray(test_labels, dtype=np.int64)
    if len(test_subjects) != y_test.shape[0]:
        raise ValueError(
            f"{len(test_subjects)} test subjects but {y_test.shape[0]} labels"
        )
    if len(test_subjects) == 0:
        raise ValueError("empty test split")
    vectors = np.stack(
        [connectivity.correlation_vector(s) for s in test_subjects]
    )
    features = connectivity.apply_mask(vectors, fit.mask)
    predicted, probs = model_mod.predict(fit.params, features)
    tp = int(np.sum((predicted == 1) & (y_test == 1)))
    tn = int(np.sum((predicted == 0) & (y_test == 0)))
    fp = int(np.sum((predicted == 1) & (y_test == 0)))
    fn = int(np.sum((predicted == 0) & (y_test == 1)))
    return FoldResult(fold_index, fit, probs, predicted, tp, tn, fp, fn)


def _fold_row(result: FoldResult) -> dict:
    accuracy, sensitivity, specificity = compute_metrics(
        result.tp, result.tn, result.fp, result.fn
    )
    return {
        "fold": result.fold_index,
        "test_size": result.test_size,
        "tp": result.tp,
        "tn": result.tn,
        "fp": result.fp,
        "fn": result.fn,
        "accuracy": accuracy,
        "sensitivity": sensitivity,
        "specificity": specificity,
    }


def _aggregate(fold_rows: list[dict]) -> dict:
    """Fold-mean metrics (means skip folds where a metric is undefined)
    alongside metrics on pooled confusion counts."""

    def fold_mean(key: str) -> float | None:
        values = [row[key] for row in fold_rows if row[key] is not None]
        return float(np.mean(values)) if values else None

    tp = sum(row["tp"] for row in fold_rows)
    tn = sum(row["tn"] for row in fold_rows)
    fp = sum(row["fp"] for row in fold_rows)
    fn = sum(row["fn"] for row in fold_rows)
    pooled_accuracy, pooled_sensitivity, pooled_specificity = compute_metrics(
        tp, tn, fp, fn
    )
    return {
        "accuracy": fold_mean("accuracy"),
        "sensitivity": fold_mean("sensitivity"),
        "specificity": fold_mean("specificity"),
        "pooled": {
            "tp": tp,
            "tn": tn,
            "fp": fp,
            "fn": fn,
            "accuracy": pooled_accuracy,
            "sensitivity": pooled_sensitivity,
            "specificity": pooled_specificity,
        },
    }


@dataclass
class EvalReport:
    """Cross-validation outcome for one subject pool."""

    site: str | None
    n_subjects: int
    per_fold: list[dict]
    aggregate: dict
    config_echo: dict

    def to_dict(self, include_config: bool = True) -> dict:
        doc = {
            "site": self.site,
            "n_subjects": self.n_subjects,
            "folds": self.per_fold,
            "aggregate": self.aggregate,
        }
        if include_config:
            doc["config"] = self.config_echo
        return doc


def run_cv(
    dataset: Dataset,
    config: PipelineConfig,
    jobs: int = 1,
    site: str | None = None,
) -> EvalReport:
    """Full k-fold stratified cross-validation over the dataset.

    Folds are independent, so they may run on ``jobs`` worker threads;
    results are merged in fold order and identical to a sequential run.
    """
    labels = dataset.labels
    plan = make_folds(
        labels, config.cv_folds, derive_seed(config.seed, FOLD_PLAN), site=site
    )
    subjects = dataset.subjects

    def one_fold(fold: int) -> FoldResult:
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        return run_fold(
            [subjects[i] for i in train_idx],
            labels[train_idx],
            [subjects[i] for i in test_idx],
            labels[test_idx],
            config,
            fold_index=fold,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_fold, range(config.cv_folds)))
    else:
        results = [one_fold(f) for f in range(config.cv_folds)]
    rows = [_fold_row(r) for r in results]
    return EvalReport(
        site=site,
        n_subjects=len(dataset),
        per_fold=rows,
        aggregate=_aggregate(rows),
        config_echo=config.to_dict(),
    )


@dataclass
class PerSiteReport:
    """Independent cross-validation per acquisition site."""

    reports: list[EvalReport]
    skipped: list[dict]  # {"site": ..., "reason": ...}
    average: dict  # unweighted mean over evaluated sites
    config_echo: dict

    def to_dict(self) -> dict:
        return {
            "sites": [r.to_dict(include_config=False) for r in self.reports],
            "skipped": self.skipped,
            "average": self.average,
            "config": self.config_echo,
        }


def run_per_site_cv(
    dataset: Dataset, config: PipelineConfig, jobs: int = 1
) -> PerSiteReport:
    """Run k-fold cross-validation within each site, in first-appearance order.

    A site where any class has fewer than k subjects is skipped with the
    reason recorded. The average row is the unweighted mean over evaluated
    sites (metrics undefined everywhere stay None).
    """
    site_order = list(dict.fromkeys(dataset.sites))
    reports: list[EvalReport] = []
    skipped: list[dict] = []
    for site in site_order:
        members = tuple(s for s in dataset.subjects if s.site == site)
        site_labels = np.array([s.label for s in members], dtype=np.int64)
        reason = None
        for cls in (0, 1):
            count = int(np.sum(site_labels == cls))
            if count < config.cv_folds:
                reason = (
                    f"class {cls} has {count} subjects, fewer than "
                    f"k={config.cv_folds} folds"
                )
                break
        if reason is not None:
            skipped.append({"site": site, "reason": reason})
            continue
        site_dataset = Dataset(members, dataset.roi_count, dataset.atlas_name)
        reports.append(run_cv(site_dataset, config, jobs=jobs, site=site))

    def site_mean(key: str) -> float | None:
        values = [
            r.aggregate[key] for r in reports if r.aggregate[key] is not None
        ]
        return float(np.mean(values)) if values else None

    average = {
        "accuracy": site_mean("accuracy"),
        "sensitivity": site_mean("sensitivity"),
        "specificity": site_mean("specificity"),
        "n_sites": len(reports),
    }
    return PerSiteReport(reports, skipped, average, config.to_dict())


def write_report_json(report: "EvalReport | PerSiteReport", path: str | Path) -> None:
    """Canonical JSON (sorted keys, no timestamps): identical runs give identical bytes."""
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )


_CSV_HEADER = [
    "site", "fold", "test_size", "tp", "tn", "fp", "fn",
    "accuracy", "sensitivity", "specificity",
]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _report_rows(report: EvalReport, site_label: str) -> list[list[str]]:
    rows = []
    for fold_row in report.per_fold:
        rows.append(
            [
                site_label,
                str(fold_row["fold"]),
                str(fold_row["test_size"]),
                str(fold_row["tp"]),
                str(fold_row["tn"]),
                str(fold_row["fp"]),
                str(fold_row["fn"]),
                _csv_cell(fold_row["accuracy"]),
                _csv_cell(fold_row["sensitivity"]),
                _csv_cell(fold_row["specificity"]),
            ]
        )
    agg = report.aggregate
    pooled = agg["pooled"]
    rows.append(
        [site_label, "fold-mean", "", "", "", "", "",
         _csv_cell(agg["accuracy"]), _csv_cell(agg["sensitivity"]),
         _csv_cell(agg["specificity"])]
    )
    rows.append(
        [site_label, "pooled", "", str(pooled["tp"]), str(pooled["tn"]),
         str(pooled["fp"]), str(pooled["fn"]), _csv_cell(pooled["accuracy"]),
         _csv_cell(pooled["sensitivity"]), _csv_cell(pooled["specificity"])]
    )
    return rows


def write_report_csv(
    report: "EvalReport | PerSiteReport", path: str | Path
) -> None:
    """Flat CSV twin of the JSON report, config echoed in a comment line."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "# config: " + json.dumps(report.config_echo, sort_keys=True) + "\n"
        )
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        if isinstance(report, PerSiteReport):
            for site_report in report.reports:
                writer.writerows(
                    _report_rows(site_report, site_report.site or "")
                )
            avg = report.average
            writer.writerow(
                ["(average)", "site-mean", "", "", "", "", "",
                 _csv_cell(avg["accuracy"]), _csv_cell(avg["sensitivity"]),
                 _csv_cell(avg["specificity"])]
            )
        else:
            writer.writerows(_report_rows(report, report.site or "all"))
