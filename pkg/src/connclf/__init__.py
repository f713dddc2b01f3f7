"""Classify subjects from ROI time series.

Pipeline: pairwise correlation features -> training-set quartile feature
mask -> similarity-guided same-class augmentation -> tied-weight autoencoder
with a sigmoid head -> stratified cross-validated evaluation. Every stage is
seeded and leakage-free: nothing is fit on held-out subjects.
"""

from .augmentation import AugmentationConfig, AugmentedSet, augment_training_set, interpolate
from .connectivity import (
    FeatureMask,
    apply_mask,
    compute_mask,
    correlation_vector,
    feature_count,
    load_mask,
    pearson,
    save_mask,
)
from .eros import (
    EigenSummary,
    ErosWeights,
    eigen_summary,
    eros_similarity,
    eros_weights,
    knn_same_class,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    PerSiteReport,
    PipelineConfig,
    compute_metrics,
    fit_pipeline,
    make_folds,
    run_cv,
    run_fold,
    run_per_site_cv,
    write_report_csv,
    write_report_json,
)
from .ingest import (
    Dataset,
    RoiTimeSeries,
    dump_dataset,
    load_dataset,
    load_timeseries_file,
)
from .model import (
    ModelParams,
    TrainConfig,
    TrainResult,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    loss,
    predict,
    save_checkpoint,
    train,
)
from .seeding import derive_seed
from .synthdata import SynthSpec, default_block_pairs, generate

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "AugmentedSet",
    "Dataset",
    "EigenSummary",
    "ErosWeights",
    "EvalReport",
    "FeatureMask",
    "FoldPlan",
    "ModelParams",
    "PerSiteReport",
    "PipelineConfig",
    "RoiTimeSeries",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "apply_mask",
    "augment_training_set",
    "compute_mask",
    "compute_metrics",
    "correlation_vector",
    "default_block_pairs",
    "derive_seed",
    "dump_dataset",
    "eigen_summary",
    "eros_similarity",
    "eros_weights",
    "feature_count",
    "fit_pipeline",
    "forward",
    "generate",
    "gradients",
    "init_params",
    "interpolate",
    "knn_same_class",
    "load_checkpoint",
    "load_dataset",
    "load_mask",
    "load_timeseries_file",
    "loss",
    "make_folds",
    "pearson",
    "predict",
    "run_cv",
    "run_fold",
    "run_per_site_cv",
    "save_checkpoint",
    "save_mask",
    "train",
    "write_report_csv",
    "write_report_json",
]
