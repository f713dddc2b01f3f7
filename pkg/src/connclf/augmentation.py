"""Training-set doubling by interpolation toward similar same-class subjects.

For each eligible training sample, one synthetic sample is placed on the
segment between the sample's feature vector and that of one of its k most
similar same-class subjects. Similarity is computed on the raw time series
(spectral summaries), interpolation on the masked feature vectors. With
``alpha_min >= 0.5`` every synthetic point lies at least as close to its own
parent as to the neighbour.

Randomness: sample i draws from the dedicated substream
``numpy.random.default_rng([seed, i])`` - neighbour choice first, then the
mixing weight alpha (uniform on the half-open ``[alpha_min, alpha_max)``) -
so generation is order-independent and parallel-safe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .eros import ErosWeights, eigen_summary, eros_weights, knn_same_class


@dataclass(frozen=True)
class AugmentationConfig:
    k_neighbors: int = 5
    alpha_min: float = 0.5
    alpha_max: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
            raise ValueError(
                f"need 0 <= alpha_min <= alpha_max <= 1, got "
                f"[{self.alpha_min}, {self.alpha_max}]"
            )


@dataclass(frozen=True)
class AugmentedSet:
    """Original samples followed by their synthetic offspring.

    ``is_synthetic`` flags the generated rows so downstream fits can tell
    real subjects from interpolated ones.
    """

    features: np.ndarray
    labels: np.ndarray
    is_synthetic: np.ndarray

    def __post_init__(self) -> None:
        if not (
            self.features.shape[0]
            == self.labels.shape[0]
            == self.is_synthetic.shape[0]
        ):
            raise ValueError("features, labels, and flags must align")

    def __len__(self) -> int:
        return int(self.features.shape[0])


def interpolate(p, q, alpha: float) -> np.ndarray:
    """Point on the segment from q (alpha=0) to p (alpha=1)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * p + (1.0 - alpha) * q


def augment_training_set(
    features,
    labels,
    subjects,
    config: AugmentationConfig,
    *,
    summaries=None,
    weights: ErosWeights | None = None,
    eros_rank: int = 2,
) -> AugmentedSet:
    """One synthetic sample per eligible training sample, labels inherited.

    A class with fewer than 2 members cannot be interpolated and is skipped
    with a warning, so output size is at most twice the input size (exactly
    twice when every class has at least 2 members). Spectral summaries and
    similarity weights may be passed in to avoid recomputation; both must
    then come from these same training subjects.
    """
    feats = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    n_samples = feats.shape[0]
    if y.shape[0] != n_samples:
        raise ValueError(f"{n_samples} samples but {y.shape[0]} labels")
    subjects = list(subjects)
    if len(subjects) != n_samples:
        raise ValueError(f"{n_samples} samples but {len(subjects)} subjects")
    if n_samples < 2:
        raise ValueError("need at least 2 samples to interpolate")

    classes, counts = np.unique(y, return_counts=True)
    eligible = {}
    for cls, count in zip(classes, counts):
        eligible[cls] = count >= 2
        if count < 2:
            warnings.warn(
                f"class {cls} has {count} sample(s); skipped by augmentation",
                RuntimeWarning,
            )

    if summaries is None:
        summaries = [eigen_summary(s, eros_rank) for s in subjects]
    else:
        summaries = list(summaries)
        if len(summaries) != n_samples:
            raise ValueError(
                f"{n_samples} samples but {len(summaries)} summaries"
            )
    if weights is None:
        weights = eros_weights(summaries)

    synth_rows = []
    synth_labels = []
    for i in range(n_samples):
        if not eligible[y[i]]:
            continue
        neighbours = knn_same_class(i, summaries, y, config.k_neighbors, weights)
        rng = np.random.default_rng([config.seed, i])
        j = neighbours[int(rng.integers(len(neighbours)))]
        alpha = float(rng.uniform(config.alpha_min, config.alpha_max))
        synth_rows.append(interpolate(feats[i], feats[j], alpha))
        synth_labels.append(y[i])

    if synth_rows:
        out_features = np.vstack([feats, np.asarray(synth_rows)])
        out_labels = np.concatenate([y, np.asarray(synth_labels, dtype=y.dtype)])
    else:
        out_features = feats.copy()
        out_labels = y.copy()
    flags = np.zeros(out_features.shape[0], dtype=bool)
    flags[n_samples:] = True
    return AugmentedSet(out_features, out_labels, flags)
