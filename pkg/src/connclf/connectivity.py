"""Pairwise correlation features and training-set quartile masking.

A subject's feature vector is the strict upper triangle of its ROI
correlation matrix in row-major pair order (0,1), (0,2), ..., (1,2), ...,
so m ROIs give m*(m-1)/2 features. The feature mask keeps, per tail,
the ``floor(F * keep_fraction_per_tail)`` positions whose mean correlation
over the training subjects is largest / smallest.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import RoiTimeSeries


def feature_count(n_rois: int) -> int:
    """Number of distinct ROI pairs for an m-ROI atlas."""
    if n_rois < 2:
        raise ValueError(f"need at least 2 ROIs, got {n_rois}")
    return n_rois * (n_rois - 1) // 2


def pearson(u, v) -> float:
    """Correlation of two equal-length series.

    A constant series has no defined correlation; the value is 0.0 and a
    RuntimeWarning is emitted. Output is clipped to [-1, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape[0] != v.shape[0]:
        raise ValueError(f"series shape mismatch: {u.shape} vs {v.shape}")
    if u.shape[0] < 2:
        raise ValueError("need at least 2 timepoints")
    du = u - u.mean()
    dv = v - v.mean()
    su = float(du @ du)
    sv = float(dv @ dv)
    if su == 0.0 or sv == 0.0:
        warnings.warn(
            "zero-variance series: correlation set to 0.0", RuntimeWarning
        )
        return 0.0
    r = float(du @ dv) / math.sqrt(su * sv)
    return min(1.0, max(-1.0, r))


def correlation_vector(subject: "RoiTimeSeries | np.ndarray") -> np.ndarray:
    """All pairwise ROI correlations, strict upper triangle, row-major order.

    Accepts a subject or a raw T x m matrix. Zero-variance ROI columns
    contribute 0.0 to every pair they appear in (with a RuntimeWarning).
    """
    data = subject.data if isinstance(subject, RoiTimeSeries) else np.asarray(
        subject, dtype=np.float64
    )
    if data.ndim != 2:
        raise ValueError(f"time series must be 2-D, got {data.ndim}-D")
    n_time, n_rois = data.shape
    if n_time < 2 or n_rois < 2:
        raise ValueError(
            f"need at least 2 timepoints and 2 ROIs, got shape {data.shape}"
        )
    centered = data - data.mean(axis=0)
    sumsq = np.einsum("tj,tj->j", centered, centered)
    zero = sumsq == 0.0
    if zero.any():
        warnings.warn(
            f"zero-variance ROI columns {np.flatnonzero(zero).tolist()}: "
            "their correlations set to 0.0",
            RuntimeWarning,
        )
    norms = np.sqrt(np.where(zero, 1.0, sumsq))
    unit = centered / norms
    unit[:, zero] = 0.0
    corr = unit.T @ unit
    rows, cols = np.triu_indices(n_rois, k=1)
    return np.clip(corr[rows, cols], -1.0, 1.0)


@dataclass(frozen=True)
class FeatureMask:
    """Sorted feature indices selected from a correlation vector of known length."""

    indices: np.ndarray
    source_feature_count: int

    def __post_init__(self) -> None:
        indices = np.array(self.indices, dtype=np.int64, copy=True)
        if indices.ndim != 1:
            raise ValueError("mask indices must be 1-D")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= self.source_feature_count:
                raise ValueError(
                    f"mask indices out of range [0, {self.source_feature_count})"
                )
            if np.any(np.diff(indices) <= 0):
                raise ValueError("mask indices must be strictly increasing")
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return int(self.indices.size)

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.tolist(),
            "source_feature_count": int(self.source_feature_count),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureMask":
        try:
            return cls(
                np.asarray(doc["indices"], dtype=np.int64),
                int(doc["source_feature_count"]),
            )
        except KeyError as exc:
            raise ValueError(f"feature mask document missing key {exc}") from None


def save_mask(mask: FeatureMask, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mask.to_dict(), sort_keys=True) + "\n")


def load_mask(path: str | Path) -> FeatureMask:
    return FeatureMask.from_dict(json.loads(Path(path).read_text()))


def compute_mask(
    training_vectors, keep_fraction_per_tail: float = 0.25
) -> FeatureMask:
    """Select the extreme tails of the training-mean correlation vector.

    Keeps ``floor(F * keep_fraction_per_tail)`` indices per tail. Value ties
    resolve to the lower index, and the high tail claims contested indices
    first so the two tails never overlap.
    """
    vectors = np.asarray(training_vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValueError("need a non-empty 2-D stack of equal-length vectors")
    n_features = vectors.shape[1]
    if not 0.0 <= keep_fraction_per_tail <= 1.0:
        raise ValueError(
            f"keep_fraction_per_tail must be in [0, 1], got {keep_fraction_per_tail}"
        )
    per_tail = int(math.floor(n_features * keep_fraction_per_tail))
    if 2 * per_tail > n_features:
        raise ValueError(
            f"keep_fraction_per_tail={keep_fraction_per_tail} keeps "
            f"2*{per_tail}={2 * per_tail} of {n_features} features"
        )
    mean = vectors.mean(axis=0)
    positions = np.arange(n_features)
    # lexsort: last key is primary, earlier keys break ties (lower index wins)
    descending = np.lexsort((positions, -mean))
    ascending = np.lexsort((positions, mean))
    high = descending[:per_tail]
    taken = np.zeros(n_features, dtype=bool)
    taken[high] = True
    low: list[int] = []
    for i in ascending:
        if len(low) == per_tail:
            break
        if not taken[i]:
            low.append(int(i))
    indices = np.sort(np.concatenate([high, np.asarray(low, dtype=np.int64)]))
    return FeatureMask(indices, n_features)


def apply_mask(vector, mask: FeatureMask) -> np.ndarray:
    """Select masked features from one vector or a stack of vectors."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ValueError(f"expected a vector or a stack of vectors, got {arr.ndim}-D")
    if arr.shape[-1] != mask.source_feature_count:
        raise ValueError(
            f"vector has {arr.shape[-1]} features, mask expects "
            f"{mask.source_feature_count}"
        )
    return arr[..., mask.indices]
