"""Subject similarity from the spectra of ROI covariance matrices.

Each subject is summarised by the top-r eigenvalue/eigenvector pairs of its
m x m sample covariance (divisor T-1, eigenvalues sorted descending).
Similarity between two subjects is the weighted sum of absolute cosines
between corresponding eigenvectors. The weight vector is fit on the
training set: normalise each subject's retained eigenvalues to sum 1,
average over subjects, renormalise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ingest import RoiTimeSeries

# Eigenvalues below this are treated as numerically zero.
EIGENVALUE_FLOOR = 1e-10

_UNIT_NORM_TOL = 1e-9
_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class EigenSummary:
    """Top-r spectral summary of one subject's ROI covariance.

    ``eigenvalues`` is (r,) descending and non-negative; column i of the
    (m, r) ``eigenvectors`` pairs with eigenvalue i. Columns are unit-norm
    and mutually orthogonal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.eigenvalues, dtype=np.float64, copy=True)
        vectors = np.array(self.eigenvectors, dtype=np.float64, copy=True)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("eigenvalues must be a non-empty 1-D array")
        if vectors.ndim != 2 or vectors.shape[1] != values.size:
            raise ValueError(
                f"eigenvectors must be (m, r) with r={values.size}, "
                f"got {vectors.shape}"
            )
        if np.any(np.diff(values) > 0):
            raise ValueError("eigenvalues must be sorted descending")
        if np.any(values < 0):
            raise ValueError("eigenvalues must be non-negative")
        norms = np.linalg.norm(vectors, axis=0)
        if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
            raise ValueError("eigenvector columns must be unit-norm")
        gram = vectors.T @ vectors
        off = gram - np.diag(np.diag(gram))
        if np.max(np.abs(off)) > _ORTHO_TOL:
            raise ValueError("eigenvector columns must be mutually orthogonal")
        values.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)

    @property
    def rank(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def n_rois(self) -> int:
        return int(self.eigenvectors.shape[0])


@dataclass(frozen=True)
class ErosWeights:
    """Per-eigenvector weights: non-negative, summing to 1."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-D array")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {float(w.sum())!r}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return int(self.w.size)


def eigen_summary(subject: "RoiTimeSeries | np.ndarray", r: int = 2) -> EigenSummary:
    """Top-r spectral summary of the subject's sample covariance."""
    data = subject.data if isinstance(subject, RoiTimeSeries) else np.asarray(
        subject, dtype=np.float64
    )
    if data.ndim != 2:
        raise ValueError(f"time series must be 2-D, got {data.ndim}-D")
    n_time, n_rois = data.shape
    if n_time < 2:
        raise ValueError("need at least 2 timepoints for a sample covariance")
    if not 1 <= r <= n_rois:
        raise ValueError(f"rank r={r} must be in [1, {n_rois}]")
    cov = np.cov(data, rowvar=False)
    if not np.isfinite(cov).all():
        raise ValueError("non-finite covariance")
    values, vectors = np.linalg.eigh(cov)
    values = values[::-1][:r].copy()
    vectors = vectors[:, ::-1][:, :r].copy()
    values[values < EIGENVALUE_FLOOR] = 0.0
    return EigenSummary(values, vectors)


def eros_weights(summaries) -> ErosWeights:
    """Fit similarity weights from training-set spectra.

    Each subject's eigenvalues are normalised to sum 1 (a subject whose
    retained eigenvalues are all zero contributes uniform weights, with a
    warning), averaged over subjects, then renormalised.
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("need at least one spectral summary")
    rank = summaries[0].rank
    rows = np.empty((len(summaries), rank))
    for pos, summary in enumerate(summaries):
        if summary.rank != rank:
            raise ValueError(
                f"mixed ranks in summaries: {summary.rank} vs {rank}"
            )
        total = float(summary.eigenvalues.sum())
        if total == 0.0:
            warnings.warn(
                "summary with all-zero eigenvalues contributes uniform weights",
                RuntimeWarning,
            )
            rows[pos] = 1.0 / rank
        else:
            rows[pos] = summary.eigenvalues / total
    mean = rows.mean(axis=0)
    return ErosWeights(mean / mean.sum())


def eros_similarity(a: EigenSummary, b: EigenSummary, weights: ErosWeights) -> float:
    """Weighted sum of absolute cosines between corresponding eigenvectors."""
    if a.rank != b.rank or a.rank != len(weights):
        raise ValueError(
            f"rank mismatch: summaries {a.rank} and {b.rank}, weights {len(weights)}"
        )
    if a.n_rois != b.n_rois:
        raise ValueError(f"ROI count mismatch: {a.n_rois} vs {b.n_rois}")
    cosines = np.abs(np.einsum("mi,mi->i", a.eigenvectors, b.eigenvectors))
    return float(weights.w @ cosines)


def knn_same_class(
    query_index: int,
    summaries,
    labels,
    k: int,
    weights: ErosWeights,
) -> list[int]:
    """Indices of the k most similar same-class subjects (query excluded).

    Similarity ties resolve to the lower index. If fewer than k same-class
    subjects exist, k is clamped with a warning; zero candidates is an error.
    """
    summaries = list(summaries)
    labels = np.asarray(labels)
    if len(summaries) != labels.shape[0]:
        raise ValueError(
            f"{len(summaries)} summaries but {labels.shape[0]} labels"
        )
    if not 0 <= query_index < len(summaries):
        raise ValueError(f"query index {query_index} out of range")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query_label = labels[query_index]
    candidates = [
        i
        for i in range(len(summaries))
        if i != query_index and labels[i] == query_label
    ]
    if not candidates:
        raise ValueError(
            f"subject {query_index} has no same-class neighbour candidates"
        )
    if k > len(candidates):
        warnings.warn(
            f"k={k} clamped to {len(candidates)} available same-class subjects",
            RuntimeWarning,
        )
        k = len(candidates)
    query = summaries[query_index]
    scored = [
        (i, eros_similarity(query, summaries[i], weights)) for i in candidates
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return [i for i, _ in scored[:k]]
