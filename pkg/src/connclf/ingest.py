"""Loading, validation, and round-trip writing of ROI time-series datasets.

Formats:

* time-series file: plain text, one row per timepoint, one column per ROI,
  whitespace-delimited; a single optional leading header line (first token
  non-numeric) is skipped;
* phenotype file: CSV with the exact header ``subject_id,site,label`` where
  label is 1 for patients and 0 for controls.

Loaded datasets are immutable and safe to share read-only across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

PHENOTYPE_HEADER = ("subject_id", "site", "label")
DEFAULT_EXTENSION = ".1D"


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_timeseries_file(path: str | Path) -> np.ndarray:
    """Parse one whitespace-delimited T x m time-series file.

    Blank lines are ignored. Errors name the file and the offending
    1-based line number.
    """
    path = Path(path)
    rows: list[list[float]] = []
    n_cols: int | None = None
    header_allowed = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if header_allowed and not _is_number(tokens[0]):
                header_allowed = False
                continue
            header_allowed = False
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value at line {lineno}"
                ) from None
            if n_cols is None:
                n_cols = len(values)
            elif len(values) != n_cols:
                raise ValueError(
                    f"{path}: ragged row at line {lineno}: expected {n_cols} "
                    f"columns, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no numeric data rows")
    data = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(data).all():
        raise ValueError(f"{path}: non-finite values in time series")
    return data


@dataclass(frozen=True)
class RoiTimeSeries:
    """One subject's ROI time series: a T x m matrix plus identity and diagnosis."""

    subject_id: str
    site: str
    label: int  # 1 = patient, 0 = control
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise ValueError(
                f"subject {self.subject_id}: data must be 2-D, got {data.ndim}-D"
            )
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(
                f"subject {self.subject_id}: need at least 2 timepoints and "
                f"2 ROIs, got shape {data.shape}"
            )
        if not np.isfinite(data).all():
            raise ValueError(
                f"subject {self.subject_id}: non-finite values in time series"
            )
        if self.label not in (0, 1):
            raise ValueError(
                f"subject {self.subject_id}: label must be 0 or 1, got {self.label!r}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "label", int(self.label))

    @property
    def n_timepoints(self) -> int:
        return self.data.shape[0]

    @property
    def n_rois(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of subjects sharing one ROI atlas."""

    subjects: tuple[RoiTimeSeries, ...]
    roi_count: int
    atlas_name: str = ""

    def __post_init__(self) -> None:
        subjects = tuple(self.subjects)
        if not subjects:
            raise ValueError("dataset has no subjects")
        seen: set[str] = set()
        for s in subjects:
            if s.subject_id in seen:
                raise ValueError(f"duplicate subject_id {s.subject_id!r}")
            seen.add(s.subject_id)
            if s.n_rois != self.roi_count:
                raise ValueError(
                    f"subject {s.subject_id} has {s.n_rois} ROIs, "
                    f"expected {self.roi_count}"
                )
        object.__setattr__(self, "subjects", subjects)

    @classmethod
    def from_subjects(
        cls, subjects: "list[RoiTimeSeries] | tuple[RoiTimeSeries, ...]",
        atlas_name: str = "",
    ) -> "Dataset":
        subjects = tuple(subjects)
        if not subjects:
            raise ValueError("dataset has no subjects")
        return cls(subjects, subjects[0].n_rois, atlas_name)

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self) -> Iterator[RoiTimeSeries]:
        return iter(self.subjects)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.subjects], dtype=np.int64)

    @property
    def sites(self) -> list[str]:
        return [s.site for s in self.subjects]

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]


def load_dataset(
    timeseries_dir: str | Path,
    phenotype_path: str | Path,
    extension: str = DEFAULT_EXTENSION,
    atlas_name: str = "",
) -> Dataset:
    """Load every subject listed in the phenotype file, preserving row order."""
    timeseries_dir = Path(timeseries_dir)
    phenotype_path = Path(phenotype_path)
    with open(phenotype_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(PHENOTYPE_HEADER):
            raise ValueError(
                f"{phenotype_path}: phenotype header must be "
                f"{','.join(PHENOTYPE_HEADER)!r}, got {header!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(
                    f"{phenotype_path}: line {lineno}: expected 3 fields, got {len(row)}"
                )
            rows.append((lineno, row[0].strip(), row[1].strip(), row[2].strip()))
    if not rows:
        raise ValueError(f"{phenotype_path}: no subject rows")

    subjects: list[RoiTimeSeries] = []
    seen: set[str] = set()
    first_id: str | None = None
    roi_count: int | None = None
    for lineno, subject_id, site, label_str in rows:
        if subject_id in seen:
            raise ValueError(
                f"{phenotype_path}: line {lineno}: duplicate subject_id {subject_id!r}"
            )
        seen.add(subject_id)
        try:
            label = int(label_str)
        except ValueError:
            raise ValueError(
                f"{phenotype_path}: line {lineno}: label must be an integer, "
                f"got {label_str!r}"
            ) from None
        if label not in (0, 1):
            raise ValueError(
                f"{phenotype_path}: line {lineno}: label must be 0 or 1, got {label}"
            )
        ts_path = timeseries_dir / f"{subject_id}{extension}"
        if not ts_path.exists():
            raise FileNotFoundError(
                f"missing time-series file for subject {subject_id}: {ts_path}"
            )
        data = load_timeseries_file(ts_path)
        if roi_count is None:
            roi_count = data.shape[1]
            first_id = subject_id
        elif data.shape[1] != roi_count:
            raise ValueError(
                f"subject {subject_id} has {data.shape[1]} ROIs, expected "
                f"{roi_count} (as in subject {first_id})"
            )
        subjects.append(RoiTimeSeries(subject_id, site, label, data))
    return Dataset(tuple(subjects), roi_count=int(roi_count), atlas_name=atlas_name)


def dump_dataset(
    dataset: Dataset,
    out_dir: str | Path,
    extension: str = DEFAULT_EXTENSION,
) -> Path:
    """Write one time-series file per subject plus ``phenotype.csv``.

    Values are written with shortest round-trip precision, so
    ``load_dataset`` recovers the data bit-for-bit. Returns the phenotype
    file path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for s in dataset.subjects:
        lines = [" ".join(repr(float(v)) for v in row) for row in s.data]
        (out_dir / f"{s.subject_id}{extension}").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    phenotype_path = out_dir / "phenotype.csv"
    with open(phenotype_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PHENOTYPE_HEADER)
        for s in dataset.subjects:
            writer.writerow([s.subject_id, s.site, s.label])
    return phenotype_path
