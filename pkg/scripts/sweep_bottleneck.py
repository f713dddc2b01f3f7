#!/usr/bin/env python3
"""Sweep the autoencoder bottleneck width on synthetic data.

Shows how accuracy responds to the hidden dimension, from very narrow
codes up to half the masked feature count (the default).

Usage: python3 scripts/sweep_bottleneck.py [--seed 7] [--dims 4 16 64 124]
"""

import argparse
from dataclasses import replace

from connclf.evaluation import PipelineConfig, run_cv
from connclf.model import TrainConfig
from connclf.synthdata import SynthSpec, generate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--subjects", type=int, default=200)
    parser.add_argument("--rois", type=int, default=32)
    parser.add_argument("--timepoints", type=int, default=120)
    parser.add_argument(
        "--dims", type=int, nargs="+", default=[4, 16, 64, None],
        help="bottleneck widths; the last defaults to d_in // 2",
    )
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    spec = SynthSpec(
        n_subjects=args.subjects, n_rois=args.rois,
        n_timepoints=args.timepoints, seed=args.seed,
    )
    dataset = generate(spec)
    print(f"dataset: {len(dataset)} subjects, {dataset.roi_count} ROIs")
    print(f"{'bottleneck':>10} {'accuracy':>9}")
    for dim in args.dims:
        config = PipelineConfig(
            cv_folds=10, seed=args.seed,
            train=TrainConfig(bottleneck_dim=dim, seed=args.seed),
        )
        report = run_cv(dataset, config, jobs=args.jobs)
        label = "d_in//2" if dim is None else str(dim)
        accuracy = report.aggregate["accuracy"]
        print(f"{label:>10} {accuracy:>9.3f}")


if __name__ == "__main__":
    main()
