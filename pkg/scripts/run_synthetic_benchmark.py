#!/usr/bin/env python3
"""Benchmark the pipeline on synthetic data: augmentation on/off, whole vs per-site.

Usage: python3 scripts/run_synthetic_benchmark.py [--seed 7] [--subjects 200]
"""

import argparse
import time
from dataclasses import replace

from connclf.evaluation import PipelineConfig, run_cv, run_per_site_cv
from connclf.synthdata import SynthSpec, generate


def fmt(value) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--subjects", type=int, default=200)
    parser.add_argument("--rois", type=int, default=32)
    parser.add_argument("--timepoints", type=int, default=120)
    parser.add_argument("--gap", type=float, default=0.8)
    parser.add_argument("--noise", type=float, default=0.3)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    spec = SynthSpec(
        n_subjects=args.subjects,
        n_rois=args.rois,
        n_timepoints=args.timepoints,
        correlation_gap=args.gap,
        noise_scale=args.noise,
        seed=args.seed,
    )
    dataset = generate(spec)
    base = PipelineConfig(cv_folds=10, seed=args.seed)

    print(f"dataset: {len(dataset)} subjects, {dataset.roi_count} ROIs, "
          f"gap={args.gap}, noise={args.noise}, seed={args.seed}")
    print(f"{'run':<28} {'accuracy':>8} {'sens':>6} {'spec':>6} {'time':>7}")

    for augment in (True, False):
        config = replace(base, augment=augment)
        tag = "whole-set " + ("augmented" if augment else "raw")
        started = time.perf_counter()
        report = run_cv(dataset, config, jobs=args.jobs)
        elapsed = time.perf_counter() - started
        agg = report.aggregate
        print(f"{tag:<28} {fmt(agg['accuracy']):>8} "
              f"{fmt(agg['sensitivity']):>6} {fmt(agg['specificity']):>6} "
              f"{elapsed:>6.1f}s")

    config = replace(base, cv_folds=5)
    started = time.perf_counter()
    per_site = run_per_site_cv(dataset, config, jobs=args.jobs)
    elapsed = time.perf_counter() - started
    for report in per_site.reports:
        agg = report.aggregate
        tag = f"per-site {report.site}"
        print(f"{tag:<28} {fmt(agg['accuracy']):>8} "
              f"{fmt(agg['sensitivity']):>6} {fmt(agg['specificity']):>6}")
    avg = fmt(per_site.average["accuracy"] if per_site.average else None)
    print(f"{'per-site average':<28} {avg:>8} {'':>6} {'':>6} {elapsed:>6.1f}s")


if __name__ == "__main__":
    main()
