#!/usr/bin/env python3
"""Compare the three model kinds across prediction horizons.

Trains gbdt_only, bilstm_only and hybrid on held-out locations of a
synthetic corpus, one (W, T) cell at a time, and prints the results table.
Takes a few minutes on one core.

Usage:
    python3 demos/03_sweep.py [--tracks N] [--folds K] [--seed N] [--out DIR]
"""
from __future__ import annotations

import argparse

from lcintent.pipeline import ExperimentConfig, results_text, sweep
from lcintent.synth import SynthConfig, synthesize_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tracks", type=int, default=200, help="tracks per location")
    ap.add_argument("--folds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default=None, help="write models and tables here")
    args = ap.parse_args()

    corpus = synthesize_corpus(
        SynthConfig(n_locations=5, tracks_per_location=args.tracks, sampling_rate=10.0, seed=args.seed)
    )
    recordings = [rec for rec, _ in corpus]
    cfg = ExperimentConfig(windows=(1.0,), horizons=(1.0, 2.0, 3.0), cv_folds=args.folds, seed=args.seed)
    result = sweep(recordings, cfg, out_dir=args.out)
    print(f"train locations {sorted(result.split.train_locations)}, test {sorted(result.split.test_locations)}")
    print(results_text(result.rows), end="")


if __name__ == "__main__":
    main()
