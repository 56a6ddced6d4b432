#!/usr/bin/env python3
"""
Summarise MKMed experiment tables

Reads one or more experiment_<name>.csv files written by
`python -m src.main experiment <name>` and prints mean ± std per
configuration and metric across seeds. With --baseline, every configuration
is also compared against the baseline configuration seed by seed.

Usage:
    python scripts/analyze_results.py results/experiment_ablation.csv
    python scripts/analyze_results.py results/experiment_ablation.csv --baseline pt
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

REQUIRED_COLUMNS = {"experiment", "configuration", "metric", "seed", "value"}


def load_tables(paths: List[str]) -> pd.DataFrame:
    frames = []
    for path in paths:
        if not Path(path).exists():
            print(f"Error: {path} not found")
            continue
        frame = pd.read_csv(path)
        missing = REQUIRED_COLUMNS - set(frame.columns)
        if missing:
            print(f"Error: {path} lacks columns {sorted(missing)}")
            continue
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=sorted(REQUIRED_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def summarise(frame: pd.DataFrame) -> pd.DataFrame:
    """mean, std and seed count per (experiment, configuration, metric); nulls are counted separately"""
    grouped = frame.groupby(["experiment", "configuration", "metric"], sort=False)["value"]
    table = grouped.agg(["mean", "std", "count"])
    table["null"] = grouped.apply(lambda v: int(v.isna().sum()))
    return table


def compare(frame: pd.DataFrame, baseline: str, metric: str = "jaccard") -> pd.DataFrame:
    """Per-configuration paired difference against the baseline over shared seeds"""
    subset = frame[frame["metric"] == metric].dropna(subset=["value"])
    wide = subset.pivot_table(index="seed", columns="configuration", values="value")
    if baseline not in wide.columns:
        return pd.DataFrame()
    rows = []
    for configuration in wide.columns:
        if configuration == baseline:
            continue
        paired = wide[[configuration, baseline]].dropna()
        diff = paired[configuration] - paired[baseline]
        rows.append({"configuration": configuration, "seeds": len(paired),
                     "mean_diff": diff.mean(), "std_diff": diff.std()})
    return pd.DataFrame(rows)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Summarise MKMed experiment CSVs")
    parser.add_argument("paths", nargs="+", help="experiment_<name>.csv files")
    parser.add_argument("--baseline", type=str, default=None, help="Configuration to compare against")
    parser.add_argument("--metric", type=str, default="jaccard", help="Metric for the baseline comparison")
    args = parser.parse_args(argv)

    frame = load_tables(args.paths)
    if frame.empty:
        print("No experiment rows loaded.")
        return 1

    print("=" * 80)
    print(f"MKMed - Experiment Summary ({len(frame)} rows, {frame['seed'].nunique()} seeds)")
    print("=" * 80)
    for experiment, table in summarise(frame).groupby(level="experiment", sort=False):
        print(f"\n{experiment}")
        table = table.droplevel("experiment")
        for (configuration, metric), row in table.iterrows():
            value = "null" if row["count"] == 0 else f"{row['mean']:.4f} ± {0.0 if pd.isna(row['std']) else row['std']:.4f}"
            note = f"  ({int(row['null'])} null)" if row["null"] else ""
            print(f"  {configuration:<24} {metric:<14} {value}{note}")

    if args.baseline:
        print("\n" + "=" * 80)
        print(f"Paired comparison against {args.baseline!r} on {args.metric}")
        print("=" * 80)
        table = compare(frame, args.baseline, args.metric)
        if table.empty:
            print(f"Baseline {args.baseline!r} has no {args.metric} values.")
        else:
            print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
