#!/usr/bin/env python3
"""Run every experiment at the shipped default seeds and write the metrics
files (CSV + JSON summaries) into an output directory.

Usage: python scripts/run_experiments.py [OUTDIR]
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from dpnego.config import load_config
from dpnego import simulate


def main() -> None:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "results"
    cfg = load_config()

    print("== budget sweep ==")
    sweep = simulate.run_sweep(cfg, outdir=outdir)
    for row in sweep["rows"]:
        print(
            f"  eps0={row['eps0']:>2}  accept={row['accept']:.3f} "
            f"reject={row['reject']:.3f} counter={row['counter']:.3f}  [{row['regime']}]"
        )

    print("== full ecosystem simulation ==")
    metrics = simulate.run_full_sim(cfg, outdir=outdir)
    print(
        f"  acceptance={metrics.accept_rate:.4f} rejection={metrics.reject_rate:.4f} "
        f"counter={metrics.counter_rate:.4f} mean_remaining={metrics.mean_remaining_fraction:.3f}"
    )

    print("== cross-dataset benchmark (48 scenarios) ==")
    datasets = simulate.load_datasets(cfg, ROOT / "data")
    cross = simulate.run_cross_dataset(cfg, datasets, outdir=outdir)
    agg = cross["aggregate"]
    print(
        f"  mean={agg['mean_acceptance']:.3f} sigma={agg['std_acceptance']:.4f} "
        f"spread={agg['spread']:.4f} range=[{agg['min_acceptance']:.3f}, {agg['max_acceptance']:.3f}]"
    )

    print("== fixed-budget baseline ==")
    baseline = simulate.run_baseline_fixed(cfg, outdir=outdir)
    print(
        f"  acceptance={baseline.accept_rate:.4f} exhausted at request {baseline.exhaustion_index}"
    )

    print("== trust-inflation adversary ==")
    adv = simulate.run_adversary(cfg, outdir=outdir)
    print(
        f"  accepted={adv['accepted']} final_remaining={adv['final_remaining']:.4f} "
        f"total_granted={adv['total_granted']:.4f} trust_final={adv['trust_final']:.4f}"
    )

    print("== robustness probe ==")
    probe = simulate.run_probe(cfg, outdir=outdir)
    print(
        f"  stability={probe.stability:.4f} flips={probe.flips} "
        f"all_at_threshold={probe.all_flips_at_threshold}"
    )

    print("== latency bench ==")
    bench = simulate.bench_latency(cfg, outdir=outdir)
    print(
        f"  negotiate median={bench['negotiate_median_ms']:.4f}ms "
        f"explain median={bench['explain_median_ms']:.4f}ms "
        f"volume ratio={bench['volume_ratio']:.3f}"
    )

    print(f"metrics written to {outdir}")


if __name__ == "__main__":
    main()
