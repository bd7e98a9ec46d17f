#!/usr/bin/env python3
"""Regenerate the committed sample CSV exports under data/.

The household file mimics a smart-meter export (hourly kW); the national
files mimic system-operator load exports (hourly MW). All are deterministic
seeded draws so the benchmark suite stays hermetic.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dpnego.contracts import ResolutionKind
from dpnego.ingest import LoadSeries, write_csv

START = 1704067200  # 2024-01-01T00:00:00Z
DAYS = 21


def household(seed: int) -> LoadSeries:
    rng = np.random.default_rng(seed)
    hours = DAYS * 24
    t = np.arange(hours)
    diurnal = 0.5 + 0.5 * np.sin(2 * np.pi * ((t % 24) - 7) / 24) ** 2
    weekly = 1.0 + 0.08 * ((t // 24) % 7 >= 5)
    load = (0.35 + 0.75 * diurnal) * weekly + rng.normal(0, 0.07, hours)
    spikes = np.zeros(hours)
    idx = rng.integers(0, hours, size=45)
    np.add.at(spikes, idx, rng.uniform(0.6, 1.8, size=45))
    values = np.maximum(load + spikes, 0.0)
    return LoadSeries(
        source_id="uci_household",
        timestamps=START + 3600 * np.arange(hours, dtype=np.int64),
        values=np.round(values, 4),
        resolution=ResolutionKind.HOUR1,
    )


def national(name: str, base_mw: float, amp_mw: float, noise_mw: float, seed: int) -> LoadSeries:
    rng = np.random.default_rng(seed)
    hours = DAYS * 24
    t = np.arange(hours)
    diurnal = 0.5 + 0.5 * np.sin(2 * np.pi * ((t % 24) - 8) / 24) ** 2
    weekly = 1.0 - 0.06 * ((t // 24) % 7 >= 5)
    values = (base_mw + amp_mw * diurnal) * weekly + rng.normal(0, noise_mw, hours)
    return LoadSeries(
        source_id=f"national_{name}",
        timestamps=START + 3600 * np.arange(hours, dtype=np.int64),
        values=np.round(np.maximum(values, 0.0), 2),
        resolution=ResolutionKind.HOUR1,
    )


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "data"
    out.mkdir(exist_ok=True)
    write_csv(household(101), out / "uci_household.csv", "household")
    write_csv(national("de", 46000, 16000, 1500, 102), out / "national_de.csv", "national")
    write_csv(national("fr", 52000, 21000, 2300, 103), out / "national_fr.csv", "national")
    write_csv(national("it", 31000, 12000, 1100, 104), out / "national_it.csv", "national")
    print(f"wrote 4 files to {out}")


if __name__ == "__main__":
    main()
