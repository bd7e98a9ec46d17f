"""Load time-series ingestion and the synthetic prosumer/city generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .contracts import Catalog, ResolutionKind
from .negotiation import BudgetLedger
from .scoring import TrustConfig, TrustStore


class ParseError(ValueError):
    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(message or f"malformed row at line {line}")


class SchemaMismatch(ValueError):
    pass


class NonMonotoneTimestamps(ValueError):
    pass


SCHEMAS = {
    "household": ("timestamp", "active_power_kw"),
    "national": ("timestamp", "load_mw"),
}

_SPACING_TO_RESOLUTION = {
    300: ResolutionKind.MIN5,
    900: ResolutionKind.MIN15,
    1800: ResolutionKind.MIN30,
    3600: ResolutionKind.HOUR1,
    86400: ResolutionKind.DAILY,
}
RESOLUTION_SECONDS = {v: k for k, v in _SPACING_TO_RESOLUTION.items()}


@dataclass
class LoadSeries:
    """A load time series with strictly increasing timestamps (epoch seconds)."""

    source_id: str
    timestamps: np.ndarray
    values: np.ndarray
    resolution: ResolutionKind
    gaps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values must align")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise NonMonotoneTimestamps(f"series {self.source_id} is not increasing")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def spacing_seconds(self) -> int:
        return RESOLUTION_SECONDS[self.resolution]


def _parse_timestamp(text: str, line: int) -> int:
    try:
        cleaned = text.strip()
        if cleaned.endswith("Z"):
            cleaned = cleaned[:-1] + "+00:00"
        dt = datetime.fromisoformat(cleaned)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except ValueError:
        raise ParseError(line, f"bad timestamp {text!r} at line {line}") from None


def load_csv(path: str | Path, schema: str) -> LoadSeries:
    """Parse a documented CSV export; malformed rows raise positioned errors."""
    if schema not in SCHEMAS:
        raise SchemaMismatch(f"unknown schema {schema!r}")
    expected_header = SCHEMAS[schema]
    timestamps: list[int] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != expected_header:
            raise SchemaMismatch(
                f"{path}: header {header} does not match schema {schema!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ParseError(line_no, f"expected 2 columns at line {line_no}")
            ts = _parse_timestamp(row[0], line_no)
            try:
                value = float(row[1])
            except ValueError:
                raise ParseError(
                    line_no, f"bad value {row[1]!r} at line {line_no}"
                ) from None
            if not np.isfinite(value) or value < 0:
                raise ParseError(line_no, f"non-physical load at line {line_no}")
            timestamps.append(ts)
            values.append(value)
    ts_arr = np.asarray(timestamps, dtype=np.int64)
    if len(ts_arr) > 1:
        diffs = np.diff(ts_arr)
        if np.any(diffs <= 0):
            raise NonMonotoneTimestamps(f"{path}: timestamps must strictly increase")
        spacing = int(diffs.min())
    else:
        spacing = 3600
    resolution = _SPACING_TO_RESOLUTION.get(spacing)
    if resolution is None:
        raise SchemaMismatch(f"{path}: unsupported sample spacing {spacing}s")
    gaps = tuple(int(i) for i in np.nonzero(np.diff(ts_arr) != spacing)[0])
    return LoadSeries(
        source_id=Path(path).stem,
        timestamps=ts_arr,
        values=np.asarray(values, dtype=np.float64),
        resolution=resolution,
        gaps=gaps,
    )


def write_csv(series: LoadSeries, path: str | Path, schema: str) -> None:
    if schema not in SCHEMAS:
        raise SchemaMismatch(f"unknown schema {schema!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHEMAS[schema])
        for ts, value in zip(series.timestamps, series.values):
            iso = datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(
                "%Y-%m-%dT%H:%M:%SZ"
            )
            writer.writerow([iso, repr(float(value))])


def normalize_to_household(series: LoadSeries, target_mean_kw: float = 0.8) -> LoadSeries:
    """Rescale a national-magnitude series to household magnitude by matching
    its mean; the shape (and so the volatility profile) is preserved."""
    mean = float(series.values.mean())
    factor = target_mean_kw / mean if mean > 0 else 1.0
    return LoadSeries(
        source_id=series.source_id,
        timestamps=series.timestamps.copy(),
        values=series.values * factor,
        resolution=series.resolution,
        gaps=series.gaps,
    )


_EPOCH_2024 = 1704067200  # 2024-01-01T00:00:00Z


@dataclass(frozen=True)
class EcosystemConfig:
    n_prosumers: int = 100
    days: int = 60
    initial_budget: float = 8.0
    start_epoch: int = _EPOCH_2024
    base_kw: tuple[float, float] = (0.25, 0.65)
    diurnal_amp_kw: tuple[float, float] = (0.3, 0.9)
    heating_coeff_kw_per_degc: tuple[float, float] = (0.02, 0.08)
    heating_setpoint_c: float = 15.0
    appliance_events_per_day: tuple[float, float] = (1.0, 4.0)
    appliance_kw: tuple[float, float] = (0.5, 2.0)
    temp_mean_c: float = 2.0
    temp_daily_amp_c: float = 6.0
    temp_noise_sd_c: float = 2.5


@dataclass
class Prosumer:
    prosumer_id: str
    series: LoadSeries
    ledger: BudgetLedger
    trust: TrustStore


@dataclass
class Ecosystem:
    prosumers: list[Prosumer]
    config: EcosystemConfig
    catalog: Catalog


def _winter_temperatures(rng: np.random.Generator, hours: int, cfg: EcosystemConfig) -> np.ndarray:
    t = np.arange(hours)
    daily = cfg.temp_daily_amp_c * np.sin(2 * np.pi * (t % 24) / 24 - np.pi / 2)
    noise = rng.normal(0.0, cfg.temp_noise_sd_c, size=hours)
    return cfg.temp_mean_c + daily + noise


def gen_ecosystem(
    seed: int,
    catalog: Catalog,
    cfg: EcosystemConfig = EcosystemConfig(),
    trust_cfg: TrustConfig = TrustConfig(),
) -> Ecosystem:
    """Generate the synthetic prosumer ecosystem: per-prosumer hourly load made
    of a base level, a diurnal cycle, temperature-coupled heating, and an
    appliance spike process. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    hours = cfg.days * 24
    timestamps = cfg.start_epoch + 3600 * np.arange(hours, dtype=np.int64)
    temps = _winter_temperatures(rng, hours, cfg)
    prosumers: list[Prosumer] = []
    hour_of_day = np.arange(hours) % 24
    diurnal_shape = 0.5 + 0.5 * np.sin(2 * np.pi * (hour_of_day - 7) / 24) ** 2
    for i in range(cfg.n_prosumers):
        base = rng.uniform(*cfg.base_kw)
        amp = rng.uniform(*cfg.diurnal_amp_kw)
        heat = rng.uniform(*cfg.heating_coeff_kw_per_degc)
        rate = rng.uniform(*cfg.appliance_events_per_day)
        load = base + amp * diurnal_shape
        load = load + heat * np.maximum(0.0, cfg.heating_setpoint_c - temps)
        n_events = rng.poisson(rate * cfg.days)
        if n_events > 0:
            starts = rng.integers(0, hours, size=n_events)
            sizes = rng.uniform(*cfg.appliance_kw, size=n_events)
            spikes = np.zeros(hours)
            np.add.at(spikes, starts, sizes)
            load = load + spikes
        load = np.maximum(load, 0.0)
        series = LoadSeries(
            source_id=f"prosumer-{i:03d}",
            timestamps=timestamps.copy(),
            values=load,
            resolution=ResolutionKind.HOUR1,
        )
        prosumers.append(
            Prosumer(
                prosumer_id=f"prosumer-{i:03d}",
                series=series,
                ledger=BudgetLedger(h_max=cfg.initial_budget),
                trust=TrustStore(cfg=trust_cfg),
            )
        )
    return Ecosystem(prosumers=prosumers, config=cfg, catalog=catalog)


@dataclass(frozen=True)
class CityProfile:
    """Climate-scale parameters for a synthetic city-level series."""

    name: str
    base_kw: float
    seasonal_amp_kw: float
    diurnal_amp_kw: float
    noise_sd_kw: float


DEFAULT_CITY_PROFILES = {
    "oslo": CityProfile("oslo", base_kw=1.10, seasonal_amp_kw=0.90, diurnal_amp_kw=0.35, noise_sd_kw=0.08),
    "berlin": CityProfile("berlin", base_kw=0.90, seasonal_amp_kw=0.60, diurnal_amp_kw=0.35, noise_sd_kw=0.08),
    "paris": CityProfile("paris", base_kw=0.85, seasonal_amp_kw=0.50, diurnal_amp_kw=0.32, noise_sd_kw=0.07),
    "rome": CityProfile("rome", base_kw=0.70, seasonal_amp_kw=0.25, diurnal_amp_kw=0.30, noise_sd_kw=0.07),
}


def gen_city_series(
    profile: CityProfile,
    seed: int,
    days: int = 60,
    start_epoch: int = _EPOCH_2024,
) -> LoadSeries:
    """Synthetic city-level hourly series over a winter-anchored window; the
    seasonal term peaks mid-winter so colder profiles yield higher means."""
    rng = np.random.default_rng(seed)
    hours = days * 24
    timestamps = start_epoch + 3600 * np.arange(hours, dtype=np.int64)
    t = np.arange(hours)
    day_of_year = (t / 24.0) % 365.0
    season = 0.5 + 0.5 * np.cos(2 * np.pi * (day_of_year - 15) / 365.0)
    diurnal = 0.5 + 0.5 * np.sin(2 * np.pi * ((t % 24) - 7) / 24) ** 2
    values = (
        profile.base_kw
        + profile.seasonal_amp_kw * season
        + profile.diurnal_amp_kw * diurnal
        + rng.normal(0.0, profile.noise_sd_kw, size=hours)
    )
    return LoadSeries(
        source_id=f"city-{profile.name}",
        timestamps=timestamps,
        values=np.maximum(values, 0.0),
        resolution=ResolutionKind.HOUR1,
    )
