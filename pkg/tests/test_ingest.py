import numpy as np
import pytest

from dpnego.config import load_config
from dpnego.contracts import ResolutionKind
from dpnego.ingest import (
    DEFAULT_CITY_PROFILES,
    EcosystemConfig,
    NonMonotoneTimestamps,
    ParseError,
    SchemaMismatch,
    gen_city_series,
    gen_ecosystem,
    load_csv,
    normalize_to_household,
    write_csv,
)

CFG = load_config()


def write(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_three_row_household(tmp_path):
    path = write(
        tmp_path,
        "timestamp,active_power_kw\n"
        "2024-01-01T00:00:00Z,1.0\n"
        "2024-01-01T01:00:00Z,1.5\n"
        "2024-01-01T02:00:00Z,0.5\n",
    )
    series = load_csv(path, "household")
    assert len(series) == 3
    assert series.resolution is ResolutionKind.HOUR1
    assert series.values.tolist() == [1.0, 1.5, 0.5]


def test_duplicate_timestamp_rejected(tmp_path):
    path = write(
        tmp_path,
        "timestamp,active_power_kw\n"
        "2024-01-01T00:00:00Z,1.0\n"
        "2024-01-01T00:00:00Z,1.5\n",
    )
    with pytest.raises(NonMonotoneTimestamps):
        load_csv(path, "household")


def test_bad_value_reports_line_number(tmp_path):
    # header on line 1, six data rows on lines 2-7, bad value on line 7
    rows = ["timestamp,active_power_kw"] + [
        f"2024-01-01T{h:02d}:00:00Z,1.0" for h in range(6)
    ]
    rows[6] = "2024-01-01T05:00:00Z,abc"
    path = write(tmp_path, "\n".join(rows) + "\n")
    with pytest.raises(ParseError) as err:
        load_csv(path, "household")
    assert err.value.line == 7


def test_schema_mismatch(tmp_path):
    path = write(tmp_path, "time,power\n2024-01-01T00:00:00Z,1.0\n")
    with pytest.raises(SchemaMismatch):
        load_csv(path, "household")


def test_gaps_reported_not_fatal(tmp_path):
    path = write(
        tmp_path,
        "timestamp,active_power_kw\n"
        "2024-01-01T00:00:00Z,1.0\n"
        "2024-01-01T01:00:00Z,1.0\n"
        "2024-01-01T03:00:00Z,1.0\n",
    )
    series = load_csv(path, "household")
    assert series.gaps == (1,)


def test_round_trip(tmp_path):
    path = write(
        tmp_path,
        "timestamp,active_power_kw\n"
        "2024-01-01T00:00:00Z,1.2345\n"
        "2024-01-01T01:00:00Z,0.6789\n",
    )
    series = load_csv(path, "household")
    out = tmp_path / "out.csv"
    write_csv(series, out, "household")
    reparsed = load_csv(out, "household")
    assert np.array_equal(series.timestamps, reparsed.timestamps)
    assert np.array_equal(series.values, reparsed.values)
    assert series.resolution == reparsed.resolution


def test_normalize_to_household_preserves_shape(tmp_path):
    path = write(
        tmp_path,
        "timestamp,load_mw\n"
        "2024-01-01T00:00:00Z,50000\n"
        "2024-01-01T01:00:00Z,60000\n",
        name="national.csv",
    )
    series = load_csv(path, "national")
    scaled = normalize_to_household(series, target_mean_kw=0.8)
    assert scaled.values.mean() == pytest.approx(0.8)
    assert scaled.values[1] / scaled.values[0] == pytest.approx(60000 / 50000)


def test_ecosystem_deterministic():
    a = gen_ecosystem(5, CFG.catalog, CFG.ecosystem)
    b = gen_ecosystem(5, CFG.catalog, CFG.ecosystem)
    for pa, pb in zip(a.prosumers, b.prosumers):
        assert np.array_equal(pa.series.values, pb.series.values)
    c = gen_ecosystem(6, CFG.catalog, CFG.ecosystem)
    assert not np.array_equal(a.prosumers[0].series.values, c.prosumers[0].series.values)


def test_ecosystem_shape_and_budgets():
    eco = gen_ecosystem(1, CFG.catalog, CFG.ecosystem)
    assert len(eco.prosumers) == 100
    for p in eco.prosumers:
        assert len(p.series) == 60 * 24
        assert np.all(p.series.values >= 0)
        assert p.ledger.h_max == 8.0
        assert p.ledger.h_remaining == 8.0


def test_city_series_reproducible_and_sized():
    oslo = DEFAULT_CITY_PROFILES["oslo"]
    a = gen_city_series(oslo, seed=3)
    b = gen_city_series(oslo, seed=3)
    assert np.array_equal(a.values, b.values)
    assert len(a) == 1440


def test_oslo_colder_than_rome():
    oslo = gen_city_series(CFG.cities["oslo"], seed=3)
    rome = gen_city_series(CFG.cities["rome"], seed=3)
    assert oslo.values.mean() > rome.values.mean()
