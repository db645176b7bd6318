"""Parser validation, region filtering, and grid-cell assignment."""

from __future__ import annotations

import random
from datetime import date
from pathlib import Path

import pytest

from portrisk.ingest import (
    AisRecord,
    CellId,
    IngestCounts,
    RegionSpec,
    assign_cell,
    ingest_files,
    parse_ais_csv,
    write_records_csv,
)

HEADER = "MMSI,BaseDateTime,LAT,LON,SOG,COG,VesselType,Status,Length,Draft"


def write_csv(path: Path, rows: list[str], header: str = HEADER) -> Path:
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


def default_region() -> RegionSpec:
    return RegionSpec(date_start=date(2023, 1, 1), date_end=date(2023, 1, 31))


class TestAssignCell:
    def test_rendered_id_for_westward_longitude(self):
        cell = assign_cell(32.15, -119.45, default_region())
        assert cell.render() == "321_-1195"

    def test_boundary_point_goes_to_higher_index_cell(self):
        cell = assign_cell(33.00, -118.00, default_region())
        assert cell.render() == "330_-1180"

    def test_floor_semantics_near_upper_corner(self):
        # floor(34.999/0.1) = 349, floor(-117.001/0.1) = -1171
        cell = assign_cell(34.999, -117.001, default_region())
        assert (cell.lat_idx, cell.lon_idx) == (349, -1171)

    def test_out_of_region_is_an_error(self):
        with pytest.raises(ValueError):
            assign_cell(40.0, -118.0, default_region())

    def test_render_parse_round_trip(self):
        rng = random.Random(7)
        for _ in range(200):
            cell = CellId(rng.randint(-900, 900), rng.randint(-1800, 1800))
            assert CellId.parse(cell.render()) == cell


class TestParseAisCsv:
    def test_valid_in_window_row_accepted(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,33.70000,-118.20000,0.1,121.0,70,0,250.0,12.0"],
        )
        records, counts = parse_ais_csv(path, default_region())
        assert len(records) == 1
        rec = records[0]
        assert rec.mmsi == 367000001
        assert rec.sog == 0.1
        assert rec.vessel_type == 70
        assert counts.accepted == 1 and counts.rejected == 0

    def test_out_of_region_row_counted(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,40.00000,-118.20000,5.0,121.0,,,,"],
        )
        records, counts = parse_ais_csv(path, default_region())
        assert records == []
        assert counts.rejected_out_of_region == 1

    def test_empty_sog_is_malformed(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,33.70000,-118.20000,,121.0,,,,"],
        )
        records, counts = parse_ais_csv(path, default_region())
        assert records == []
        assert counts.rejected_malformed == 1

    def test_unparseable_timestamp_rejected(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,not-a-date,33.70000,-118.20000,1.0,121.0,,,,"],
        )
        _, counts = parse_ais_csv(path, default_region())
        assert counts.rejected_malformed == 1

    def test_out_of_window_row_counted(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-03-05T14:03:00,33.70000,-118.20000,1.0,121.0,,,,"],
        )
        _, counts = parse_ais_csv(path, default_region())
        assert counts.rejected_out_of_window == 1

    def test_missing_mandatory_column_is_fatal(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,33.7,-118.2,1.0"],
            header="MMSI,BaseDateTime,LAT,LON,SOG",
        )
        with pytest.raises(ValueError, match="COG"):
            parse_ais_csv(path, default_region())

    def test_missing_file_is_fatal(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_ais_csv(tmp_path / "nope.csv", default_region())

    def test_empty_optionals_are_absent_not_zero(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,33.70000,-118.20000,1.0,121.0,,,,"],
        )
        records, _ = parse_ais_csv(path, default_region())
        rec = records[0]
        assert rec.vessel_type is None
        assert rec.nav_status is None
        assert rec.length is None
        assert rec.draft is None

    def test_zero_draft_treated_as_unreported(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            ["367000001,2023-01-05T14:03:00,33.70000,-118.20000,1.0,121.0,70,0,0.0,0.0"],
        )
        records, _ = parse_ais_csv(path, default_region())
        assert records[0].length is None
        assert records[0].draft is None

    def test_empty_cog_is_absent_but_invalid_cog_rejects(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            [
                "367000001,2023-01-05T14:03:00,33.70000,-118.20000,1.0,,,,,",
                "367000002,2023-01-05T14:03:00,33.70000,-118.20000,1.0,361.0,,,,",
            ],
        )
        records, counts = parse_ais_csv(path, default_region())
        assert len(records) == 1
        assert records[0].cog is None
        assert counts.rejected_malformed == 1

    def test_totals_property_over_random_rows(self, tmp_path):
        rng = random.Random(11)
        region = default_region()
        rows = []
        for i in range(400):
            kind = rng.random()
            if kind < 0.5:  # valid, in region and window
                lat = rng.uniform(32.0, 34.999)
                lon = rng.uniform(-121.0, -117.001)
                day = rng.randint(1, 31)
            elif kind < 0.7:  # out of region
                lat = rng.uniform(36.0, 50.0)
                lon = rng.uniform(-121.0, -117.001)
                day = rng.randint(1, 31)
            elif kind < 0.85:  # out of window
                lat = rng.uniform(32.0, 34.999)
                lon = rng.uniform(-121.0, -117.001)
                day = None
            else:  # malformed speed
                rows.append(f"36700{i:04d},2023-01-10T00:00:00,33.5,-118.5,,10.0,,,,")
                continue
            ts = f"2023-01-{day:02d}T12:00:00" if day else "2023-02-15T12:00:00"
            rows.append(f"36700{i:04d},{ts},{lat:.5f},{lon:.5f},3.0,10.0,,,,")
        path = write_csv(tmp_path / "mix.csv", rows)
        records, counts = parse_ais_csv(path, region)
        assert counts.rows == 400
        assert counts.accepted + counts.rejected == counts.rows
        assert counts.accepted == len(records)
        for rec in records:
            assert region.contains(rec.lat, rec.lon)
            assert region.in_window(rec.timestamp)

    def test_merge_canonical_order(self, tmp_path):
        a = write_csv(
            tmp_path / "a.csv",
            [
                "367000002,2023-01-05T14:00:00,33.70000,-118.20000,1.0,10.0,,,,",
                "367000001,2023-01-05T14:00:00,33.70000,-118.20000,1.0,10.0,,,,",
            ],
        )
        b = write_csv(
            tmp_path / "b.csv",
            ["367000003,2023-01-05T13:00:00,33.70000,-118.20000,1.0,10.0,,,,"],
        )
        records, counts = ingest_files([a, b], default_region())
        assert [r.mmsi for r in records] == [367000003, 367000001, 367000002]
        assert sum(c.accepted for c in counts) == 3


def test_normalized_export_reparses_identically(tmp_path):
    region = default_region()
    rows = [
        "367000001,2023-01-05T14:03:00,33.70000,-118.20000,0.1,359.9,80,1,180.0,9.5",
        "367000002,2023-01-06T02:00:00,32.15000,-119.45000,7.5,,,,,",
    ]
    records, _ = parse_ais_csv(write_csv(tmp_path / "in.csv", rows), region)
    out = tmp_path / "normalized.csv"
    write_records_csv(records, out)
    replayed, counts = parse_ais_csv(out, region)
    assert counts.accepted == len(records)
    assert replayed == records
