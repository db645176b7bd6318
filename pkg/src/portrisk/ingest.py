"""AIS broadcast ingestion: CSV parsing, validation, region filtering, grid-cell assignment.

Consumes the MarineCadastre daily CSV layout (mandatory columns MMSI,
BaseDateTime, LAT, LON, SOG, COG; optional VesselType, Status, Length,
Draft). Rows failing validation are counted and skipped, never silently
defaulted. Accepted records are restricted to the configured region and
date window and assigned to 0.1-degree grid cells by floor division.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

MANDATORY_COLUMNS = ("MMSI", "BaseDateTime", "LAT", "LON", "SOG", "COG")
OPTIONAL_COLUMNS = ("VesselType", "Status", "Length", "Draft")


@dataclass(frozen=True)
class RegionSpec:
    """Study region: bounding box, grid cell size, and date window.

    Bounds are half-open ([lat_min, lat_max) x [lon_min, lon_max)) so that
    every in-region point floors to a cell row/column inside the grid.
    """

    lat_min: float = 32.0
    lat_max: float = 35.0
    lon_min: float = -121.0
    lon_max: float = -117.0
    cell_size: float = 0.1
    date_start: date = date(2023, 1, 1)
    date_end: date = date(2023, 6, 30)

    def __post_init__(self) -> None:
        if not self.lat_min < self.lat_max:
            raise ValueError(f"lat_min must be < lat_max, got {self.lat_min}, {self.lat_max}")
        if not self.lon_min < self.lon_max:
            raise ValueError(f"lon_min must be < lon_max, got {self.lon_min}, {self.lon_max}")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.date_start > self.date_end:
            raise ValueError("date_start must not be after date_end")

    def contains(self, lat: float, lon: float) -> bool:
        return (self.lat_min <= lat < self.lat_max) and (self.lon_min <= lon < self.lon_max)

    def in_window(self, ts: datetime) -> bool:
        return self.date_start <= ts.date() <= self.date_end

    def to_dict(self) -> dict:
        return {
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
            "lon_min": self.lon_min,
            "lon_max": self.lon_max,
            "cell_size": self.cell_size,
            "date_start": self.date_start.isoformat(),
            "date_end": self.date_end.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        return cls(
            lat_min=float(d["lat_min"]),
            lat_max=float(d["lat_max"]),
            lon_min=float(d["lon_min"]),
            lon_max=float(d["lon_max"]),
            cell_size=float(d.get("cell_size", 0.1)),
            date_start=date.fromisoformat(d["date_start"]),
            date_end=date.fromisoformat(d["date_end"]),
        )


@dataclass(frozen=True, order=True)
class CellId:
    """Grid cell identity: floor(lat / cell_size), floor(lon / cell_size).

    Rendered as "<lat_idx>_<lon_idx>", e.g. (32.15, -119.45) at 0.1 degrees
    is "321_-1195". Ordering is lexicographic on (lat_idx, lon_idx), the
    tie-break order used throughout.
    """

    lat_idx: int
    lon_idx: int

    def render(self) -> str:
        return f"{self.lat_idx}_{self.lon_idx}"

    @classmethod
    def parse(cls, s: str) -> "CellId":
        parts = s.split("_")
        if len(parts) != 2:
            raise ValueError(f"malformed cell id: {s!r}")
        return cls(lat_idx=int(parts[0]), lon_idx=int(parts[1]))

    def centroid(self, cell_size: float) -> tuple[float, float]:
        return ((self.lat_idx + 0.5) * cell_size, (self.lon_idx + 0.5) * cell_size)


def assign_cell(lat: float, lon: float, region: RegionSpec) -> CellId:
    """Map a position to its grid cell by mathematical floor division.

    Floor (not truncation) so west longitudes index correctly:
    -117.001 / 0.1 floors to -1171. Points exactly on a grid line belong
    to the higher-index cell. Out-of-region input is a caller error.
    """
    if not region.contains(lat, lon):
        raise ValueError(f"position ({lat}, {lon}) outside region bounds")
    return CellId(
        lat_idx=math.floor(lat / region.cell_size),
        lon_idx=math.floor(lon / region.cell_size),
    )


@dataclass(frozen=True)
class AisRecord:
    """One validated AIS broadcast."""

    mmsi: int
    timestamp: datetime  # UTC
    lat: float
    lon: float
    sog: float  # knots
    cog: float | None  # degrees [0, 360); None when the field is empty
    vessel_type: int | None = None
    nav_status: int | None = None
    length: float | None = None
    draft: float | None = None

    def sort_key(self) -> tuple:
        return (self.timestamp, self.mmsi)


@dataclass
class IngestCounts:
    """Per-file accounting; rows always equals accepted + rejected."""

    path: str
    rows: int = 0
    accepted: int = 0
    rejected_malformed: int = 0
    rejected_out_of_region: int = 0
    rejected_out_of_window: int = 0

    @property
    def rejected(self) -> int:
        return self.rejected_malformed + self.rejected_out_of_region + self.rejected_out_of_window

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "rows": self.rows,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejected_malformed": self.rejected_malformed,
            "rejected_out_of_region": self.rejected_out_of_region,
            "rejected_out_of_window": self.rejected_out_of_window,
        }


def _parse_timestamp(raw: str) -> datetime | None:
    try:
        ts = datetime.fromisoformat(raw.strip())
    except ValueError:
        return None
    # BaseDateTime is UTC; attach the zone rather than converting.
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_optional_int(raw: str | None) -> int | None:
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(float(raw))
    except ValueError:
        return None  # garbage in an optional field must not sink the row


def _parse_optional_positive(raw: str | None) -> float | None:
    # Missing, empty, unparseable, or non-positive all mean "not reported":
    # MarineCadastre uses 0.0 for unknown length/draft and a zero draft would
    # corrupt the mean-draft feature.
    if raw is None or raw.strip() == "":
        return None
    try:
        v = float(raw)
    except ValueError:
        return None
    return v if v > 0 else None


def _parse_row(row: dict[str, str]) -> AisRecord | None:
    """Validate one CSV row; None when any mandatory field is unusable."""
    try:
        mmsi = int(row["MMSI"].strip())
        lat = float(row["LAT"])
        lon = float(row["LON"])
        sog = float(row["SOG"])
    except (ValueError, AttributeError):
        return None
    ts = _parse_timestamp(row["BaseDateTime"])
    if ts is None:
        return None
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    if not sog >= 0.0:
        return None
    cog_raw = row["COG"]
    cog: float | None
    if cog_raw is None or cog_raw.strip() == "":
        cog = None
    else:
        try:
            cog = float(cog_raw)
        except ValueError:
            return None
        if not (0.0 <= cog < 360.0):
            return None
    return AisRecord(
        mmsi=mmsi,
        timestamp=ts,
        lat=lat,
        lon=lon,
        sog=sog,
        cog=cog,
        vessel_type=_parse_optional_int(row.get("VesselType")),
        nav_status=_parse_optional_int(row.get("Status")),
        length=_parse_optional_positive(row.get("Length")),
        draft=_parse_optional_positive(row.get("Draft")),
    )


def parse_ais_csv(path: str | Path, region: RegionSpec) -> tuple[list[AisRecord], IngestCounts]:
    """Parse one AIS CSV file, keeping only valid, in-region, in-window rows.

    Raises FileNotFoundError for a missing file and ValueError naming the
    column when a mandatory header is absent. Malformed rows are counted
    and skipped.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"AIS input file not found: {path}")
    counts = IngestCounts(path=str(path))
    records: list[AisRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in MANDATORY_COLUMNS:
            if col not in header:
                raise ValueError(f"mandatory column missing from {path}: {col}")
        for row in reader:
            counts.rows += 1
            rec = _parse_row(row)
            if rec is None:
                counts.rejected_malformed += 1
                continue
            if not region.contains(rec.lat, rec.lon):
                counts.rejected_out_of_region += 1
                continue
            if not region.in_window(rec.timestamp):
                counts.rejected_out_of_window += 1
                continue
            records.append(rec)
            counts.accepted += 1
    return records, counts


def ingest_files(
    paths: Iterable[str | Path], region: RegionSpec
) -> tuple[list[AisRecord], list[IngestCounts]]:
    """Parse many files and merge into the canonical (timestamp, mmsi) order."""
    all_records: list[AisRecord] = []
    all_counts: list[IngestCounts] = []
    for p in sorted(str(p) for p in paths):
        recs, cnt = parse_ais_csv(p, region)
        all_records.extend(recs)
        all_counts.append(cnt)
    all_records.sort(key=AisRecord.sort_key)
    return all_records, all_counts


def write_records_csv(records: Sequence[AisRecord], path: str | Path) -> None:
    """Export records in the same column layout the parser consumes.

    COG is quantized to one decimal and wrapped so 359.96 renders as 0.0,
    keeping every exported row re-parseable.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(MANDATORY_COLUMNS) + list(OPTIONAL_COLUMNS))
        for r in records:
            cog = "" if r.cog is None else f"{round(r.cog, 1) % 360.0:.1f}"
            writer.writerow(
                [
                    r.mmsi,
                    r.timestamp.strftime("%Y-%m-%dT%H:%M:%S"),
                    f"{r.lat:.5f}",
                    f"{r.lon:.5f}",
                    f"{r.sog:.1f}",
                    cog,
                    "" if r.vessel_type is None else r.vessel_type,
                    "" if r.nav_status is None else r.nav_status,
                    "" if r.length is None else f"{r.length:.1f}",
                    "" if r.draft is None else f"{r.draft:.1f}",
                ]
            )
