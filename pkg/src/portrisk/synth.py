"""Synthetic multi-day AIS traffic with plantable congestion dynamics.

A latent per-cell congestion intensity evolves by decay, neighbor
averaging (the diffusion_rate knob), and sawtooth re-injection at the
configured congestion centers, so that a cell's next-day rise in slow
traffic is statistically predictable from its own state plus its
neighbors' state. Vessel kinematics are sampled from that field: high
intensity depresses speed over ground, raises anchoring, and scatters
course headings. Output uses the same CSV layout as the real archive so
the synthetic path exercises the production parser end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .ingest import AisRecord, RegionSpec, write_records_csv

# Source episodes ramp for RAMP_PERIOD days then reset; most congested
# cell-days are therefore on an upswing, which keeps the slow-ratio /
# escalation correlation positive like real port traffic.
RAMP_PERIOD = 8
DECAY = 0.18
NOISE_STD = 0.012
MAX_INTENSITY = 0.8

CARGO_TYPES = tuple(range(70, 80))
TANKER_TYPES = tuple(range(80, 90))
OTHER_TYPES = (30, 31, 36, 52, 60, 69)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_days: int = 45
    n_vessels: int = 240
    region: RegionSpec = field(
        default_factory=lambda: RegionSpec(
            lat_min=33.0, lat_max=33.6, lon_min=-118.6, lon_max=-118.0
        )
    )
    congestion_centers: tuple[tuple[float, float, float], ...] = (
        (33.25, -118.45, 0.8),
        (33.45, -118.15, 0.7),
    )
    diffusion_rate: float = 0.35
    broadcasts_per_vessel: int = 12

    def __post_init__(self) -> None:
        if self.n_days < 3:
            raise ValueError("n_days must be >= 3 (labeling consumes one day)")
        if self.n_vessels < 1:
            raise ValueError("n_vessels must be >= 1")
        if not 0.0 <= self.diffusion_rate <= 1.0:
            raise ValueError("diffusion_rate must lie in [0, 1]")
        lat_span = self.region.lat_max - self.region.lat_min
        lon_span = self.region.lon_max - self.region.lon_min
        if lat_span < self.region.cell_size or lon_span < self.region.cell_size:
            raise ValueError("region too small to hold a single grid cell")
        if self.region.date_start + timedelta(days=self.n_days - 1) > self.region.date_end:
            raise ValueError("region date window too short for n_days")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_days": self.n_days,
            "n_vessels": self.n_vessels,
            "region": self.region.to_dict(),
            "congestion_centers": [list(c) for c in self.congestion_centers],
            "diffusion_rate": self.diffusion_rate,
            "broadcasts_per_vessel": self.broadcasts_per_vessel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        kwargs = dict(d)
        if "region" in kwargs:
            kwargs["region"] = RegionSpec.from_dict(kwargs["region"])
        if "congestion_centers" in kwargs:
            kwargs["congestion_centers"] = tuple(
                tuple(float(x) for x in c) for c in kwargs["congestion_centers"]
            )
        return cls(**kwargs)


def _grid_shape(region: RegionSpec) -> tuple[int, int]:
    rows = int(round((region.lat_max - region.lat_min) / region.cell_size))
    cols = int(round((region.lon_max - region.lon_min) / region.cell_size))
    return max(rows, 1), max(cols, 1)


def _neighbor_mean(lam: np.ndarray) -> np.ndarray:
    """Mean over the 4-neighborhood, edge cells averaging what they have."""
    total = np.zeros_like(lam)
    count = np.zeros_like(lam)
    total[1:, :] += lam[:-1, :]
    count[1:, :] += 1
    total[:-1, :] += lam[1:, :]
    count[:-1, :] += 1
    total[:, 1:] += lam[:, :-1]
    count[:, 1:] += 1
    total[:, :-1] += lam[:, 1:]
    count[:, :-1] += 1
    return total / count


def _intensity_series(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Latent congestion field per day, shape (n_days, rows, cols)."""
    rows, cols = _grid_shape(cfg.region)
    region = cfg.region
    centers = []
    for i, (lat, lon, intensity) in enumerate(cfg.congestion_centers):
        r = int((lat - region.lat_min) / region.cell_size)
        c = int((lon - region.lon_min) / region.cell_size)
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"congestion center {i} lies outside the region")
        centers.append((r, c, float(intensity), i * 3))  # staggered episode phases
    lam = np.zeros((rows, cols), dtype=np.float64)
    out = np.zeros((cfg.n_days, rows, cols), dtype=np.float64)
    rho = cfg.diffusion_rate
    for d in range(cfg.n_days):
        lam = (1.0 - DECAY) * lam
        lam = (1.0 - rho) * lam + rho * _neighbor_mean(lam)
        for r, c, intensity, phase in centers:
            ramp = ((d + phase) % RAMP_PERIOD + 1) / RAMP_PERIOD
            lam[r, c] = min(MAX_INTENSITY, lam[r, c] + intensity * ramp * 0.6)
        lam = lam + rng.normal(0.0, NOISE_STD, size=lam.shape)
        lam = np.clip(lam, 0.0, MAX_INTENSITY)
        out[d] = lam
    return out


@dataclass
class _Vessel:
    mmsi: int
    vessel_type: int | None
    length: float | None
    draft: float | None
    heading: float  # preferred lane heading, degrees


def _make_fleet(cfg: SynthConfig, rng: np.random.Generator) -> list[_Vessel]:
    fleet = []
    for v in range(cfg.n_vessels):
        u = rng.random()
        if u < 0.06:
            vtype = None
        elif u < 0.51:
            vtype = int(rng.choice(CARGO_TYPES))
        elif u < 0.69:
            vtype = int(rng.choice(TANKER_TYPES))
        else:
            vtype = int(rng.choice(OTHER_TYPES))
        if vtype is not None and 70 <= vtype <= 89:
            length = float(rng.uniform(120.0, 300.0))
            draft = float(rng.uniform(7.0, 15.0))
        else:
            length = float(rng.uniform(15.0, 90.0))
            draft = float(rng.uniform(2.0, 7.0))
        if rng.random() < 0.05:
            length = None
        if rng.random() < 0.05:
            draft = None
        fleet.append(
            _Vessel(
                mmsi=367_000_000 + v,
                vessel_type=vtype,
                length=length,
                draft=draft,
                heading=float(rng.uniform(0.0, 360.0)),
            )
        )
    return fleet


def generate_synthetic_ais(cfg: SynthConfig) -> list[AisRecord]:
    """Deterministic record stream; identical config means identical output."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    region = cfg.region
    rows, cols = _grid_shape(region)
    intensity = _intensity_series(cfg, rng)
    fleet = _make_fleet(cfg, rng)
    day0 = datetime.combine(region.date_start, datetime.min.time(), tzinfo=timezone.utc)

    records: list[AisRecord] = []
    cell_flat = np.arange(rows * cols)
    for d in range(cfg.n_days):
        lam = intensity[d]
        # congested cells attract more traffic (queueing), which also
        # concentrates observations where the signal lives
        weights = (0.35 + 2.5 * lam).ravel()
        probs = weights / weights.sum()
        day_start = day0 + timedelta(days=d)
        for vessel in fleet:
            cell = int(rng.choice(cell_flat, p=probs))
            r, c = divmod(cell, cols)
            lam_here = float(lam[r, c])
            n_b = cfg.broadcasts_per_vessel
            seconds = np.sort(rng.integers(0, 86400, size=n_b))
            for s in seconds:
                lat = region.lat_min + (r + rng.uniform(0.05, 0.95)) * region.cell_size
                lon = region.lon_min + (c + rng.uniform(0.05, 0.95)) * region.cell_size
                u = rng.random()
                p_anchor = 0.05 + 0.5 * lam_here
                p_slow = 0.08 + 0.55 * lam_here
                if u < p_anchor:
                    nav_status = 1
                    sog = float(rng.uniform(0.0, 0.14))
                    cog = float(rng.uniform(0.0, 359.9))
                elif u < p_anchor + p_slow:
                    nav_status = 0
                    sog = float(rng.uniform(0.3, 1.9))
                    cog = float(rng.uniform(0.0, 359.9))
                else:
                    nav_status = 0
                    sog = float(rng.uniform(5.0, 14.0))
                    cog = (vessel.heading + float(rng.normal(0.0, 9.0))) % 360.0
                if rng.random() < 0.1:
                    nav_status = None
                records.append(
                    AisRecord(
                        mmsi=vessel.mmsi,
                        timestamp=day_start + timedelta(seconds=int(s)),
                        lat=float(lat),
                        lon=float(lon),
                        sog=round(sog, 1),
                        cog=round(cog, 1) % 360.0,
                        vessel_type=vessel.vessel_type,
                        nav_status=nav_status,
                        length=vessel.length,
                        draft=vessel.draft,
                    )
                )
    return records


def write_synthetic_csv(cfg: SynthConfig, path: str | Path) -> int:
    """Generate and write the archive-layout CSV; returns the record count."""
    records = generate_synthetic_ais(cfg)
    write_records_csv(records, path)
    return len(records)
