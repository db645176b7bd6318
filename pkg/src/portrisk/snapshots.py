"""Daily graph snapshots: per-cell features, escalation labels, normalization, kNN edges.

One snapshot per UTC day over the active cells (cells with at least one
broadcast). Days with fewer than ten active cells are discarded. Features
are z-scored per snapshot across active nodes; the escalation label is 1
iff a cell's raw slow ratio strictly increases on the next snapshot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import AisRecord, CellId, RegionSpec, assign_cell

FEATURE_NAMES = (
    "mean_sog",
    "std_sog",
    "slow_ratio",
    "anchor_ratio",
    "vessel_count",
    "cargo_ratio",
    "tanker_ratio",
    "mean_length",
    "mean_draft",
    "cog_variance",
)

SLOW_SOG_KNOTS = 2.0  # slow-vessel threshold
ANCHOR_FALLBACK_SOG_KNOTS = 0.2  # anchor proxy when nav status is unreported
MIN_ACTIVE_NODES = 10
DEGENERATE_STD = 1e-12

SNAPSHOT_FORMAT_VERSION = 1


def compute_cell_features(records: Sequence[AisRecord]) -> np.ndarray:
    """Aggregate one cell-day's broadcasts into the 10-feature vector.

    Anchor flag per broadcast: navigational status 1 ("at anchor") when the
    status is reported, otherwise SOG below 0.2 knots (distinct from the
    2-knot slow threshold). Cargo/tanker ratios are over distinct vessels
    with a known ship-type code (70-79 cargo, 80-89 tanker). Mean length,
    mean draft, and course variance fall back to 0 when no broadcast
    reports the field.
    """
    if not records:
        raise ValueError("cannot compute features for an empty cell-day")
    sog = np.array([r.sog for r in records], dtype=np.float64)
    mean_sog = float(sog.mean())
    std_sog = float(sog.std())  # population convention throughout
    slow_ratio = float((sog < SLOW_SOG_KNOTS).mean())
    anchored = [
        (r.nav_status == 1) if r.nav_status is not None else (r.sog < ANCHOR_FALLBACK_SOG_KNOTS)
        for r in records
    ]
    anchor_ratio = float(np.mean(anchored))

    first_type: dict[int, int] = {}
    mmsis = set()
    for r in records:
        mmsis.add(r.mmsi)
        if r.vessel_type is not None and r.mmsi not in first_type:
            first_type[r.mmsi] = r.vessel_type
    vessel_count = float(len(mmsis))
    typed = len(first_type)
    cargo_ratio = (
        sum(1 for t in first_type.values() if 70 <= t <= 79) / typed if typed else 0.0
    )
    tanker_ratio = (
        sum(1 for t in first_type.values() if 80 <= t <= 89) / typed if typed else 0.0
    )

    lengths = [r.length for r in records if r.length is not None]
    drafts = [r.draft for r in records if r.draft is not None]
    mean_length = float(np.mean(lengths)) if lengths else 0.0
    mean_draft = float(np.mean(drafts)) if drafts else 0.0

    cogs = np.array([r.cog for r in records if r.cog is not None], dtype=np.float64)
    if cogs.size:
        rad = np.deg2rad(cogs)
        # 1 - mean resultant length of the unit course vectors
        cog_variance = 1.0 - math.hypot(float(np.cos(rad).mean()), float(np.sin(rad).mean()))
    else:
        cog_variance = 0.0

    return np.array(
        [
            mean_sog,
            std_sog,
            slow_ratio,
            anchor_ratio,
            vessel_count,
            cargo_ratio,
            tanker_ratio,
            mean_length,
            mean_draft,
            cog_variance,
        ],
        dtype=np.float64,
    )


def zscore_normalize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise (x - mean) / std over the snapshot's active nodes.

    Population std. Columns with std below 1e-12 normalize to all zeros
    and record std = 0 in the stats.
    """
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise ValueError("z-score normalization needs at least two active nodes")
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    degenerate = std < DEGENERATE_STD
    std = np.where(degenerate, 0.0, std)
    safe = np.where(degenerate, 1.0, std)
    z = (raw - mean) / safe
    z[:, degenerate] = 0.0
    return z, mean, std


def build_knn_edges(nodes: Sequence[CellId], cell_size: float, k: int = 8) -> np.ndarray:
    """Directed kNN edges (src, dst): each node receives from its min(k, V-1)
    nearest other cell centroids, Euclidean in degrees, ties broken by the
    candidate's (lat_idx, lon_idx) order. No self-edges, no duplicates.
    """
    n = len(nodes)
    if n < 2:
        raise ValueError("kNN graph needs at least two nodes")
    cent = np.array([c.centroid(cell_size) for c in nodes], dtype=np.float64)
    # Canonical candidate rank: index order after sorting nodes by CellId.
    canon_rank = np.empty(n, dtype=np.int64)
    canon_rank[np.lexsort(([c.lon_idx for c in nodes], [c.lat_idx for c in nodes]))] = np.arange(n)
    kk = min(k, n - 1)
    edges: list[tuple[int, int]] = []
    d2 = ((cent[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
    for i in range(n):
        di = d2[i].copy()
        di[i] = np.inf
        picked = np.lexsort((canon_rank, di))[:kk]
        edges.extend((int(j), i) for j in picked)
    arr = np.array(edges, dtype=np.int64)
    return arr[np.lexsort((arr[:, 0], arr[:, 1]))]


@dataclass
class DailySnapshot:
    """One day's graph over active cells.

    edges rows are (src, dst) node indices: dst receives from src.
    labels is None for the final (unlabelable) snapshot.
    """

    date: date
    nodes: list[CellId]
    raw_features: np.ndarray  # (V, 10)
    z_features: np.ndarray  # (V, 10)
    feature_mean: np.ndarray  # (10,)
    feature_std: np.ndarray  # (10,)
    edges: np.ndarray  # (E, 2) int
    labels: np.ndarray | None = None  # (V,) int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node_index(self) -> dict[CellId, int]:
        return {c: i for i, c in enumerate(self.nodes)}


def build_daily_snapshots(
    records: Sequence[AisRecord],
    region: RegionSpec,
    k: int = 8,
    min_nodes: int = MIN_ACTIVE_NODES,
) -> list[DailySnapshot]:
    """Group records into per-day snapshots with features, z-scores, and edges.

    Labels are not assigned here; run compute_labels on the result.
    """
    by_day_cell: dict[date, dict[CellId, list[AisRecord]]] = {}
    for rec in records:
        cell = assign_cell(rec.lat, rec.lon, region)
        by_day_cell.setdefault(rec.timestamp.date(), {}).setdefault(cell, []).append(rec)

    snapshots: list[DailySnapshot] = []
    for day in sorted(by_day_cell):
        cells = by_day_cell[day]
        if len(cells) < min_nodes:
            continue
        nodes = sorted(cells)
        raw = np.stack([compute_cell_features(cells[c]) for c in nodes])
        z, mean, std = zscore_normalize(raw)
        edges = build_knn_edges(nodes, region.cell_size, k=k)
        snapshots.append(
            DailySnapshot(
                date=day,
                nodes=nodes,
                raw_features=raw,
                z_features=z,
                feature_mean=mean,
                feature_std=std,
                edges=edges,
            )
        )
    return snapshots


SLOW_RATIO_COL = FEATURE_NAMES.index("slow_ratio")


def compute_labels(snapshots: Sequence[DailySnapshot]) -> list[DailySnapshot]:
    """Assign next-snapshot escalation labels in place.

    y = 1 iff the cell is active on the following snapshot and its raw slow
    ratio strictly increases; cells that go inactive get 0. The final
    snapshot carries no labels and is excluded from supervised use.
    """
    dates = [s.date for s in snapshots]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValueError("snapshots must be in strictly increasing date order")
    out = list(snapshots)
    for t in range(len(out) - 1):
        cur, nxt = out[t], out[t + 1]
        nxt_slow = {c: nxt.raw_features[i, SLOW_RATIO_COL] for i, c in enumerate(nxt.nodes)}
        labels = np.zeros(cur.n_nodes, dtype=np.int64)
        for i, c in enumerate(cur.nodes):
            if c in nxt_slow and nxt_slow[c] > cur.raw_features[i, SLOW_RATIO_COL]:
                labels[i] = 1
        cur.labels = labels
    if out:
        out[-1].labels = None
    return out


@dataclass(frozen=True)
class SplitAssignment:
    """Contiguous chronological index ranges over labeled snapshots."""

    train: range
    val: range
    test: range

    def to_dict(self) -> dict:
        return {
            "train": [self.train.start, self.train.stop],
            "val": [self.val.start, self.val.stop],
            "test": [self.test.start, self.test.stop],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        return cls(
            train=range(d["train"][0], d["train"][1]),
            val=range(d["val"][0], d["val"][1]),
            test=range(d["test"][0], d["test"][1]),
        )


def chronological_split(
    n_snapshots: int, fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
) -> SplitAssignment:
    """Split n labeled snapshots chronologically into train/val/test.

    train = floor(f_train * n), val = floor(f_val * n), test = remainder;
    when the val share floors to zero, train donates one snapshot. Sizes
    are computed in exact integer arithmetic so e.g. n = 89 always yields
    62/13/14. Any empty partition is fatal.
    """
    if n_snapshots < 3:
        raise ValueError("need at least 3 labeled snapshots to split")
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError(f"split fractions must be nonnegative and sum to 1, got {fractions}")
    scale = 10**6
    n_train = (round(f_train * scale) * n_snapshots) // scale
    n_val = (round(f_val * scale) * n_snapshots) // scale
    if n_val == 0:
        n_train -= 1
        n_val = 1
    n_test = n_snapshots - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError(
            f"split of {n_snapshots} snapshots leaves an empty partition "
            f"({n_train}/{n_val}/{n_test})"
        )
    return SplitAssignment(
        train=range(0, n_train),
        val=range(n_train, n_train + n_val),
        test=range(n_train + n_val, n_snapshots),
    )


def point_biserial(values: Sequence[float], labels: Sequence[int]) -> float:
    """Point-biserial correlation (M1 - M0) / s * sqrt(n1 * n0 / n^2).

    s is the population standard deviation of all values. Both classes must
    be present. A zero-variance feature has no association; returns 0.
    """
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("values and labels must be equal-length 1-d sequences, n >= 2")
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("point-biserial correlation undefined for single-class labels")
    s = float(x.std())
    if s < DEGENERATE_STD:
        return 0.0
    m1 = float(x[y == 1].mean())
    m0 = float(x[y == 0].mean())
    n = x.size
    return (m1 - m0) / s * math.sqrt(n1 * n0 / (n * n))


def correlation_table(snapshots: Sequence[DailySnapshot]) -> dict[str, float]:
    """Dataset-level point-biserial correlation of each feature with the label,
    over all labeled node-days (raw feature values).
    """
    labeled = [s for s in snapshots if s.labels is not None]
    if not labeled:
        raise ValueError("no labeled snapshots")
    feats = np.concatenate([s.raw_features for s in labeled], axis=0)
    labels = np.concatenate([s.labels for s in labeled], axis=0)
    return {
        name: point_biserial(feats[:, j], labels) for j, name in enumerate(FEATURE_NAMES)
    }


# ---------------------------------------------------------------------------
# Snapshot store: one JSON document per day plus a manifest.


def snapshot_to_dict(s: DailySnapshot) -> dict:
    return {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "date": s.date.isoformat(),
        "feature_names": list(FEATURE_NAMES),
        "nodes": [c.render() for c in s.nodes],
        "raw_features": s.raw_features.tolist(),
        "z_features": s.z_features.tolist(),
        "stats": {"mean": s.feature_mean.tolist(), "std": s.feature_std.tolist()},
        "edges": s.edges.tolist(),
        "labels": None if s.labels is None else s.labels.tolist(),
    }


def snapshot_from_dict(d: dict) -> DailySnapshot:
    if d.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format version: {d.get('format_version')}")
    if tuple(d["feature_names"]) != FEATURE_NAMES:
        raise ValueError("snapshot feature ordering does not match this build")
    labels = d.get("labels")
    return DailySnapshot(
        date=date.fromisoformat(d["date"]),
        nodes=[CellId.parse(s) for s in d["nodes"]],
        raw_features=np.asarray(d["raw_features"], dtype=np.float64),
        z_features=np.asarray(d["z_features"], dtype=np.float64),
        feature_mean=np.asarray(d["stats"]["mean"], dtype=np.float64),
        feature_std=np.asarray(d["stats"]["std"], dtype=np.float64),
        edges=np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2),
        labels=None if labels is None else np.asarray(labels, dtype=np.int64),
    )


def save_store(
    snapshots: Sequence[DailySnapshot],
    store_dir: str | Path,
    region: RegionSpec,
    k: int,
    correlations: dict[str, float] | None = None,
) -> None:
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in snapshots:
        fname = f"snapshot_{s.date.isoformat()}.json"
        (store / fname).write_text(
            json.dumps(snapshot_to_dict(s), sort_keys=True), encoding="utf-8"
        )
        entries.append({"date": s.date.isoformat(), "file": fname})
    manifest = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "region": region.to_dict(),
        "k": k,
        "snapshots": entries,
    }
    (store / "manifest.json").write_text(json.dumps(manifest, sort_keys=True), encoding="utf-8")
    if correlations is not None:
        (store / "correlations.json").write_text(
            json.dumps(correlations, sort_keys=True), encoding="utf-8"
        )


def load_store(store_dir: str | Path) -> tuple[list[DailySnapshot], dict]:
    store = Path(store_dir)
    manifest_path = store / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"snapshot store manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    snaps = []
    for entry in manifest["snapshots"]:
        snaps.append(
            snapshot_from_dict(json.loads((store / entry["file"]).read_text(encoding="utf-8")))
        )
    return snaps, manifest


def load_correlations(store_dir: str | Path) -> dict[str, float]:
    path = Path(store_dir) / "correlations.json"
    if not path.is_file():
        raise FileNotFoundError(f"correlation table not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))
