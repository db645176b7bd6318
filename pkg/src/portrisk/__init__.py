"""Congestion-risk early warning for maritime grid cells.

Pipeline: AIS ingestion -> daily graph snapshots -> attention-based risk
model -> per-node evidence records -> narrative risk reports -> directional
consistency audit.
"""

from .ingest import AisRecord, CellId, IngestCounts, RegionSpec, assign_cell, parse_ais_csv
from .metrics import EvalReport, average_precision, roc_auc, thresholded_scores
from .models import ModelConfig, load_checkpoint, save_checkpoint
from .snapshots import (
    FEATURE_NAMES,
    DailySnapshot,
    SplitAssignment,
    chronological_split,
    point_biserial,
)
from .synth import SynthConfig, generate_synthetic_ais
from .training import TrainConfig, TrainedModel, select_threshold, train_model, weighted_bce

__all__ = [
    "AisRecord",
    "CellId",
    "DailySnapshot",
    "EvalReport",
    "FEATURE_NAMES",
    "IngestCounts",
    "ModelConfig",
    "RegionSpec",
    "SplitAssignment",
    "SynthConfig",
    "TrainConfig",
    "TrainedModel",
    "assign_cell",
    "average_precision",
    "chronological_split",
    "generate_synthetic_ais",
    "load_checkpoint",
    "parse_ais_csv",
    "point_biserial",
    "roc_auc",
    "save_checkpoint",
    "select_threshold",
    "thresholded_scores",
    "train_model",
    "weighted_bce",
]
