"""Training loop: class-weighted cross-entropy, Adam, chronological epochs,
best-validation-AUC checkpointing, and F1-optimal threshold selection.

One epoch is one chronological pass over the training snapshots with one
gradient step per snapshot. The temporal model carries each snapshot's
embeddings forward as detached prior-state inputs; validation is always
warm-started by replaying the training snapshots without gradients so the
sequence is never reset mid-stream. Test snapshots are never read here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .metrics import roc_auc, thresholded_scores
from .models import (
    ForwardResult,
    ModelConfig,
    compute_gradients,
    init_params,
    model_forward,
    wrap_params,
)
from .snapshots import DailySnapshot, SplitAssignment

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "tgat"
    epochs_max: int = 50
    lr: float = 1e-3
    weight_decay: float = 1e-4
    pos_weight: float | str = 6.74  # "auto" = (1 - pi) / pi on the train split
    hidden: int = 128
    n_heads: int = 4
    mlp_hidden: int = 128
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs_max < 1:
            raise ValueError("epochs_max must be >= 1")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay nonnegative")
        if isinstance(self.pos_weight, str):
            if self.pos_weight != "auto":
                raise ValueError(f"pos_weight must be positive or 'auto', got {self.pos_weight!r}")
        elif not self.pos_weight > 0:
            raise ValueError("pos_weight must be positive")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            kind=self.model_kind,
            hidden=self.hidden,
            n_heads=self.n_heads,
            mlp_hidden=self.mlp_hidden,
            dropout=self.dropout,
        )

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "epochs_max": self.epochs_max,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "pos_weight": self.pos_weight,
            "hidden": self.hidden,
            "n_heads": self.n_heads,
            "mlp_hidden": self.mlp_hidden,
            "dropout": self.dropout,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def weighted_bce(probs: Tensor, labels: np.ndarray, pos_weight: float) -> Tensor:
    """Mean of -[w*y*log(p) + (1-y)*log(1-p)], p clamped to (1e-12, 1-1e-12)."""
    y = np.asarray(labels, dtype=np.float64)
    if probs.data.shape != y.shape:
        raise ValueError(
            f"probability/label length mismatch: {probs.data.shape} vs {y.shape}"
        )
    p = probs.clip(PROB_CLAMP, 1.0 - PROB_CLAMP)
    one = Tensor(np.ones_like(y))
    pos_term = Tensor(pos_weight * y) * p.log()
    neg_term = Tensor(1.0 - y) * (one - p).log()
    return -(pos_term + neg_term).mean()


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float,
) -> None:
    """In-place Adam update with bias correction.

    Weight decay is the additive lr * wd * theta shrinkage term, applied
    alongside (not inside) the moment update.
    """
    state.t += 1
    t = state.t
    for name, theta in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if weight_decay:
            theta -= lr * weight_decay * theta


def select_threshold(val_probs, val_labels) -> float:
    """F1-maximizing threshold scanned over the unique predicted probabilities,
    ties resolved toward the smallest candidate (recall-favoring)."""
    p = np.asarray(val_probs, dtype=np.float64)
    y = np.asarray(val_labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("threshold selection needs both classes in validation")
    best_tau = None
    best_f1 = -1.0
    for tau in np.unique(p):
        f1 = thresholded_scores(p, y, float(tau))["f1"]
        if f1 > best_f1:
            best_f1 = f1
            best_tau = float(tau)
    return best_tau


def _dropout_seed(seed: int, epoch: int, step: int) -> int:
    return (seed + 1) * 1_000_000 + epoch * 1_000 + step


def run_sequence(
    cfg: ModelConfig,
    params: dict[str, np.ndarray],
    snapshots: Sequence[DailySnapshot],
    indices: Sequence[int],
    prev_embeddings: dict | None = None,
) -> tuple[list[ForwardResult], dict | None]:
    """Inference pass over the given snapshots in order, carrying temporal
    state for the temporal model; returns results plus the final state."""
    wrapped = {k: Tensor(v) for k, v in params.items()}
    results: list[ForwardResult] = []
    for t in indices:
        snap = snapshots[t]
        res = model_forward(
            cfg,
            wrapped,
            snap.z_features,
            snap.edges,
            snap.nodes,
            prev_embeddings=prev_embeddings,
            training=False,
        )
        results.append(res)
        if cfg.kind == "tgat":
            prev_embeddings = {
                c: res.embeddings[i] for i, c in enumerate(snap.nodes)
            }
    return results, prev_embeddings


def collect_probs(
    cfg: ModelConfig,
    params: dict[str, np.ndarray],
    snapshots: Sequence[DailySnapshot],
    eval_indices: Sequence[int],
    warm_indices: Sequence[int] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled (probs, labels) over eval snapshots, temporal state warm-started
    over warm_indices for the temporal model."""
    state = None
    if cfg.kind == "tgat" and warm_indices:
        _, state = run_sequence(cfg, params, snapshots, warm_indices)
    results, _ = run_sequence(cfg, params, snapshots, eval_indices, prev_embeddings=state)
    probs = np.concatenate([r.probs.data for r in results])
    labels = np.concatenate([snapshots[t].labels for t in eval_indices])
    return probs, labels


@dataclass
class TrainedModel:
    config: ModelConfig
    train_config: TrainConfig
    params: dict[str, np.ndarray]
    best_epoch: int
    val_auc: float
    threshold: float
    history: list[tuple[int, float, float]]  # (epoch, train_loss, val_auc)


def resolve_pos_weight(pos_weight: float | str, train_labels: np.ndarray) -> float:
    if pos_weight == "auto":
        pi = float((train_labels == 1).mean())
        if pi <= 0.0 or pi >= 1.0:
            raise ValueError("cannot derive pos_weight from a single-class train split")
        return (1.0 - pi) / pi
    return float(pos_weight)


def train_model(
    snapshots: Sequence[DailySnapshot],
    split: SplitAssignment,
    tcfg: TrainConfig,
) -> TrainedModel:
    """Fit one model on the chronological split; test indices are never read."""
    train_idx = list(split.train)
    val_idx = list(split.val)
    for t in train_idx + val_idx:
        if snapshots[t].labels is None:
            raise ValueError(f"snapshot index {t} has no labels")
    train_labels = np.concatenate([snapshots[t].labels for t in train_idx])
    val_labels_all = np.concatenate([snapshots[t].labels for t in val_idx])
    if not (train_labels == 1).any() or not (val_labels_all == 1).any():
        raise ValueError("train and validation splits must each contain positives")
    if not (val_labels_all == 0).any():
        raise ValueError("validation split has no negatives; AUC undefined")
    pos_weight = resolve_pos_weight(tcfg.pos_weight, train_labels)
    mcfg = tcfg.model_config()
    params = init_params(mcfg, tcfg.seed)
    adam = AdamState.for_params(params)

    best_auc = -math.inf
    best_epoch = 0
    best_params: dict[str, np.ndarray] | None = None
    history: list[tuple[int, float, float]] = []
    for epoch in range(1, tcfg.epochs_max + 1):
        prev_emb: dict | None = None
        losses = []
        for step, t in enumerate(train_idx):
            snap = snapshots[t]
            rng_seed = _dropout_seed(tcfg.seed, epoch, step)
            carried = prev_emb
            captured: dict[str, ForwardResult] = {}

            def loss_fn(wp, _snap=snap, _prev=carried, _seed=rng_seed, _cap=captured):
                res = model_forward(
                    mcfg,
                    wp,
                    _snap.z_features,
                    _snap.edges,
                    _snap.nodes,
                    prev_embeddings=_prev,
                    training=True,
                    rng_seed=_seed,
                )
                _cap["res"] = res
                return weighted_bce(res.probs, _snap.labels, pos_weight)

            loss, grads = compute_gradients(loss_fn, params)
            adam_step(params, grads, adam, tcfg.lr, tcfg.weight_decay)
            losses.append(loss)
            if mcfg.kind == "tgat":
                emb = captured["res"].embeddings
                prev_emb = {c: emb[i] for i, c in enumerate(snap.nodes)}
        val_probs, val_labels = collect_probs(mcfg, params, snapshots, val_idx, train_idx)
        val_auc = roc_auc(val_probs, val_labels)
        history.append((epoch, float(np.mean(losses)), val_auc))
        if val_auc > best_auc:
            best_auc = val_auc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}

    assert best_params is not None
    val_probs, val_labels = collect_probs(mcfg, best_params, snapshots, val_idx, train_idx)
    threshold = select_threshold(val_probs, val_labels)
    return TrainedModel(
        config=mcfg,
        train_config=tcfg,
        params=best_params,
        best_epoch=best_epoch,
        val_auc=best_auc,
        threshold=threshold,
        history=history,
    )


def write_history_csv(history: Sequence[tuple[int, float, float]], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_auc"])
        for epoch, loss, auc in history:
            writer.writerow([epoch, repr(loss), repr(auc)])
