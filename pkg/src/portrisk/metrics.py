"""Ranking and thresholded classification metrics.

AUC uses the rank (Mann-Whitney) form with ties credited 0.5; average
precision uses step interpolation with tied scores entering as one group.
Both conventions make the O(n^2) brute-force oracles in the test suite
exact, not approximate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def _check_binary(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be 0/1")
    return n_pos, n_neg


def roc_auc(probs, labels) -> float:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValueError("probs and labels must have equal length")
    n_pos, n_neg = _check_binary(y)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC undefined with a single class")
    order = np.argsort(p, kind="stable")
    ranks = np.empty(p.size, dtype=np.float64)
    sorted_p = p[order]
    i = 0
    while i < p.size:
        j = i
        while j + 1 < p.size and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(probs, labels) -> float:
    """Sum of precision-weighted recall steps over descending score groups."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValueError("probs and labels must have equal length")
    n_pos, _ = _check_binary(y)
    if n_pos == 0:
        raise ValueError("average precision undefined without positives")
    order = np.argsort(-p, kind="stable")
    sorted_p = p[order]
    sorted_y = y[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < p.size:
        j = i
        while j + 1 < p.size and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        group_tp = int(sorted_y[i : j + 1].sum())
        tp += group_tp
        seen += j - i + 1
        if group_tp:
            ap += (group_tp / n_pos) * (tp / seen)
        i = j + 1
    return ap


@dataclass
class EvalReport:
    """Scores and confusion counts for one model at one threshold."""

    auc: float
    ap: float
    f1: float
    recall: float
    precision: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    n_samples: int
    positive_rate: float

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "ap": self.ap,
            "f1": self.f1,
            "recall": self.recall,
            "precision": self.precision,
            "threshold": self.threshold,
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "n_samples": self.n_samples,
            "positive_rate": self.positive_rate,
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2), encoding="utf-8")


def thresholded_scores(probs, labels, threshold: float) -> dict:
    """Confusion counts and P/R/F1 for the decision rule p >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValueError("probs and labels must have equal length")
    _check_binary(y)
    pred = p >= threshold
    tp = int((pred & (y == 1)).sum())
    fp = int((pred & (y == 0)).sum())
    fn = int((~pred & (y == 1)).sum())
    tn = int((~pred & (y == 0)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "tp": tp,
        "fp": fp,
        "tn": tn,
        "fn": fn,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def evaluate(probs, labels, threshold: float) -> EvalReport:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    frag = thresholded_scores(p, y, threshold)
    return EvalReport(
        auc=roc_auc(p, y),
        ap=average_precision(p, y),
        f1=frag["f1"],
        recall=frag["recall"],
        precision=frag["precision"],
        threshold=threshold,
        tp=frag["tp"],
        fp=frag["fp"],
        tn=frag["tn"],
        fn=frag["fn"],
        n_samples=int(y.size),
        positive_rate=float((y == 1).mean()),
    )


MODEL_LABELS = {
    "lr": "LR (no graph)",
    "gcn": "GCN (static graph)",
    "tgat": "TGAT (graph + attention)",
}


def comparison_table(reports: dict[str, EvalReport]) -> str:
    """Aligned text table over models with AUC, AP, F1, Recall columns."""
    rows = []
    for kind in ("lr", "gcn", "tgat"):
        if kind not in reports:
            continue
        r = reports[kind]
        rows.append(
            (MODEL_LABELS.get(kind, kind), f"{r.auc:.3f}", f"{r.ap:.3f}", f"{r.f1:.3f}", f"{r.recall:.3f}")
        )
    for kind in sorted(set(reports) - {"lr", "gcn", "tgat"}):
        r = reports[kind]
        rows.append((kind, f"{r.auc:.3f}", f"{r.ap:.3f}", f"{r.f1:.3f}", f"{r.recall:.3f}"))
    header = ("Model", "AUC", "AP", "F1", "Recall")
    width = max(len(header[0]), *(len(r[0]) for r in rows)) if rows else len(header[0])
    lines = [f"{header[0]:<{width}}  {header[1]:>6}  {header[2]:>6}  {header[3]:>6}  {header[4]:>6}"]
    for name, auc, ap, f1, recall in rows:
        lines.append(f"{name:<{width}}  {auc:>6}  {ap:>6}  {f1:>6}  {recall:>6}")
    return "\n".join(lines)
