"""Model definitions: multi-head graph attention, mean-aggregation graph
convolution, logistic regression, and the shared MLP head.

The attention layer scores each directed edge j -> i as
LeakyReLU(a . [W h_i || W h_j]) per head, softmax-normalizes over i's
in-neighborhood (self-loop included by default), and aggregates the
projected neighbor vectors. Raw per-head edge logits are retained so the
evidence stage can derive neighbor-influence weights.

The temporal variant feeds each node's previous-day embedding back in as
extra input features (detached: no gradient flows into the past), using a
single weight matrix sized for the widened input with the prior block
zeroed on the first day.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .autodiff import Tensor, concat, segment_softmax
from .ingest import CellId
from .snapshots import FEATURE_NAMES

LEAKY_SLOPE = 0.2
CHECKPOINT_FORMAT_VERSION = 1

MODEL_KINDS = ("lr", "gcn", "tgat")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; d_in is derived from the kind."""

    kind: str
    n_features: int = len(FEATURE_NAMES)
    hidden: int = 128  # per-head width (tgat) / layer width (gcn)
    n_heads: int = 4  # tgat only
    mlp_hidden: int = 128
    dropout: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind: {self.kind!r}")
        if self.hidden < 1 or self.n_heads < 1 or self.mlp_hidden < 1:
            raise ValueError("hidden, n_heads, and mlp_hidden must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def emb_dim(self) -> int:
        if self.kind == "tgat":
            return self.n_heads * self.hidden
        if self.kind == "gcn":
            return self.hidden
        return 0

    @property
    def d_in(self) -> int:
        # tgat input = raw features plus the prior-day embedding block
        if self.kind == "tgat":
            return self.n_features + self.emb_dim
        return self.n_features

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "hidden": self.hidden,
            "n_heads": self.n_heads,
            "mlp_hidden": self.mlp_hidden,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            kind=d["kind"],
            n_features=int(d["n_features"]),
            hidden=int(d["hidden"]),
            n_heads=int(d["n_heads"]),
            mlp_hidden=int(d["mlp_hidden"]),
            dropout=float(d["dropout"]),
        )


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter names and shapes for a model kind."""
    shapes: dict[str, tuple[int, ...]] = {}
    if cfg.kind == "lr":
        shapes["lr.w"] = (cfg.n_features, 1)
        shapes["lr.b"] = (1,)
        return shapes
    if cfg.kind == "gcn":
        shapes["gcn.w"] = (cfg.hidden, cfg.d_in)
    else:
        for m in range(cfg.n_heads):
            shapes[f"gat.w{m}"] = (cfg.hidden, cfg.d_in)
            shapes[f"gat.a{m}"] = (2 * cfg.hidden,)
    shapes["mlp.w1"] = (cfg.emb_dim, cfg.mlp_hidden)
    shapes["mlp.b1"] = (cfg.mlp_hidden,)
    shapes["mlp.w2"] = (cfg.mlp_hidden, 1)
    shapes["mlp.b2"] = (1,)
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, deterministic for a given seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        elif len(shape) == 1:
            # attention vectors: small uniform
            limit = np.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            fan_in, fan_out = shape[1], shape[0]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def wrap_params(params: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in params.items()}


@dataclass
class AttentionInfo:
    """Detached attention internals for one forward pass.

    Rows cover every scored edge including appended self-loops; logits are
    the raw LeakyReLU scores per head, alpha the per-head softmax weights.
    """

    src: np.ndarray  # (E,)
    dst: np.ndarray  # (E,)
    is_self: np.ndarray  # (E,) bool
    logits: np.ndarray  # (E, H)
    alpha: np.ndarray  # (E, H)


def _with_self_loops(edges: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = np.concatenate([edges[:, 0], np.arange(n_nodes)])
    dst = np.concatenate([edges[:, 1], np.arange(n_nodes)])
    is_self = np.concatenate(
        [np.zeros(len(edges), dtype=bool), np.ones(n_nodes, dtype=bool)]
    )
    return src, dst, is_self


def gat_forward(
    x: Tensor,
    edges: np.ndarray,
    params: Mapping[str, Tensor],
    cfg: ModelConfig,
    training: bool = False,
    self_loops: bool = True,
) -> tuple[Tensor, AttentionInfo]:
    """Multi-head attention layer over directed edges (src feeds dst).

    Returns the concatenated head outputs (V, H*hidden) and the detached
    attention internals. `training` is part of the layer contract but has
    no effect here: dropout lives in the MLP head only.
    """
    del training
    n = x.data.shape[0]
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if self_loops:
        src, dst, is_self = _with_self_loops(edges, n)
    else:
        src, dst = edges[:, 0], edges[:, 1]
        is_self = np.zeros(len(edges), dtype=bool)
        present = np.zeros(n, dtype=bool)
        present[dst] = True
        if not present.all():
            missing = int(np.flatnonzero(~present)[0])
            raise ValueError(
                f"node {missing} has no in-neighbors and self-loops are disabled"
            )
    heads: list[Tensor] = []
    logit_cols: list[np.ndarray] = []
    alpha_cols: list[np.ndarray] = []
    for m in range(cfg.n_heads):
        w = params[f"gat.w{m}"]
        a = params[f"gat.a{m}"]
        h = cfg.hidden
        z = x @ w.transpose()  # (V, h)
        a_dst = a.take_rows(np.arange(h)).reshape((h, 1))
        a_src = a.take_rows(np.arange(h, 2 * h)).reshape((h, 1))
        score_dst = (z @ a_dst).reshape((n,))
        score_src = (z @ a_src).reshape((n,))
        e = (score_dst.take_rows(dst) + score_src.take_rows(src)).leaky_relu(LEAKY_SLOPE)
        alpha = segment_softmax(e, dst, n)
        weighted = alpha.reshape((len(src), 1)) * z.take_rows(src)
        heads.append(weighted.segment_sum(dst, n))
        logit_cols.append(e.data.copy())
        alpha_cols.append(alpha.data.copy())
    emb = heads[0] if len(heads) == 1 else concat(heads, axis=1)
    info = AttentionInfo(
        src=src,
        dst=dst,
        is_self=is_self,
        logits=np.stack(logit_cols, axis=1),
        alpha=np.stack(alpha_cols, axis=1),
    )
    return emb, info


def gcn_forward(
    x: Tensor,
    edges: np.ndarray,
    params: Mapping[str, Tensor],
    cfg: ModelConfig,
) -> Tensor:
    """Degree-normalized mean aggregation over N(i) plus self, then ReLU(W.)."""
    n = x.data.shape[0]
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src, dst = edges[:, 0], edges[:, 1]
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    summed = x.take_rows(src).segment_sum(dst, n) + x
    agg = summed * Tensor((1.0 / (deg + 1.0))[:, None])
    return (agg @ params["gcn.w"].transpose()).relu()


def dropout_mask(shape: tuple[int, ...], rate: float, rng_seed: int) -> np.ndarray:
    """Inverted-dropout mask, a pure function of (shape, rate, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 29]))
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def mlp_forward(
    emb: Tensor,
    params: Mapping[str, Tensor],
    cfg: ModelConfig,
    training: bool = False,
    rng_seed: int | None = None,
) -> Tensor:
    """Two-layer head: sigmoid(W2 . dropout(ReLU(W1 . e + b1)) + b2) -> (V,)."""
    n = emb.data.shape[0]
    hidden = (emb @ params["mlp.w1"] + params["mlp.b1"]).relu()
    if training and cfg.dropout > 0.0:
        if rng_seed is None:
            raise ValueError("training-mode dropout requires an rng seed")
        hidden = hidden * Tensor(dropout_mask(hidden.data.shape, cfg.dropout, rng_seed))
    logit = hidden @ params["mlp.w2"] + params["mlp.b2"]
    return logit.sigmoid().reshape((n,))


def lr_forward(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Single logistic layer on the raw feature vector; no graph, no memory."""
    n = x.data.shape[0]
    return (x @ params["lr.w"] + params["lr.b"]).sigmoid().reshape((n,))


def temporal_concat(
    z_features: np.ndarray,
    nodes: Sequence[CellId],
    prev_embeddings: Mapping[CellId, np.ndarray] | None,
    emb_dim: int,
) -> np.ndarray:
    """Widen node inputs with each node's own previous-day embedding.

    Nodes absent yesterday (and every node on the first day) get a zero
    block. Prior embeddings are constants: the caller passes detached
    arrays, so no gradient reaches the previous day.
    """
    n = z_features.shape[0]
    block = np.zeros((n, emb_dim), dtype=np.float64)
    if prev_embeddings:
        for i, cell in enumerate(nodes):
            e = prev_embeddings.get(cell)
            if e is not None:
                block[i] = e
    return np.concatenate([z_features, block], axis=1)


@dataclass
class ForwardResult:
    probs: Tensor  # (V,)
    embeddings: np.ndarray | None  # detached (V, emb_dim); None for lr
    attention: AttentionInfo | None  # tgat only


def model_forward(
    cfg: ModelConfig,
    params: Mapping[str, Tensor],
    z_features: np.ndarray,
    edges: np.ndarray,
    nodes: Sequence[CellId],
    prev_embeddings: Mapping[CellId, np.ndarray] | None = None,
    training: bool = False,
    rng_seed: int | None = None,
) -> ForwardResult:
    """One snapshot through the selected model; probabilities for every node."""
    if cfg.kind == "lr":
        p = lr_forward(Tensor(z_features), params)
        return ForwardResult(probs=p, embeddings=None, attention=None)
    if cfg.kind == "gcn":
        emb = gcn_forward(Tensor(z_features), edges, params, cfg)
        p = mlp_forward(emb, params, cfg, training=training, rng_seed=rng_seed)
        return ForwardResult(probs=p, embeddings=emb.data.copy(), attention=None)
    x = temporal_concat(z_features, nodes, prev_embeddings, cfg.emb_dim)
    emb, info = gat_forward(Tensor(x), edges, params, cfg, training=training)
    p = mlp_forward(emb, params, cfg, training=training, rng_seed=rng_seed)
    return ForwardResult(probs=p, embeddings=emb.data.copy(), attention=info)


def compute_gradients(
    loss_fn: Callable[[dict[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss value and the gradient of every parameter entry.

    loss_fn builds the scalar loss from the wrapped parameter tensors
    (inputs captured in its closure); it must be deterministic so dropout
    masks stay fixed across calls with the same seed.
    """
    wrapped = wrap_params(params)
    loss = loss_fn(wrapped)
    if not np.isfinite(loss.data):
        raise FloatingPointError("non-finite loss")
    loss.backward()
    grads = {}
    for name, t in wrapped.items():
        grads[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
    return float(loss.data), grads


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(
    path: str | Path,
    cfg: ModelConfig,
    params: Mapping[str, np.ndarray],
    extras: dict | None = None,
) -> None:
    """Write a versioned JSON checkpoint with shape metadata."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": cfg.to_dict(),
        "feature_names": list(FEATURE_NAMES),
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.items()
        },
    }
    if extras:
        doc.update(extras)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, dict[str, np.ndarray], dict]:
    """Read a checkpoint, validating every tensor shape against the config."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {doc.get('format_version')}")
    cfg = ModelConfig.from_dict(doc["config"])
    if tuple(doc["feature_names"]) != FEATURE_NAMES:
        raise ValueError("checkpoint feature ordering does not match this build")
    expected = param_shapes(cfg)
    raw = doc["params"]
    if set(raw) != set(expected):
        raise ValueError(
            f"checkpoint parameter set mismatch: have {sorted(raw)}, want {sorted(expected)}"
        )
    params: dict[str, np.ndarray] = {}
    for name, shape in expected.items():
        entry = raw[name]
        if tuple(entry["shape"]) != shape:
            raise ValueError(
                f"checkpoint tensor {name} has shape {tuple(entry['shape'])}, want {shape}"
            )
        params[name] = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
    extras = {
        k: v
        for k, v in doc.items()
        if k not in ("format_version", "config", "feature_names", "params")
    }
    return cfg, params, extras
