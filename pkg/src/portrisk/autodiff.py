"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just the operations the graph-attention, graph-convolution, logistic, and
MLP models need: elementwise arithmetic with broadcasting, 2-d matmul,
activations, row gather, segment sum, concatenation, and reductions.
Gradients are exact; everything stays in float64 so finite-difference
checks can be tight.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus the tape bookkeeping to backpropagate through it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]] | None = None,
    ) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        needs = any(p.requires_grad for p in parents)
        return Tensor(data, requires_grad=needs, _parents=parents if needs else (),
                      _backward=backward if needs else None)

    def __add__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        return Tensor._make(
            a.data + b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
        )

    def __sub__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        return Tensor._make(
            a.data - b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
        )

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        return Tensor._make(
            a.data * b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape),
            ),
        )

    def __truediv__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        return Tensor._make(
            a.data / b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
            ),
        )

    def __matmul__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul supports 2-d operands only")
        return Tensor._make(
            a.data @ b.data,
            (a, b),
            lambda g: (g @ b.data.T, a.data.T @ g),
        )

    def scale(self, c: float) -> "Tensor":
        return Tensor._make(self.data * c, (self,), lambda g: (g * c,))

    def add_const(self, c: float) -> "Tensor":
        return Tensor._make(self.data + c, (self,), lambda g: (g,))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor._make(np.where(mask, self.data, 0.0), (self,), lambda g: (g * mask,))

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        mask = self.data > 0
        out = np.where(mask, self.data, slope * self.data)
        return Tensor._make(out, (self,), lambda g: (g * np.where(mask, 1.0, slope),))

    def sigmoid(self) -> "Tensor":
        s = 1.0 / (1.0 + np.exp(-self.data))
        return Tensor._make(s, (self,), lambda g: (g * s * (1.0 - s),))

    def exp(self) -> "Tensor":
        e = np.exp(self.data)
        return Tensor._make(e, (self,), lambda g: (g * e,))

    def log(self) -> "Tensor":
        return Tensor._make(np.log(self.data), (self,), lambda g: (g / self.data,))

    def clip(self, lo: float, hi: float) -> "Tensor":
        inside = (self.data > lo) & (self.data < hi)
        return Tensor._make(np.clip(self.data, lo, hi), (self,), lambda g: (g * inside,))

    def reshape(self, shape: tuple[int, ...]) -> "Tensor":
        orig = self.data.shape
        return Tensor._make(self.data.reshape(shape), (self,), lambda g: (g.reshape(orig),))

    def transpose(self) -> "Tensor":
        return Tensor._make(self.data.T, (self,), lambda g: (g.T,))

    def sum(self, axis: int | None = None) -> "Tensor":
        orig = self.data.shape
        if axis is None:
            return Tensor._make(
                np.asarray(self.data.sum()), (self,), lambda g: (np.broadcast_to(g, orig).copy(),)
            )
        return Tensor._make(
            self.data.sum(axis=axis),
            (self,),
            lambda g: (np.broadcast_to(np.expand_dims(g, axis), orig).copy(),),
        )

    def mean(self) -> "Tensor":
        return self.sum().scale(1.0 / self.data.size)

    def take_rows(self, idx: np.ndarray) -> "Tensor":
        """Gather rows (axis 0); scatter-adds the gradient back."""
        idx = np.asarray(idx, dtype=np.int64)
        orig_shape = self.data.shape

        def backward(g: np.ndarray):
            out = np.zeros(orig_shape, dtype=np.float64)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(self.data[idx], (self,), backward)

    def segment_sum(self, seg: np.ndarray, n_segments: int) -> "Tensor":
        """Sum rows into segments: out[s] = sum of rows e with seg[e] == s."""
        seg = np.asarray(seg, dtype=np.int64)
        out_shape = (n_segments,) + self.data.shape[1:]
        acc = np.zeros(out_shape, dtype=np.float64)
        np.add.at(acc, seg, self.data)
        return Tensor._make(acc, (self,), lambda g: (g[seg],))

    # -- backward ------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, pg in zip(node._parents, node._backward(node.grad)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along an axis, splitting the gradient back apart."""
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(sizes))
        )

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tuple(tensors), backward)


def segment_softmax(scores: Tensor, seg: np.ndarray, n_segments: int) -> Tensor:
    """Softmax of a 1-d score vector within each segment.

    The per-segment max is subtracted as a detached constant (softmax is
    shift-invariant), keeping exp well-scaled without touching gradients.
    """
    seg = np.asarray(seg, dtype=np.int64)
    seg_max = np.full(n_segments, -np.inf, dtype=np.float64)
    np.maximum.at(seg_max, seg, scores.data)
    ex = (scores - Tensor(seg_max[seg])).exp()
    denom = ex.segment_sum(seg, n_segments).take_rows(seg)
    return ex / denom
