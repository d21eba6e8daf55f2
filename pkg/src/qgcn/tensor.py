"""Dense float64 tensors with reverse-mode gradients.

A small tape: every op records its parents and a closure that routes the
output gradient back to them.  Shapes follow numpy matmul broadcasting over
one leading batch axis; gradients of broadcast operands are sum-reduced
back to the operand shape.  The correctness contract is the central
finite-difference check in the test suite, not the tape mechanics.
"""

from __future__ import annotations

import numpy as np

from .errors import LabelError, NumericFault, ShapeError

PROB_EPS = 1e-12  # probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] inside losses


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self.grad: np.ndarray | None = None
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"

    # ---- graph construction helpers -------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every requires_grad leaf."""
        if self.data.size != 1:
            raise ShapeError(f"backward requires a scalar, got shape {self.data.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- operations ------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
        out_data = a @ b
        out = Tensor(out_data, parents=(self, other))

        def backward(g):
            self._accumulate(g @ np.swapaxes(b, -1, -2))
            other._accumulate(np.swapaxes(a, -1, -2) @ g)

        out._backward = backward if out.requires_grad else None
        return out

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        if self.data.ndim < 2:
            raise ShapeError(f"transpose needs rank >= 2, got shape {self.data.shape}")
        out = Tensor(np.swapaxes(self.data, -1, -2), parents=(self,))

        def backward(g):
            self._accumulate(np.swapaxes(g, -1, -2))

        out._backward = backward if out.requires_grad else None
        return out

    def add(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data + other.data, parents=(self, other))

        def backward(g):
            self._accumulate(g)
            other._accumulate(g)

        out._backward = backward if out.requires_grad else None
        return out

    __add__ = add

    def mul(self, other: "Tensor") -> "Tensor":
        a, b = self.data, other.data
        out = Tensor(a * b, parents=(self, other))

        def backward(g):
            self._accumulate(g * b)
            other._accumulate(g * a)

        out._backward = backward if out.requires_grad else None
        return out

    __mul__ = mul

    def scale(self, factor: float) -> "Tensor":
        factor = float(factor)
        out = Tensor(self.data * factor, parents=(self,))

        def backward(g):
            self._accumulate(g * factor)

        out._backward = backward if out.requires_grad else None
        return out

    def elementwise(self, fn, dfn, name: str = "") -> "Tensor":
        """Apply fn entrywise; dfn(x) is the entrywise derivative at the input."""
        value = np.asarray(fn(self.data), dtype=np.float64)
        if value.shape != self.data.shape:
            raise ShapeError(f"elementwise fn changed shape {self.data.shape} -> {value.shape}")
        if not np.all(np.isfinite(value)):
            where = np.argwhere(~np.isfinite(value))[0]
            raise NumericFault(f"non-finite output of {name or 'elementwise'} at index {tuple(where)}")
        x = self.data
        out = Tensor(value, parents=(self,), name=name)

        def backward(g):
            self._accumulate(g * dfn(x))

        out._backward = backward if out.requires_grad else None
        return out

    def relu(self) -> "Tensor":
        return self.elementwise(lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64), "relu")

    def tanh(self) -> "Tensor":
        return self.elementwise(np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, "tanh")

    def sigmoid(self) -> "Tensor":
        s = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(s, parents=(self,), name="sigmoid")

        def backward(g):
            self._accumulate(g * s * (1.0 - s))

        out._backward = backward if out.requires_grad else None
        return out

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), parents=(self,))

        def backward(g):
            self._accumulate(np.broadcast_to(g, self.data.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def mean(self) -> "Tensor":
        n = self.data.size
        out = Tensor(self.data.mean(), parents=(self,))

        def backward(g):
            self._accumulate(np.broadcast_to(g / n, self.data.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def sum_squares(self) -> "Tensor":
        out = Tensor(np.sum(self.data ** 2), parents=(self,))

        def backward(g):
            self._accumulate(2.0 * g * self.data)

        out._backward = backward if out.requires_grad else None
        return out

    def reshape(self, *shape) -> "Tensor":
        old = self.data.shape
        out = Tensor(self.data.reshape(*shape), parents=(self,))

        def backward(g):
            self._accumulate(g.reshape(old))

        out._backward = backward if out.requires_grad else None
        return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a gradient over axes that were broadcast in the forward op."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def concat_columns(tensors) -> Tensor:
    """Concatenate along the last axis, splitting the gradient back."""
    tensors = list(tensors)
    datas = [t.data for t in tensors]
    lead = datas[0].shape[:-1]
    for d in datas[1:]:
        if d.shape[:-1] != lead:
            raise ShapeError(f"concat_columns leading shapes disagree: {lead} vs {d.shape[:-1]}")
    widths = [d.shape[-1] for d in datas]
    out = Tensor(np.concatenate(datas, axis=-1), parents=tuple(tensors))
    offsets = np.cumsum([0] + widths)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accumulate(g[..., lo:hi])

    out._backward = backward if out.requires_grad else None
    return out


def softmax_rows(t: Tensor) -> Tensor:
    """Row softmax over the last axis; rows sum to 1."""
    x = t.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(p, parents=(t,), name="softmax")

    def backward(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        t._accumulate(p * (g - inner))

    out._backward = backward if out.requires_grad else None
    return out


def bce(p: Tensor, y) -> Tensor:
    """Mean binary cross-entropy of probabilities p against 0/1 labels y."""
    y = np.asarray(y, dtype=np.float64).reshape(p.data.shape)
    if np.any((y != 0.0) & (y != 1.0)):
        raise LabelError("binary labels must be 0 or 1")
    clipped = np.clip(p.data, PROB_EPS, 1.0 - PROB_EPS)
    losses = -(y * np.log(clipped) + (1.0 - y) * np.log1p(-clipped))
    n = p.data.size
    out = Tensor(losses.mean(), parents=(p,), name="bce")
    inside = (p.data > PROB_EPS) & (p.data < 1.0 - PROB_EPS)

    def backward(g):
        grad = np.where(inside, (-y / clipped + (1.0 - y) / (1.0 - clipped)) / n, 0.0)
        p._accumulate(g * grad)

    out._backward = backward if out.requires_grad else None
    return out


def cross_entropy(p: Tensor, y) -> Tensor:
    """Mean negative log-probability of the true class; p holds row distributions."""
    if p.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects (batch, classes), got {p.data.shape}")
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    b, c = p.data.shape
    if y.shape[0] != b:
        raise LabelError(f"{y.shape[0]} labels for a batch of {b}")
    if np.any((y < 0) | (y >= c)):
        raise LabelError(f"labels must lie in [0, {c})")
    picked = p.data[np.arange(b), y]
    clipped = np.clip(picked, PROB_EPS, 1.0 - PROB_EPS)
    out = Tensor(-np.log(clipped).mean(), parents=(p,), name="cross_entropy")
    inside = (picked > PROB_EPS) & (picked < 1.0 - PROB_EPS)

    def backward(g):
        grad = np.zeros_like(p.data)
        grad[np.arange(b), y] = np.where(inside, -1.0 / clipped, 0.0) / b
        p._accumulate(g * grad)

    out._backward = backward if out.requires_grad else None
    return out
