"""Minimal reverse-mode automatic differentiation on float64 numpy arrays.

Everything here operates on dense arrays of rank at most 3. Each operation
records its parents and a closure that routes the upstream gradient to them;
``Tensor.backward`` walks the recorded graph once in reverse topological
order. No broadcasting tricks beyond what the individual ops declare.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Array = np.ndarray


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse mode.

    ``requires_grad`` is inherited from parents, so intermediate results of
    differentiable subgraphs track gradients automatically.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[Array], None] | None = None,
    ):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ValueError(f"rank {arr.ndim} tensor not supported (max 3)")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad: Array | None = None) -> None:
        """Run reverse mode from this tensor.

        ``grad`` seeds the output gradient; defaults to ones (so a scalar
        loss gets seed 1.0). Gradients accumulate into ``.grad`` of every
        tensor on a differentiable path.
        """
        if grad is None:
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError(f"seed gradient shape {grad.shape} != {self.data.shape}")

        # Iterative topological sort; recursion would limit graph depth.
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _make(data: Array, parents: tuple[Tensor, ...], backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (),
                  _backward=backward if req else None)


def _reduce_to_shape(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient down to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy semantics for rank 2 and batched rank 3."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have rank >= 2")
    out_data = np.matmul(a.data, b.data)

    def backward(g: Array) -> None:
        if a.requires_grad or a._parents:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_reduce_to_shape(ga, a.shape))
        if b.requires_grad or b._parents:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_reduce_to_shape(gb, b.shape))

    return _make(out_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; broadcasting follows numpy (bias rows sum back)."""
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g: Array) -> None:
        if a.requires_grad or a._parents:
            a._accumulate(_reduce_to_shape(g, a.shape))
        if b.requires_grad or b._parents:
            b._accumulate(_reduce_to_shape(g, b.shape))

    return _make(out_data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar."""
    a = as_tensor(a)
    c = float(c)

    def backward(g: Array) -> None:
        a._accumulate(c * g)

    return _make(a.data * c, (a,), backward)


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0

    def backward(g: Array) -> None:
        a._accumulate(g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), backward)


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)

    def backward(g: Array) -> None:
        a._accumulate(g / a.data)

    return _make(np.log(a.data), (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stabilized."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g: Array) -> None:
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        a._accumulate(out_data * (g - dot))

    return _make(out_data, (a,), backward)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    """Arithmetic mean over one axis, or over all entries when axis is None."""
    a = as_tensor(a)
    if axis is None:
        n = a.data.size

        def backward_all(g: Array) -> None:
            a._accumulate(np.full_like(a.data, float(g) / n))

        return _make(np.asarray(a.data.mean()), (a,), backward_all)

    n = a.data.shape[axis]

    def backward(g: Array) -> None:
        a._accumulate(np.repeat(np.expand_dims(g, axis), n, axis=axis) / n)

    return _make(a.data.mean(axis=axis), (a,), backward)


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    """Permute axes; default swaps the last two."""
    a = as_tensor(a)
    if axes is None:
        axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    inv = tuple(np.argsort(axes))

    def backward(g: Array) -> None:
        a._accumulate(np.transpose(g, inv))

    return _make(np.transpose(a.data, axes), (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)

    def backward(g: Array) -> None:
        a._accumulate(g.reshape(a.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors along axis 0."""
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[0] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad or t._parents:
                t._accumulate(g[lo:hi])

    return _make(np.concatenate([t.data for t in ts], axis=0), tuple(ts), backward)


def gather_rows(a: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor by integer index (repeats allowed)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g: Array) -> None:
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        a._accumulate(ga)

    return _make(a.data[idx], (a,), backward)


def grl(a: Tensor, lam: float) -> Tensor:
    """Gradient reversal: forward is the identity, backward multiplies by -lam."""
    a = as_tensor(a)
    lam = float(lam)

    def backward(g: Array) -> None:
        a._accumulate(-lam * g)

    # Aliasing a.data is safe: tensors are never mutated after creation.
    return _make(a.data, (a,), backward)


def _normalize_labels(labels) -> tuple[Array, Array]:
    """Accept {node: class} mappings or (idx, cls) array pairs."""
    if isinstance(labels, Mapping):
        if not labels:
            raise ValueError("label set is empty")
        idx = np.array(sorted(labels), dtype=np.int64)
        cls = np.array([labels[int(i)] for i in idx], dtype=np.int64)
        return idx, cls
    idx, cls = labels
    idx = np.asarray(idx, dtype=np.int64)
    cls = np.asarray(cls, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("label set is empty")
    return idx, cls


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy over a labeled subset of rows.

    ``labels`` maps row index to class index (dict or (idx, cls) arrays).
    Rows outside the subset contribute nothing and get exactly zero
    gradient. Raises on an empty subset.
    """
    logits = as_tensor(logits)
    idx, cls = _normalize_labels(labels)
    if logits.ndim != 2:
        raise ValueError("cross_entropy expects [rows x classes] logits")
    if idx.size and (idx.min() < 0 or idx.max() >= logits.shape[0]):
        raise ValueError("label row index out of range")
    if cls.min() < 0 or cls.max() >= logits.shape[1]:
        raise ValueError("label class index out of range")

    z = logits.data[idx]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    picked = z[np.arange(idx.size), cls]
    loss = float(np.mean(lse - picked))
    n = idx.size

    def backward(g: Array) -> None:
        p = np.exp(z - zmax)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), cls] -= 1.0
        full = np.zeros_like(logits.data)
        np.add.at(full, idx, p * (float(g) / n))
        logits._accumulate(full)

    return _make(np.asarray(loss), (logits,), backward)


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    worst: str

    def __bool__(self) -> bool:
        return self.passed


def grad_check(
    build: Callable[[dict[str, Tensor]], Tensor],
    params: Mapping[str, Array],
    tol: float = 1e-4,
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients of a scalar function against central
    finite differences.

    ``build`` maps a dict of named tensors to a scalar Tensor. Relative
    error per coordinate uses max(1, |analytic|, |numeric|) as denominator,
    so dead-relu coordinates compare as exact zeros. Non-finite values fail
    immediately with the offending location.
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    leaves = {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
    out = build(leaves)
    if out.data.shape != ():
        raise ValueError("grad_check target must be scalar")
    if not np.isfinite(out.data):
        return GradCheckReport(np.inf, False, "non-finite forward value")
    out.backward()
    analytic = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in leaves.items()
    }

    def evaluate(vals: dict[str, Array]) -> float:
        consts = {k: Tensor(v) for k, v in vals.items()}
        return float(build(consts).data)

    max_rel = 0.0
    worst = ""
    for name, base in arrays.items():
        an = analytic[name]
        if not np.all(np.isfinite(an)):
            return GradCheckReport(np.inf, False, f"non-finite analytic gradient in {name}")
        flat = base.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = evaluate(arrays)
            flat[j] = orig - step
            lo = evaluate(arrays)
            flat[j] = orig
            fd = (hi - lo) / (2.0 * step)
            if not np.isfinite(fd):
                return GradCheckReport(np.inf, False, f"non-finite finite difference at {name}[{j}]")
            a = an.reshape(-1)[j]
            rel = abs(a - fd) / max(1.0, abs(a), abs(fd))
            if rel > max_rel:
                max_rel = rel
                worst = f"{name}[{j}] analytic={a:.6g} fd={fd:.6g}"
    return GradCheckReport(max_rel, max_rel < tol, worst)
