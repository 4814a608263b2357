"""Neural building blocks on top of the autodiff core.

Graph convolution, single-head scaled dot-product self-attention, Adam, and
a plain-text parameter checkpoint format that round-trips exactly.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

from .autodiff import Tensor, add, as_tensor, matmul, relu, scale, softmax, transpose

Array = np.ndarray


def normalized_adjacency(node_count: int, edges: Array) -> Array:
    """Symmetric degree-normalized adjacency with self-loops.

    Returns D^{-1/2} (A + I) D^{-1/2} as a dense matrix. Self-loops keep
    every degree positive, so isolated nodes get a diagonal entry of one.
    """
    a = np.eye(node_count, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    for u, v in edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def graph_conv(x: Tensor, adj_norm: Array, w: Tensor) -> Tensor:
    """One graph convolution layer: relu(adj_norm @ x @ w)."""
    return relu(matmul(matmul(as_tensor(adj_norm), x), w))


def self_attention(h: Tensor, wq: Tensor, wk: Tensor, wv: Tensor,
                   return_weights: bool = False):
    """Single-head scaled dot-product self-attention.

    ``h`` is [T x d] or batched [B x T x d]; queries, keys and values share
    the input. Scores are scaled by 1/sqrt(d_head) before the row softmax.
    """
    q = matmul(h, wq)
    k = matmul(h, wk)
    v = matmul(h, wv)
    d_head = wq.shape[-1]
    weights = softmax(scale(matmul(q, transpose(k)), 1.0 / np.sqrt(d_head)))
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    return add(out, b) if b is not None else out


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
           shape: tuple[int, ...] | None = None) -> Array:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def seeded_rng(seed: int, name: str) -> np.random.Generator:
    """A generator whose stream depends only on (seed, name).

    Parameters initialized this way are identical across model variants
    that share the name, regardless of which other parameters exist.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


class AdamState:
    """Adam with bias correction. Moments are zero-initialized and the step
    counter is shared across all parameters updated in one call."""

    def __init__(self, lr: float = 3e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m: dict[str, Array] = {}
        self.v: dict[str, Array] = {}


def adam_step(params: dict[str, Array], grads: dict[str, Array],
              state: AdamState) -> tuple[dict[str, Array], AdamState]:
    """Apply one Adam update in place; returns (params, state).

    Parameters absent from ``grads`` are treated as having zero gradient,
    which leaves them bitwise unchanged.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        if g is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# --- checkpoint format ------------------------------------------------------
#
# One record per line:  name|d0,d1,...|v0 v1 v2 ...
# Values are printed with %.17g so parsing returns the exact float64.
# Lines starting with '#' carry string metadata as  # key=value


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_tensor_manifest(path: str | Path, tensors: dict[str, Array],
                          meta: dict[str, str] | None = None) -> None:
    lines = []
    for key, value in sorted((meta or {}).items()):
        if "\n" in key or "\n" in str(value):
            raise ValueError("metadata must be single-line")
        lines.append(f"# {key}={value}")
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype=np.float64)
        dims = ",".join(str(d) for d in arr.shape)
        vals = " ".join(_fmt(x) for x in arr.reshape(-1))
        lines.append(f"{name}|{dims}|{vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tensor_manifest(path: str | Path) -> tuple[dict[str, Array], dict[str, str]]:
    tensors: dict[str, Array] = {}
    meta: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, value = body.partition("=")
            meta[key.strip()] = value
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln}: malformed tensor record")
        name, dims, vals = parts
        shape = tuple(int(d) for d in dims.split(",")) if dims else ()
        flat = np.array([float(x) for x in vals.split()] if vals.strip() else [],
                        dtype=np.float64)
        tensors[name] = flat.reshape(shape)
    return tensors, meta
