"""Weisfeiler-Lehman subtree refinement over a snapshot.

Two modes. The continuous mode averages real-valued features down the
subtree pattern: each depth halves the weight between a node's previous
value and the mean over its neighbors' previous values, so every output
entry is a convex combination of input entries. The discrete mode is
classical WL label refinement; symbols are canonical strings, one-hot
encoded against a table shared by all depths so every depth matrix has the
same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Snapshot


@dataclass(frozen=True)
class WlEmbedding:
    """Per-depth node representations, depths 0..depth_m inclusive."""

    per_depth: tuple[np.ndarray, ...]
    depth_m: int
    mode: str
    # Discrete mode only: canonical symbol per node per depth.
    symbols: tuple[tuple[str, ...], ...] | None = None


def wl_refine_continuous(snapshot: Snapshot, depth_m: int) -> WlEmbedding:
    """Continuous refinement of the snapshot's feature matrix.

    per_depth[m] = 0.5 * (per_depth[m-1] + neighbor mean of per_depth[m-1]);
    an isolated node falls back to its own previous value.
    """
    if depth_m < 0:
        raise ValueError("depth_m must be >= 0")
    nbrs = snapshot.neighbor_lists()
    current = np.array(snapshot.features, dtype=np.float64)
    out = [current]
    for _ in range(depth_m):
        prev = out[-1]
        nxt = np.empty_like(prev)
        for v in range(snapshot.node_count):
            neigh = nbrs[v]
            agg = prev[neigh].mean(axis=0) if neigh.size else prev[v]
            nxt[v] = 0.5 * (prev[v] + agg)
        out.append(nxt)
    return WlEmbedding(per_depth=tuple(out), depth_m=depth_m, mode="continuous")


def wl_refine_discrete(snapshot: Snapshot, depth_m: int,
                       initial_labels=None) -> WlEmbedding:
    """Classical WL label refinement with canonical string symbols.

    ``initial_labels`` is a per-node sequence; all-equal labels by default.
    A depth-m symbol is built from the node's previous symbol and the
    sorted multiset of its neighbors' previous symbols, so two isomorphic
    graphs produce identical symbol multisets at every depth regardless of
    node order. One-hot columns are indexed by the sorted global symbol
    table, shared across depths.
    """
    if depth_m < 0:
        raise ValueError("depth_m must be >= 0")
    n = snapshot.node_count
    if initial_labels is None:
        initial = ["0"] * n
    else:
        initial = [str(x) for x in initial_labels]
        if len(initial) != n:
            raise ValueError(f"{len(initial)} initial labels for {n} nodes")

    nbrs = snapshot.neighbor_lists()
    depths: list[list[str]] = [initial]
    for _ in range(depth_m):
        prev = depths[-1]
        nxt = [
            prev[v] + "|" + ",".join(sorted(prev[u] for u in nbrs[v]))
            for v in range(n)
        ]
        depths.append(nxt)

    table = {sym: i for i, sym in enumerate(sorted({s for lv in depths for s in lv}))}
    per_depth = []
    for level in depths:
        mat = np.zeros((n, len(table)), dtype=np.float64)
        for v, sym in enumerate(level):
            mat[v, table[sym]] = 1.0
        per_depth.append(mat)
    return WlEmbedding(per_depth=tuple(per_depth), depth_m=depth_m,
                       mode="discrete",
                       symbols=tuple(tuple(level) for level in depths))
