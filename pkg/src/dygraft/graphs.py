"""Core data model for dynamic graphs.

A dynamic graph is an ordered sequence of snapshots over one node set.
Graphs are undirected, without self-loops, and each edge is stored once as
(u, v) with u < v. All instances are treated as immutable after
construction; arrays are marked read-only to enforce that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


def _frozen_array(value, dtype) -> Array:
    arr = np.ascontiguousarray(np.asarray(value, dtype=dtype))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One timestamped graph observation.

    labels maps node index to class index and may cover any subset of the
    nodes (empty means unlabeled).
    """

    node_count: int
    edges: Array           # [m, 2] int64, u < v, each edge once
    features: Array        # [node_count, feature_dim] float64
    timestamp: float
    labels: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "edges",
                           _frozen_array(self.edges, np.int64).reshape(-1, 2))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D array")
        object.__setattr__(self, "features", _frozen_array(feats, np.float64))
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "labels",
                           {int(k): int(v) for k, v in self.labels.items()})

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbor_lists(self) -> list[Array]:
        """Sorted neighbor index array per node."""
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            nbrs[u].append(int(v))
            nbrs[v].append(int(u))
        return [np.array(sorted(n), dtype=np.int64) for n in nbrs]


@dataclass(frozen=True, eq=False)
class DynamicGraph:
    """An ordered snapshot sequence sharing node identity and feature space."""

    snapshots: tuple[Snapshot, ...]
    feature_dim: int
    class_count: int
    domain_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def timestamps(self) -> list[float]:
        return [s.timestamp for s in self.snapshots]


@dataclass(frozen=True, eq=False)
class DomainPair:
    """A source/target pair for transfer experiments.

    The target carries one more snapshot than the source; its final
    snapshot's labeled nodes are split into a few-shot training set and a
    held-out evaluation set.
    """

    source: DynamicGraph
    target: DynamicGraph
    few_shot_train: Array   # node indices into the final target snapshot
    held_out_eval: Array

    def __post_init__(self):
        object.__setattr__(self, "few_shot_train",
                           _frozen_array(np.sort(np.asarray(self.few_shot_train)), np.int64))
        object.__setattr__(self, "held_out_eval",
                           _frozen_array(np.sort(np.asarray(self.held_out_eval)), np.int64))


@dataclass(frozen=True)
class Violation:
    snapshot_index: int | None
    message: str

    def __str__(self) -> str:
        where = "graph" if self.snapshot_index is None else f"snapshot {self.snapshot_index}"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def validate_dynamic_graph(g: DynamicGraph) -> ValidationReport:
    """Check every structural invariant; collects violations, never raises."""
    out: list[Violation] = []

    def bad(idx, msg):
        out.append(Violation(idx, msg))

    if g.feature_dim < 1:
        bad(None, f"feature_dim must be >= 1, got {g.feature_dim}")
    if g.class_count < 1:
        bad(None, f"class_count must be >= 1, got {g.class_count}")
    if not g.snapshots:
        bad(None, "graph has no snapshots")

    ts = g.timestamps
    for i in range(1, len(ts)):
        if not ts[i] > ts[i - 1]:
            bad(i, f"timestamps not strictly increasing: {ts[i - 1]} then {ts[i]}")

    for i, s in enumerate(g.snapshots):
        n = s.node_count
        if s.features.shape[0] != n:
            bad(i, f"features have {s.features.shape[0]} rows for {n} nodes")
        if s.features.shape[1] != g.feature_dim:
            bad(i, f"feature dim {s.features.shape[1]} != declared {g.feature_dim}")
        seen = set()
        for j, (u, v) in enumerate(s.edges):
            u, v = int(u), int(v)
            if u == v:
                bad(i, f"edge {j} is a self-loop on node {u}")
            elif not (0 <= u < v < n) and not (0 <= v < u < n):
                if u < 0 or v < 0 or u >= n or v >= n:
                    bad(i, f"edge {j} endpoint out of range: ({u}, {v})")
            if u > v:
                bad(i, f"edge {j} stored as ({u}, {v}); expected u < v")
                u, v = v, u
            if (u, v) in seen:
                bad(i, f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        for node, cls in s.labels.items():
            if not 0 <= node < n:
                bad(i, f"label on node {node} outside [0, {n})")
            if not 0 <= cls < g.class_count:
                bad(i, f"label class {cls} outside [0, {g.class_count})")

    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class SnapshotStats:
    snapshot_index: int
    timestamp: float
    node_count: int
    edge_count: int
    labeled_count: int
    label_coverage: float
    density: float


def snapshot_stats(g: DynamicGraph) -> list[SnapshotStats]:
    """Per-snapshot summary; degenerate snapshots yield all-zero rows."""
    rows = []
    for i, s in enumerate(g.snapshots):
        n = s.node_count
        m = s.edge_count
        pairs = n * (n - 1) / 2
        rows.append(SnapshotStats(
            snapshot_index=i,
            timestamp=s.timestamp,
            node_count=n,
            edge_count=m,
            labeled_count=len(s.labels),
            label_coverage=(len(s.labels) / n) if n else 0.0,
            density=(m / pairs) if pairs else 0.0,
        ))
    return rows
