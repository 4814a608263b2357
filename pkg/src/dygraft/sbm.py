"""Evolving stochastic block model benchmark generator.

Produces a source/target domain pair with shared block structure: block
membership drifts over time, features are unit-variance Gaussians around
per-block centers, and the target's centers are offset from the source's so
the domains disagree while staying related. The target is label-scarce: only
its final snapshot carries labels, split into a few-shot training set and a
held-out evaluation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import DomainPair, DynamicGraph, Snapshot

# Distance between adjacent block centers, in feature-space units. Unit
# feature variance makes this the main knob for class separability.
_CENTER_SCALE = 2.0


class SbmConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SbmConfig:
    """Knobs for one generated domain.

    feature_center_shift offsets this domain's block centers along the
    all-ones direction by that Euclidean distance; use 0 for the source and
    a positive value for the target to create domain shift.
    """

    block_count: int = 2
    nodes_per_block: int = 50
    intra_p: float = 0.1
    inter_p: float = 0.02
    feature_dim: int = 4
    feature_center_shift: float = 0.0
    drift_rate: float = 0.1
    T: int = 5
    label_noise: float = 0.05
    few_shot_k: int = 5

    @property
    def node_count(self) -> int:
        return self.block_count * self.nodes_per_block

    def validate(self) -> None:
        if self.block_count < 2:
            raise SbmConfigError(f"block_count must be >= 2, got {self.block_count}")
        if self.nodes_per_block < 1:
            raise SbmConfigError("nodes_per_block must be >= 1")
        for name in ("intra_p", "inter_p", "drift_rate", "label_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SbmConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.intra_p <= self.inter_p:
            raise SbmConfigError(
                f"intra_p ({self.intra_p}) must exceed inter_p ({self.inter_p})")
        if self.feature_dim < 1:
            raise SbmConfigError("feature_dim must be >= 1")
        if self.T < 1:
            raise SbmConfigError("T must be >= 1")
        if self.few_shot_k < 1:
            raise SbmConfigError("few_shot_k must be >= 1")


def _block_centers(cfg: SbmConfig) -> np.ndarray:
    """Deterministic, well-separated block centers.

    Block b sits at +/- _CENTER_SCALE along coordinate b mod d, with the
    sign alternating on wrap-around, then shifted along ones/sqrt(d) by
    feature_center_shift.
    """
    d = cfg.feature_dim
    centers = np.zeros((cfg.block_count, d))
    for b in range(cfg.block_count):
        sign = 1.0 if (b // d) % 2 == 0 else -1.0
        centers[b, b % d] = sign * _CENTER_SCALE
    centers += cfg.feature_center_shift * np.ones(d) / np.sqrt(d)
    return centers


def _drift_memberships(membership: np.ndarray, cfg: SbmConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Move a drift_rate fraction of nodes to a uniformly random other block."""
    out = membership.copy()
    n = out.size
    n_move = int(round(cfg.drift_rate * n))
    if n_move == 0:
        return out
    moved = rng.choice(n, size=n_move, replace=False)
    for node in moved:
        offset = rng.integers(1, cfg.block_count)
        out[node] = (out[node] + offset) % cfg.block_count
    return out


def _sample_edges(membership: np.ndarray, cfg: SbmConfig,
                  rng: np.random.Generator) -> np.ndarray:
    n = membership.size
    iu, ju = np.triu_indices(n, k=1)
    same = membership[iu] == membership[ju]
    p = np.where(same, cfg.intra_p, cfg.inter_p)
    keep = rng.random(p.size) < p
    return np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)


def _noisy_labels(membership: np.ndarray, cfg: SbmConfig,
                  rng: np.random.Generator) -> np.ndarray:
    labels = membership.copy()
    flip = rng.random(labels.size) < cfg.label_noise
    for node in np.nonzero(flip)[0]:
        offset = rng.integers(1, cfg.block_count)
        labels[node] = (labels[node] + offset) % cfg.block_count
    return labels


def _generate_domain(cfg: SbmConfig, snapshots_wanted: int, domain_tag: str,
                     rng: np.random.Generator) -> tuple[DynamicGraph, np.ndarray]:
    """Returns the graph plus the noisy label vector of the final snapshot."""
    centers = _block_centers(cfg)
    n = cfg.node_count
    membership = np.repeat(np.arange(cfg.block_count), cfg.nodes_per_block)

    snaps = []
    final_labels = None
    for i in range(snapshots_wanted):
        if i > 0:
            membership = _drift_memberships(membership, cfg, rng)
        edges = _sample_edges(membership, cfg, rng)
        features = centers[membership] + rng.standard_normal((n, cfg.feature_dim))
        labels_vec = _noisy_labels(membership, cfg, rng)
        final_labels = labels_vec
        if domain_tag == "source":
            labels = {int(v): int(labels_vec[v]) for v in range(n)}
        elif i == snapshots_wanted - 1:
            labels = {int(v): int(labels_vec[v]) for v in range(n)}
        else:
            labels = {}
        snaps.append(Snapshot(node_count=n, edges=edges, features=features,
                              timestamp=float(i), labels=labels))
    graph = DynamicGraph(snapshots=tuple(snaps), feature_dim=cfg.feature_dim,
                         class_count=cfg.block_count, domain_tag=domain_tag)
    return graph, final_labels


def generate_evolving_sbm(src_cfg: SbmConfig, tgt_cfg: SbmConfig,
                          seed: int) -> DomainPair:
    """Generate a source graph with T snapshots and a target with T + 1.

    Deterministic given the configs and seed. The few-shot training set
    holds exactly few_shot_k nodes per class at the final target snapshot;
    every other labeled node there goes to the held-out evaluation set.
    """
    src_cfg.validate()
    tgt_cfg.validate()
    if tgt_cfg.block_count != src_cfg.block_count:
        raise SbmConfigError("source and target must share block_count")
    if tgt_cfg.feature_dim != src_cfg.feature_dim:
        raise SbmConfigError("source and target must share feature_dim")

    rng = np.random.default_rng(seed)
    source, _ = _generate_domain(src_cfg, src_cfg.T, "source", rng)
    target, last_labels = _generate_domain(tgt_cfg, src_cfg.T + 1, "target", rng)

    few_shot: list[int] = []
    for cls in range(tgt_cfg.block_count):
        members = np.nonzero(last_labels == cls)[0]
        if members.size < tgt_cfg.few_shot_k:
            raise SbmConfigError(
                f"class {cls} has {members.size} labeled nodes at the final "
                f"snapshot; few_shot_k={tgt_cfg.few_shot_k} is not satisfiable")
        few_shot.extend(int(v) for v in rng.choice(members, size=tgt_cfg.few_shot_k,
                                                   replace=False))
    few_shot_arr = np.array(sorted(few_shot), dtype=np.int64)
    held_out = np.setdiff1d(np.arange(tgt_cfg.node_count), few_shot_arr)
    return DomainPair(source=source, target=target,
                      few_shot_train=few_shot_arr, held_out_eval=held_out)
