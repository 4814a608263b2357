"""The dual-branch transfer model for dynamic graphs.

Per snapshot, domain-specific input MLPs map raw features into a shared
width, a shared GNN stack produces spatial embeddings, and random-walk
contexts plus continuous-time positional encodings feed a shared
self-attention layer that summarizes each node's trajectory. Two
gradient-reversal branches push the spatial and temporal representations
toward domain invariance while task heads classify nodes per domain.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import DomainPair, DynamicGraph, Snapshot
from .nn import (AdamState, glorot, graph_conv, linear, normalized_adjacency,
                 read_tensor_manifest, seeded_rng, self_attention,
                 write_tensor_manifest)

Array = np.ndarray

AGGREGATIONS = ("attention_mean", "plain_sum")
WALK_MODES = ("sampled", "expected")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and loss-mixing knobs.

    aggregation "attention_mean" runs shared self-attention over a node's
    per-snapshot encodings and averages the output rows; "plain_sum" skips
    attention and sums the encodings directly. use_m1 switches the whole
    temporal branch; the use_unif flags switch the two domain-adversarial
    branches.
    """

    d_u: int = 8
    d_head: int = 8
    gnn_out: int = 16
    gnn_layers: int = 2
    walk_length: int = 3
    walks_per_node: int = 8
    grl_lambda: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    pe_base: float = 10000.0
    source_classes: int = 2
    target_classes: int = 2
    aggregation: str = "attention_mean"
    use_m1: bool = True
    use_unif_spatial: bool = True
    use_unif_temporal: bool = True
    walk_mode: str = "sampled"

    def validate(self) -> None:
        for name in ("d_u", "d_head", "gnn_out", "gnn_layers", "walk_length",
                     "walks_per_node", "source_classes", "target_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.walk_mode not in WALK_MODES:
            raise ValueError(f"walk_mode must be one of {WALK_MODES}")
        if self.pe_base <= 1.0:
            raise ValueError("pe_base must exceed 1")

    @property
    def temporal_dim(self) -> int:
        """Width of the representation the task heads consume."""
        if not self.use_m1:
            return self.gnn_out
        if self.aggregation == "attention_mean":
            return self.d_head
        return self.d_u


@dataclass
class ModelState:
    """All learnable parameters plus optimizer state and configuration."""

    params: dict[str, Array]
    config: ModelConfig
    d_src: int
    d_tgt: int
    walk_seed: int
    adam: AdamState | None = None

    def copy_params(self) -> dict[str, Array]:
        return {k: v.copy() for k, v in self.params.items()}


def init_model(cfg: ModelConfig, d_src: int, d_tgt: int, seed: int) -> ModelState:
    """Initialize parameters from per-name seeded streams.

    Each parameter's values depend only on (seed, name), so two model
    variants that share a parameter name initialize it identically even if
    their parameter sets differ.
    """
    cfg.validate()
    params: dict[str, Array] = {}

    def make(name: str, fan_in: int, fan_out: int, shape=None):
        rng = seeded_rng(seed, name)
        params[name] = glorot(rng, fan_in, fan_out, shape)

    def make_bias(name: str, width: int):
        params[name] = np.zeros(width, dtype=np.float64)

    for tag, d_in in (("src", d_src), ("tgt", d_tgt)):
        make(f"mlp_{tag}.w1", d_in, cfg.d_u)
        make_bias(f"mlp_{tag}.b1", cfg.d_u)
        make(f"mlp_{tag}.w2", cfg.d_u, cfg.d_u)
        make_bias(f"mlp_{tag}.b2", cfg.d_u)

    width = cfg.d_u
    for layer in range(cfg.gnn_layers):
        out = cfg.gnn_out
        make(f"gnn.{layer}.w", width, out)
        width = out

    if cfg.use_m1:
        make("m1_proj.w", cfg.gnn_out, cfg.d_u)
        if cfg.aggregation == "attention_mean":
            make("attn.wq", cfg.d_u, cfg.d_head)
            make("attn.wk", cfg.d_u, cfg.d_head)
            make("attn.wv", cfg.d_u, cfg.d_head)

    rep = cfg.temporal_dim
    make("head_src.w", rep, cfg.source_classes)
    make_bias("head_src.b", cfg.source_classes)
    make("head_tgt.w", rep, cfg.target_classes)
    make_bias("head_tgt.b", cfg.target_classes)

    if cfg.use_unif_spatial:
        make("dom_spatial.w", cfg.gnn_out, 2)
        make_bias("dom_spatial.b", 2)
    if cfg.use_unif_temporal and cfg.use_m1:
        make("dom_temporal.w", rep, 2)
        make_bias("dom_temporal.b", 2)

    return ModelState(params=params, config=cfg, d_src=d_src, d_tgt=d_tgt,
                      walk_seed=seed)


# --- random-walk context ------------------------------------------------------


def walk_visit_operator(snapshot: Snapshot, walk_length: int, walks_per_node: int,
                        seed: int, snapshot_index: int,
                        mode: str = "sampled") -> Array:
    """Row-stochastic matrix V with context = V @ spatial_embeddings.

    Sampled mode: row v averages visit counts over walks_per_node uniform
    random walks of walk_length steps from v (start node included); the
    walk for (seed, snapshot_index, v, walk) is its own deterministic
    stream, so results are reproducible and independent of evaluation
    order. Isolated nodes stay put. Expected mode replaces sampling with
    the exact walk expectation, the average of transition-matrix powers.
    """
    n = snapshot.node_count
    if mode == "expected":
        p = np.zeros((n, n))
        nbrs = snapshot.neighbor_lists()
        for v in range(n):
            if nbrs[v].size:
                p[v, nbrs[v]] = 1.0 / nbrs[v].size
            else:
                p[v, v] = 1.0
        acc = np.eye(n)
        power = np.eye(n)
        for _ in range(walk_length):
            power = power @ p
            acc += power
        return acc / (walk_length + 1)
    if mode != "sampled":
        raise ValueError(f"unknown walk mode {mode!r}")

    nbrs = snapshot.neighbor_lists()
    counts = np.zeros((n, n), dtype=np.float64)
    for v in range(n):
        neigh = nbrs[v]
        for w in range(walks_per_node):
            ss = np.random.SeedSequence(entropy=seed,
                                        spawn_key=(snapshot_index, v, w))
            rng = np.random.Generator(np.random.Philox(ss))
            counts[v, v] += 1.0
            if neigh.size == 0:
                counts[v, v] += walk_length
                continue
            current = v
            draws = rng.random(walk_length)
            for step in range(walk_length):
                options = nbrs[current]
                current = int(options[int(draws[step] * options.size)])
                counts[v, current] += 1.0
    return counts / (walks_per_node * (walk_length + 1))


def temporal_context(g: DynamicGraph, spatial, cfg: ModelConfig,
                     seed: int) -> list[Tensor]:
    """Walk-averaged spatial embeddings, one [n, gnn_out] tensor per snapshot."""
    out = []
    for i, snap in enumerate(g.snapshots):
        op = walk_visit_operator(snap, cfg.walk_length, cfg.walks_per_node,
                                 seed, i, cfg.walk_mode)
        emb = spatial[i] if isinstance(spatial[i], Tensor) else Tensor(spatial[i])
        out.append(ad.matmul(Tensor(op), emb))
    return out


# --- positional encoding ------------------------------------------------------


def positional_encoding(t: float, d_u: int, pe_base: float = 10000.0) -> Array:
    """Continuous-time sinusoidal encoding of a timestamp."""
    pe = np.zeros(d_u, dtype=np.float64)
    for i in range(0, d_u, 2):
        div = pe_base ** (i / d_u)
        pe[i] = np.sin(t / div)
        if i + 1 < d_u:
            pe[i + 1] = np.cos(t / div)
    return pe


def temporal_position_encode(context: Tensor, t: float, proj_w: Tensor,
                             pe_base: float = 10000.0) -> Tensor:
    """Project a context matrix to width d_u and add the timestamp encoding."""
    proj = ad.matmul(context if isinstance(context, Tensor) else Tensor(context),
                     proj_w)
    pe = positional_encoding(t, proj_w.shape[1], pe_base)
    return ad.add(proj, Tensor(pe))


# --- prepared graph structures -------------------------------------------------


@dataclass
class PreparedDomain:
    """Per-snapshot constants reused across epochs: normalized adjacency
    and the walk visit operator."""

    adj: list[Array]
    visit: list[Array]


def prepare_domain(g: DynamicGraph, cfg: ModelConfig, walk_seed: int) -> PreparedDomain:
    n0 = g.snapshots[0].node_count
    for s in g.snapshots:
        if s.node_count != n0:
            raise ValueError("node count must be constant across a domain's snapshots")
    adj = [normalized_adjacency(s.node_count, s.edges) for s in g.snapshots]
    visit = []
    if cfg.use_m1:
        visit = [walk_visit_operator(s, cfg.walk_length, cfg.walks_per_node,
                                     walk_seed, i, cfg.walk_mode)
                 for i, s in enumerate(g.snapshots)]
    return PreparedDomain(adj=adj, visit=visit)


# --- forward pass ---------------------------------------------------------------


@dataclass
class DomainForward:
    """Everything the losses need for one domain."""

    spatial: list[Tensor]                 # per snapshot [n, gnn_out]
    temporal_rows: Tensor | None          # [n, T, rep] per-snapshot temporal reps
    representation: Tensor                # [n, rep] aggregated representation
    task_logits: list[Tensor]             # per snapshot [n, classes]
    spatial_domain_logits: list[Tensor]   # per snapshot [n, 2], through GRL
    temporal_domain_logits: list[Tensor]  # per snapshot [n, 2], through GRL


@dataclass
class ForwardResult:
    source: DomainForward
    target: DomainForward
    params: dict[str, Tensor]

    # Field names kept close to what downstream tooling expects.
    @property
    def src_task_logits(self) -> list[Tensor]:
        return self.source.task_logits

    @property
    def tgt_task_logits(self) -> list[Tensor]:
        return self.target.task_logits


def _mlp(x: Tensor, params: dict[str, Tensor], tag: str) -> Tensor:
    h = ad.relu(linear(x, params[f"mlp_{tag}.w1"], params[f"mlp_{tag}.b1"]))
    return linear(h, params[f"mlp_{tag}.w2"], params[f"mlp_{tag}.b2"])


def _wrap_params(state: ModelState, trainable) -> dict[str, Tensor]:
    """Wrap raw parameter arrays as leaves; ``trainable`` is a bool or a
    set of parameter names that should collect gradients."""
    if isinstance(trainable, bool):
        return {k: Tensor(v, requires_grad=trainable)
                for k, v in state.params.items()}
    return {k: Tensor(v, requires_grad=(k in trainable))
            for k, v in state.params.items()}


def _slice_timestep(rows: Tensor, n: int, t_count: int, i: int, rep: int) -> Tensor:
    flat = ad.reshape(rows, (n * t_count, rep))
    idx = np.arange(n) * t_count + i
    return ad.gather_rows(flat, idx)


def _domain_forward(g: DynamicGraph, prepared: PreparedDomain,
                    params: dict[str, Tensor], cfg: ModelConfig, tag: str,
                    head: str) -> DomainForward:
    n = g.snapshots[0].node_count
    t_count = len(g.snapshots)

    spatial = []
    for i, snap in enumerate(g.snapshots):
        h = _mlp(Tensor(snap.features), params, tag)
        for layer in range(cfg.gnn_layers):
            h = graph_conv(h, prepared.adj[i], params[f"gnn.{layer}.w"])
        spatial.append(h)

    spatial_dom = []
    if cfg.use_unif_spatial:
        for h in spatial:
            rev = ad.grl(h, cfg.grl_lambda)
            spatial_dom.append(linear(rev, params["dom_spatial.w"],
                                      params["dom_spatial.b"]))

    temporal_rows = None
    if cfg.use_m1:
        encoded = []
        for i, snap in enumerate(g.snapshots):
            ctx = ad.matmul(Tensor(prepared.visit[i]), spatial[i])
            encoded.append(temporal_position_encode(ctx, snap.timestamp,
                                                    params["m1_proj.w"],
                                                    cfg.pe_base))
        stacked = ad.transpose(
            ad.reshape(ad.concat_rows(encoded), (t_count, n, cfg.d_u)),
            (1, 0, 2))
        if cfg.aggregation == "attention_mean":
            temporal_rows = self_attention(stacked, params["attn.wq"],
                                           params["attn.wk"], params["attn.wv"])
            representation = ad.mean(temporal_rows, axis=1)
        else:
            temporal_rows = stacked
            representation = ad.scale(ad.mean(stacked, axis=1), float(t_count))
    else:
        stacked = ad.transpose(
            ad.reshape(ad.concat_rows(spatial), (t_count, n, cfg.gnn_out)),
            (1, 0, 2))
        representation = ad.mean(stacked, axis=1)

    rep_width = cfg.temporal_dim
    logits = linear(representation, params[f"{head}.w"], params[f"{head}.b"])
    task_logits = [logits] * t_count

    temporal_dom = []
    if cfg.use_unif_temporal and cfg.use_m1:
        for i in range(t_count):
            row = _slice_timestep(temporal_rows, n, t_count, i, rep_width)
            rev = ad.grl(row, cfg.grl_lambda)
            temporal_dom.append(linear(rev, params["dom_temporal.w"],
                                       params["dom_temporal.b"]))

    return DomainForward(spatial=spatial, temporal_rows=temporal_rows,
                         representation=representation, task_logits=task_logits,
                         spatial_domain_logits=spatial_dom,
                         temporal_domain_logits=temporal_dom)


def temporal_encoding(g: DynamicGraph, spatial, params: dict[str, Tensor],
                      cfg: ModelConfig, seed: int) -> Tensor:
    """Aggregate a node's position-encoded contexts across snapshots.

    Stacks per-snapshot encodings into [n, T, d_u], applies the shared
    attention (attention_mean) or nothing (plain_sum), and aggregates rows
    by mean or sum respectively. Returns [n, temporal_dim].
    """
    n = g.snapshots[0].node_count
    t_count = len(g.snapshots)
    contexts = temporal_context(g, spatial, cfg, seed)
    encoded = [temporal_position_encode(c, s.timestamp, params["m1_proj.w"],
                                        cfg.pe_base)
               for c, s in zip(contexts, g.snapshots)]
    stacked = ad.transpose(
        ad.reshape(ad.concat_rows(encoded), (t_count, n, cfg.d_u)), (1, 0, 2))
    if cfg.aggregation == "attention_mean":
        rows = self_attention(stacked, params["attn.wq"], params["attn.wk"],
                              params["attn.wv"])
        return ad.mean(rows, axis=1)
    return ad.scale(ad.mean(stacked, axis=1), float(t_count))


def model_forward(pair: DomainPair, state: ModelState,
                  walk_seed: int | None = None,
                  prepared: tuple[PreparedDomain, PreparedDomain] | None = None,
                  trainable=True) -> ForwardResult:
    """Run both domains through the shared trunk.

    Task logits are produced once from the aggregated representation and
    repeated per snapshot (labels may differ per snapshot). Domain-classifier
    logits pass through gradient reversal inside this call. Forward output
    does not depend on domain tags or the GRL coefficient.
    """
    cfg = state.config
    seed = state.walk_seed if walk_seed is None else walk_seed
    if prepared is None:
        prepared = (prepare_domain(pair.source, cfg, seed),
                    prepare_domain(pair.target, cfg, seed))
    params = _wrap_params(state, trainable)
    src = _domain_forward(pair.source, prepared[0], params, cfg, "src", "head_src")
    tgt = _domain_forward(pair.target, prepared[1], params, cfg, "tgt", "head_tgt")
    return ForwardResult(source=src, target=tgt, params=params)


def predict(state: ModelState, target: DynamicGraph,
            snapshot_index: int = -1,
            prepared: PreparedDomain | None = None) -> Array:
    """Class-probability rows for the target's nodes.

    Uses the walk seed recorded in the state, so repeated calls return
    bitwise-identical scores. The aggregated representation summarizes the
    whole observed window; snapshot_index is accepted for interface
    symmetry and bounds checking.
    """
    cfg = state.config
    n_snaps = len(target.snapshots)
    if not -n_snaps <= snapshot_index < n_snaps:
        raise IndexError(f"snapshot_index {snapshot_index} out of range")
    if prepared is None:
        prepared = prepare_domain(target, cfg, state.walk_seed)
    params = _wrap_params(state, False)
    fwd = _domain_forward(target, prepared, params, cfg, "tgt", "head_tgt")
    scores = ad.softmax(fwd.task_logits[snapshot_index])
    return scores.data


# --- checkpointing --------------------------------------------------------------


def save_state(state: ModelState, path: str | Path) -> None:
    """Write every named tensor (parameters plus Adam moments) and the
    configuration to one decimal-text manifest."""
    tensors = dict(state.params)
    meta = {f"config.{f.name}": str(getattr(state.config, f.name))
            for f in dataclasses.fields(ModelConfig)}
    meta["d_src"] = str(state.d_src)
    meta["d_tgt"] = str(state.d_tgt)
    meta["walk_seed"] = str(state.walk_seed)
    if state.adam is not None:
        meta["adam.t"] = str(state.adam.t)
        meta["adam.lr"] = format(state.adam.lr, ".17g")
        for name, arr in state.adam.m.items():
            tensors[f"adam.m.{name}"] = arr
        for name, arr in state.adam.v.items():
            tensors[f"adam.v.{name}"] = arr
    write_tensor_manifest(path, tensors, meta)


def _parse_config_meta(meta: dict[str, str]) -> ModelConfig:
    kwargs = {}
    for f in dataclasses.fields(ModelConfig):
        raw = meta.get(f"config.{f.name}")
        if raw is None:
            continue
        if f.type == "bool":
            kwargs[f.name] = raw == "True"
        elif f.type == "int":
            kwargs[f.name] = int(raw)
        elif f.type == "float":
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = raw
    return ModelConfig(**kwargs)


def load_state(path: str | Path) -> ModelState:
    tensors, meta = read_tensor_manifest(path)
    cfg = _parse_config_meta(meta)
    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    adam = None
    if "adam.t" in meta:
        adam = AdamState(lr=float(meta.get("adam.lr", 3e-3)))
        adam.t = int(meta["adam.t"])
        adam.m = {k[len("adam.m."):]: v for k, v in tensors.items()
                  if k.startswith("adam.m.")}
        adam.v = {k[len("adam.v."):]: v for k, v in tensors.items()
                  if k.startswith("adam.v.")}
    return ModelState(params=params, config=cfg, d_src=int(meta["d_src"]),
                      d_tgt=int(meta["d_tgt"]), walk_seed=int(meta["walk_seed"]),
                      adam=adam)
