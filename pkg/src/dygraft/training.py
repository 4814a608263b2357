"""Two-phase training harness: adversarial pretraining on both domains,
then few-shot fine-tuning of the target pathway.

Training is full-batch and deterministic given the seed. The total
pretraining loss is

    L_total = L_GRL + gamma1 * (L_source + gamma2 * L_target)

where L_GRL sums the spatial and temporal domain-classifier cross-entropies
through gradient reversal over paired timestamps, L_source sums source task
cross-entropy over its snapshots, and L_target sums target task
cross-entropy over every snapshot with visible labels (the final snapshot
contributes only its few-shot training nodes).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import DomainPair, DynamicGraph
from .model import (ModelConfig, ModelState, PreparedDomain, ForwardResult,
                    init_model, model_forward, predict, prepare_domain)
from .nn import AdamState, adam_step

Array = np.ndarray

ABLATION_SWITCHES = ("no_pretrain", "no_m1", "no_unif_spatial",
                     "no_unif_temporal", "plain_sum_eq3_baseline")

# Parameter-name prefixes updated during fine-tuning; everything else stays
# bitwise frozen.
FINETUNE_PREFIXES = ("mlp_tgt.", "gnn.", "m1_proj.", "attn.", "head_tgt.")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    pretrain_epochs: int = 2000
    finetune_epochs: int = 600
    lr: float = 3e-3
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    ablation: str = ""
    early_stop: bool = False
    early_stop_patience: int = 100
    early_stop_rel: float = 1e-5

    def validate(self) -> None:
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.ablation and self.ablation not in ABLATION_SWITCHES:
            raise ValueError(
                f"unknown ablation {self.ablation!r}; expected one of "
                f"{ABLATION_SWITCHES} or empty")
        self.model.validate()


def effective_model_config(cfg: TrainConfig) -> ModelConfig:
    """Apply the ablation switch to the architecture flags."""
    m = cfg.model
    if cfg.ablation == "no_m1":
        m = replace(m, use_m1=False)
    elif cfg.ablation == "no_unif_spatial":
        m = replace(m, use_unif_spatial=False)
    elif cfg.ablation == "no_unif_temporal":
        m = replace(m, use_unif_temporal=False)
    elif cfg.ablation == "plain_sum_eq3_baseline":
        m = replace(m, aggregation="plain_sum")
    return m


@dataclass(frozen=True)
class EpochLosses:
    grl_spatial: float
    grl_temporal: float
    source: float
    target: float
    total: float


@dataclass
class TrainReport:
    phase: str
    seed: int
    epochs: list[EpochLosses]
    wall_time: float
    final_auc: float | None = None
    config: TrainConfig | None = None


def _snapshot_labels(g: DynamicGraph) -> list[dict[int, int]]:
    return [dict(s.labels) for s in g.snapshots]


def _visible_target_labels(pair: DomainPair) -> list[dict[int, int]]:
    """Target labels as training sees them: the final snapshot is masked to
    the few-shot training nodes."""
    labels = _snapshot_labels(pair.target)
    last = labels[-1]
    allowed = set(int(v) for v in pair.few_shot_train)
    labels[-1] = {v: c for v, c in last.items() if v in allowed}
    return labels


@dataclass
class LossParts:
    grl_spatial: Tensor
    grl_temporal: Tensor
    source: Tensor
    target: Tensor
    total: Tensor

    def to_record(self) -> EpochLosses:
        return EpochLosses(
            grl_spatial=float(self.grl_spatial.data),
            grl_temporal=float(self.grl_temporal.data),
            source=float(self.source.data),
            target=float(self.target.data),
            total=float(self.total.data))


def _zero() -> Tensor:
    return Tensor(np.asarray(0.0))


def _domain_ce(src_logits: Tensor, tgt_logits: Tensor) -> Tensor:
    n_src = src_logits.shape[0]
    n_tgt = tgt_logits.shape[0]
    both = ad.concat_rows([src_logits, tgt_logits])
    idx = np.arange(n_src + n_tgt)
    cls = np.concatenate([np.zeros(n_src, dtype=np.int64),
                          np.ones(n_tgt, dtype=np.int64)])
    return ad.cross_entropy(both, (idx, cls))


def assemble_losses(fwd: ForwardResult, pair: DomainPair,
                    cfg: ModelConfig) -> LossParts:
    """Build the pretraining loss ledger from one forward pass."""
    paired = len(pair.source.snapshots)

    grl_spatial = _zero()
    if cfg.use_unif_spatial:
        for i in range(paired):
            grl_spatial = ad.add(grl_spatial, _domain_ce(
                fwd.source.spatial_domain_logits[i],
                fwd.target.spatial_domain_logits[i]))

    grl_temporal = _zero()
    if cfg.use_unif_temporal and cfg.use_m1:
        for i in range(paired):
            grl_temporal = ad.add(grl_temporal, _domain_ce(
                fwd.source.temporal_domain_logits[i],
                fwd.target.temporal_domain_logits[i]))

    source = _zero()
    for i, labels in enumerate(_snapshot_labels(pair.source)):
        if labels:
            source = ad.add(source, ad.cross_entropy(fwd.source.task_logits[i],
                                                     labels))

    target = _zero()
    for i, labels in enumerate(_visible_target_labels(pair)):
        if labels:
            target = ad.add(target, ad.cross_entropy(fwd.target.task_logits[i],
                                                     labels))

    grl_total = ad.add(grl_spatial, grl_temporal)
    task = ad.add(source, ad.scale(target, cfg.gamma2))
    total = ad.add(grl_total, ad.scale(task, cfg.gamma1))
    return LossParts(grl_spatial=grl_spatial, grl_temporal=grl_temporal,
                     source=source, target=target, total=total)


def _collect_grads(params: dict[str, Tensor]) -> dict[str, Array]:
    return {k: t.grad for k, t in params.items()
            if t.requires_grad and t.grad is not None}


def _check_finite(losses: LossParts, epoch: int, phase: str) -> None:
    if not np.isfinite(losses.total.data):
        raise TrainingDiverged(
            f"{phase} loss became non-finite at epoch {epoch}")


def _improved(best: float, current: float, rel: float) -> bool:
    return current < best * (1.0 - rel) if np.isfinite(best) else True


def pretrain(pair: DomainPair, cfg: TrainConfig,
             state: ModelState | None = None) -> tuple[ModelState, TrainReport]:
    """Adversarial pretraining over both domains.

    Zero epochs return the freshly initialized state bitwise unchanged.
    With gamma1 = 0 the task heads receive exactly zero gradient and Adam
    leaves them untouched.
    """
    cfg.validate()
    model_cfg = effective_model_config(cfg)
    if state is None:
        state = init_model(model_cfg, pair.source.feature_dim,
                           pair.target.feature_dim, cfg.seed)
    start = time.perf_counter()
    prepared = (prepare_domain(pair.source, model_cfg, state.walk_seed),
                prepare_domain(pair.target, model_cfg, state.walk_seed))
    adam = AdamState(lr=cfg.lr)
    records: list[EpochLosses] = []
    best = np.inf
    since_best = 0

    for epoch in range(cfg.pretrain_epochs):
        fwd = model_forward(pair, state, prepared=prepared, trainable=True)
        losses = assemble_losses(fwd, pair, model_cfg)
        _check_finite(losses, epoch, "pretrain")
        losses.total.backward()
        adam_step(state.params, _collect_grads(fwd.params), adam)
        records.append(losses.to_record())

        if cfg.early_stop:
            if _improved(best, records[-1].total, cfg.early_stop_rel):
                best = records[-1].total
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break

    state.adam = adam
    return state, TrainReport(phase="pretrain", seed=cfg.seed, epochs=records,
                              wall_time=time.perf_counter() - start, config=cfg)


def finetune(state: ModelState, target: DynamicGraph, cfg: TrainConfig,
             label_idx: Array | None = None) -> tuple[ModelState, TrainReport]:
    """Fine-tune the target pathway on few-shot labels at the final snapshot.

    Only the target input MLP, the shared GNN stack, the temporal module,
    and the target head are updated; every other parameter stays bitwise
    frozen. Domain-adversarial branches are inactive here.
    """
    cfg.validate()
    model_cfg = state.config
    last = target.snapshots[-1]
    if label_idx is None:
        labels = dict(last.labels)
    else:
        allowed = set(int(v) for v in np.asarray(label_idx).reshape(-1))
        labels = {v: c for v, c in last.labels.items() if v in allowed}
    if not labels:
        raise ValueError("fine-tuning requires labeled nodes at the final snapshot")

    trainable = {name for name in state.params
                 if name.startswith(FINETUNE_PREFIXES)}
    prepared = prepare_domain(target, model_cfg, state.walk_seed)
    adam = AdamState(lr=cfg.lr)
    records: list[EpochLosses] = []
    start = time.perf_counter()
    from .model import _domain_forward, _wrap_params  # internal reuse

    best = np.inf
    since_best = 0
    for epoch in range(cfg.finetune_epochs):
        params = _wrap_params(state, trainable)
        fwd = _domain_forward(target, prepared, params, model_cfg, "tgt", "head_tgt")
        loss = ad.cross_entropy(fwd.task_logits[-1], labels)
        parts = LossParts(grl_spatial=_zero(), grl_temporal=_zero(),
                          source=_zero(), target=loss, total=loss)
        _check_finite(parts, epoch, "finetune")
        loss.backward()
        adam_step(state.params, _collect_grads(params), adam)
        records.append(parts.to_record())

        if cfg.early_stop:
            if _improved(best, records[-1].total, cfg.early_stop_rel):
                best = records[-1].total
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break

    return state, TrainReport(phase="finetune", seed=cfg.seed, epochs=records,
                              wall_time=time.perf_counter() - start, config=cfg)


def auc(scores: Array, labels) -> float:
    """Macro one-vs-rest area under the ROC curve.

    Tied scores contribute one half, the Mann-Whitney convention. Classes
    missing either positives or negatives are skipped; if every class is
    skipped the metric is undefined and a ValueError is raised.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if isinstance(labels, dict):
        idx = np.array(sorted(labels), dtype=np.int64)
        cls = np.array([labels[int(i)] for i in idx], dtype=np.int64)
    else:
        idx, cls = (np.asarray(x, dtype=np.int64) for x in labels)
    if idx.size == 0:
        raise ValueError("no labeled nodes to evaluate")
    z = scores[idx]

    per_class = []
    for c in range(scores.shape[1]):
        pos = z[cls == c, c]
        neg = z[cls != c, c]
        if pos.size == 0 or neg.size == 0:
            continue
        greater = (pos[:, None] > neg[None, :]).sum()
        ties = (pos[:, None] == neg[None, :]).sum()
        per_class.append((greater + 0.5 * ties) / (pos.size * neg.size))
    if not per_class:
        raise ValueError("AUC undefined: every class lacks positives or negatives")
    return float(np.mean(per_class))


def evaluate_auc(state: ModelState, pair: DomainPair) -> float:
    """Macro AUC on the held-out labeled nodes of the final target snapshot."""
    scores = predict(state, pair.target)
    last = pair.target.snapshots[-1].labels
    held = [int(v) for v in pair.held_out_eval if int(v) in last]
    labels = {v: last[v] for v in held}
    return auc(scores, labels)


def run_training(pair: DomainPair, cfg: TrainConfig) -> tuple[ModelState, TrainReport]:
    """Full protocol: pretrain both domains, fine-tune on few-shot labels,
    evaluate AUC on the held-out nodes. The no_pretrain ablation skips the
    first phase entirely (target-only baseline)."""
    cfg.validate()
    start = time.perf_counter()
    model_cfg = effective_model_config(cfg)
    if cfg.ablation == "no_pretrain" or cfg.pretrain_epochs == 0:
        state = init_model(model_cfg, pair.source.feature_dim,
                           pair.target.feature_dim, cfg.seed)
        pre_records: list[EpochLosses] = []
    else:
        state, pre_report = pretrain(pair, cfg)
        pre_records = pre_report.epochs
    state, fine_report = finetune(state, pair.target, cfg,
                                  label_idx=pair.few_shot_train)
    final = evaluate_auc(state, pair)
    report = TrainReport(phase="full", seed=cfg.seed,
                         epochs=pre_records + fine_report.epochs,
                         wall_time=time.perf_counter() - start,
                         final_auc=final, config=cfg)
    return state, report


@dataclass(frozen=True)
class AblationRow:
    config_name: str
    seed: int
    auc: float


@dataclass
class AblationTable:
    rows: list[AblationRow]

    def mean_auc(self, config_name: str) -> float:
        vals = [r.auc for r in self.rows if r.config_name == config_name]
        if not vals:
            raise KeyError(config_name)
        return float(np.mean(vals))

    def aucs(self, config_name: str) -> list[float]:
        return [r.auc for r in self.rows if r.config_name == config_name]

    def to_csv(self) -> str:
        lines = ["config,seed,auc"]
        lines += [f"{r.config_name},{r.seed},{format(r.auc, '.17g')}"
                  for r in self.rows]
        return "\n".join(lines) + "\n"


def ablation_run(pair: DomainPair, base_cfg: TrainConfig,
                 switches: Sequence[str], seeds: Sequence[int]) -> AblationTable:
    """Train the full model plus each ablation across seeds.

    Rows are deterministic: identical (config, seed) pairs always produce
    identical AUC values.
    """
    for s in switches:
        if s not in ABLATION_SWITCHES:
            raise ValueError(f"unknown ablation switch {s!r}")
    rows = []
    names = ["full"] + list(switches)
    for name in names:
        ablation = "" if name == "full" else name
        for seed in seeds:
            cfg = replace(base_cfg, ablation=ablation, seed=int(seed))
            _, report = run_training(pair, cfg)
            rows.append(AblationRow(config_name=name, seed=int(seed),
                                    auc=report.final_auc))
    return AblationTable(rows=rows)


@dataclass(frozen=True)
class LipschitzEstimate:
    r_emp: float
    rho_emp: float | None = None


def estimate_lipschitz(fn: Callable[[Array], Array], input_dim: int | None = None,
                       pairs: Sequence[tuple[Array, Array]] | None = None,
                       trials: int = 200, seed: int = 0,
                       loss_fn: Callable[[Array], float] | None = None) -> LipschitzEstimate:
    """Largest observed difference quotient of ``fn`` over point pairs.

    Pass explicit ``pairs`` or let Gaussian pairs be drawn (requires
    input_dim). The quotient uses Euclidean norms on inputs and outputs, so
    the result lower-bounds the true Lipschitz constant. When ``loss_fn``
    maps an output vector to a scalar, its own quotient over the sampled
    output pairs is reported as rho_emp.
    """
    if pairs is None:
        if input_dim is None:
            raise ValueError("need input_dim when pairs are not given")
        rng = np.random.default_rng(seed)
        pairs = [(rng.standard_normal(input_dim), rng.standard_normal(input_dim))
                 for _ in range(trials)]
    r_emp = 0.0
    rho_emp = 0.0
    seen_loss = False
    for x, y in pairs:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dx = np.linalg.norm(x - y)
        if dx == 0.0:
            continue
        fx = np.atleast_1d(np.asarray(fn(x), dtype=np.float64))
        fy = np.atleast_1d(np.asarray(fn(y), dtype=np.float64))
        r_emp = max(r_emp, float(np.linalg.norm(fx - fy) / dx))
        if loss_fn is not None:
            dout = np.linalg.norm(fx - fy)
            if dout > 0.0:
                seen_loss = True
                rho_emp = max(rho_emp,
                              abs(float(loss_fn(fx)) - float(loss_fn(fy))) / dout)
    return LipschitzEstimate(r_emp=r_emp,
                             rho_emp=rho_emp if (loss_fn and seen_loss) else None)
