"""Dynamic-graph transfer learning at desk scale.

Distribution distances between evolving graphs (refinement embeddings fed
to Wasserstein, Sinkhorn, or MMD ground metrics), generalization-bound
evaluators, a small reverse-mode autodiff engine, and a two-domain
adversarial training pipeline with a synthetic evolving-blocks benchmark.
"""

from .autodiff import GradCheckReport, Tensor, grad_check
from .bounds import (BoundInputs, BoundReport, CheckReport, averaged_error_bound,
                     empirical_error, lemma1_check, min_error_bound,
                     rademacher_estimate)
from .dataset_io import (DatasetFormatError, load_domain_pair, load_dynamic_graph,
                         save_domain_pair, save_dynamic_graph)
from .discrepancy import (DiscrepancyReport, DynamicDiscrepancyReport,
                          EmpiricalDistribution, PairCapExceeded,
                          dynamic_wasserstein, dynamic_wasserstein_graphs,
                          graph_discrepancy, mmd, wasserstein_exact,
                          wasserstein_sinkhorn)
from .graphs import (DomainPair, DynamicGraph, Snapshot, SnapshotStats,
                     ValidationReport, snapshot_stats, validate_dynamic_graph)
from .model import (ModelConfig, ModelState, init_model, load_state,
                    model_forward, positional_encoding, predict,
                    prepare_domain, save_state, walk_visit_operator)
from .runconfig import (BoundConfig, ConfigError, DiscrepancyConfig, RunConfig,
                        load_run_config)
from .sbm import SbmConfig, SbmConfigError, generate_evolving_sbm
from .spectral import SpectralComponents, eee_components
from .training import (TrainConfig, TrainReport, TrainingDiverged, ablation_run,
                       auc, estimate_lipschitz, evaluate_auc, finetune,
                       pretrain, run_training)
from .wl import WlEmbedding, wl_refine_continuous, wl_refine_discrete

__version__ = "0.1.0"

__all__ = [
    "Tensor", "grad_check", "GradCheckReport",
    "Snapshot", "DynamicGraph", "DomainPair", "SnapshotStats",
    "ValidationReport", "validate_dynamic_graph", "snapshot_stats",
    "SbmConfig", "SbmConfigError", "generate_evolving_sbm",
    "save_dynamic_graph", "load_dynamic_graph", "save_domain_pair",
    "load_domain_pair", "DatasetFormatError",
    "WlEmbedding", "wl_refine_continuous", "wl_refine_discrete",
    "EmpiricalDistribution", "DiscrepancyReport", "DynamicDiscrepancyReport",
    "PairCapExceeded", "wasserstein_exact", "wasserstein_sinkhorn", "mmd",
    "graph_discrepancy", "dynamic_wasserstein", "dynamic_wasserstein_graphs",
    "BoundInputs", "BoundReport", "CheckReport", "min_error_bound",
    "averaged_error_bound", "rademacher_estimate", "empirical_error",
    "lemma1_check",
    "SpectralComponents", "eee_components",
    "ModelConfig", "ModelState", "init_model", "model_forward", "predict",
    "prepare_domain", "save_state", "load_state", "positional_encoding",
    "walk_visit_operator",
    "TrainConfig", "TrainReport", "TrainingDiverged", "pretrain", "finetune",
    "run_training", "evaluate_auc", "auc", "ablation_run", "estimate_lipschitz",
    "RunConfig", "ConfigError", "DiscrepancyConfig", "BoundConfig",
    "load_run_config",
    "__version__",
]
