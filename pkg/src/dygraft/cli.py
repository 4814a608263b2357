"""Command-line surface.

Each subcommand is a thin shell over one library call; identical inputs
through the CLI and the library produce identical outputs. Reports echo the
seed they were produced with. Exit status 0 means no error was reported;
bad configs, malformed files, and invalid arguments exit with status 2.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .bounds import BoundInputs, BoundReport, averaged_error_bound, min_error_bound
from .dataset_io import (DatasetFormatError, load_domain_pair,
                         load_dynamic_graph, save_domain_pair)
from .discrepancy import dynamic_wasserstein_graphs
from .graphs import DomainPair, DynamicGraph, snapshot_stats, validate_dynamic_graph
from .model import load_state, save_state
from .runconfig import ConfigError, RunConfig, load_run_config
from .sbm import SbmConfigError, generate_evolving_sbm
from .spectral import eee_components
from .training import (ABLATION_SWITCHES, EpochLosses, TrainReport,
                       ablation_run, evaluate_auc, run_training)

_MEASURES = {"wasserstein": "wasserstein_exact",
             "sinkhorn": "wasserstein_sinkhorn",
             "mmd": "mmd"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str | None) -> RunConfig:
    return load_run_config(path) if path else RunConfig()


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    pair = generate_evolving_sbm(cfg.sbm_source, cfg.sbm_target, seed=args.seed)
    save_domain_pair(pair, args.out)
    lines = [f"seed = {args.seed}", f"out = {args.out}"]
    rows = ["domain,snapshot,nodes,edges,density"]
    for tag, g in (("source", pair.source), ("target", pair.target)):
        report = validate_dynamic_graph(g)
        if not report.ok:
            raise ValueError(f"generated {tag} graph failed validation: "
                             f"{report.violations[0].message}")
        for st in snapshot_stats(g):
            i = st.snapshot_index
            lines.append(f"{tag}[{i}] nodes = {st.node_count}  edges = "
                         f"{st.edge_count}  density = {_fmt(st.density)}")
            rows.append(f"{tag},{i},{st.node_count},{st.edge_count},{_fmt(st.density)}")
    text = ("\n".join(rows) if args.format == "csv" else "\n".join(lines)) + "\n"
    _emit(text, None)
    return 0


# ------------------------------------------------------------- discrepancy

def cmd_discrepancy(args) -> int:
    cfg = _load_config(args.config).discrepancy
    src = load_dynamic_graph(args.src)
    tgt = load_dynamic_graph(args.tgt)
    measure = args.measure or {v: k for k, v in _MEASURES.items()}.get(cfg.base, "wasserstein")
    base = _MEASURES[measure]
    depth = cfg.depth_m if args.depth is None else args.depth
    p = cfg.p if args.p is None else args.p
    epsilon = cfg.epsilon if args.epsilon is None else args.epsilon
    bandwidth = cfg.bandwidth if args.bandwidth is None else args.bandwidth
    rho = cfg.rho if args.rho is None else args.rho
    r_lip = cfg.r_lipschitz if args.R is None else args.R
    report = dynamic_wasserstein_graphs(
        src, tgt, rho=rho, r_lipschitz=r_lip, depth_m=depth, p=p, base=base,
        epsilon=epsilon, bandwidth=bandwidth, pair_cap=cfg.pair_cap)

    if args.format == "csv":
        rows = ["measure,component,value",
                f"{measure},total,{_fmt(report.value)}",
                f"{measure},rho,{_fmt(report.rho)}",
                f"{measure},r_lipschitz,{_fmt(report.r_lipschitz)}",
                f"{measure},argmax_term,{report.argmax_term}"]
        rows += [f"{measure},term:{label},{_fmt(v)}" for label, v in report.per_term]
        text = "\n".join(rows) + "\n"
    else:
        lines = [f"measure = {measure}", f"depth_m = {depth}", f"p = {p}",
                 f"rho = {_fmt(report.rho)}",
                 f"r_lipschitz = {_fmt(report.r_lipschitz)}",
                 f"seed = {args.seed}",
                 f"value = {_fmt(report.value)}",
                 f"argmax_term = {report.argmax_term}"]
        lines += [f"term {label} = {_fmt(v)}" for label, v in report.per_term]
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


# ------------------------------------------------------------------- bound

def _bound_rows(report: BoundReport) -> list[tuple[str, str]]:
    rows = [("which_bound", report.which_bound),
            ("term_min_error", _fmt(report.term_min_error)),
            ("term_discrepancy", _fmt(report.term_discrepancy)),
            ("term_rademacher", _fmt(report.term_rademacher)),
            ("term_concentration", _fmt(report.term_concentration)),
            ("total", _fmt(report.total))]
    rows += [(f"const_{k}", _fmt(v) if isinstance(v, (int, float)) else str(v))
             for k, v in sorted(report.constants_echo.items())]
    return rows


def cmd_bound(args) -> int:
    cfg = load_run_config(args.inputs).bound
    which = args.bound or cfg.which
    inputs = BoundInputs(eps_src=cfg.eps_src, eps_tgt=cfg.eps_tgt,
                         dyn_w=cfg.dyn_w, rademacher=cfg.rademacher,
                         rho=cfg.rho, r_lipschitz=cfg.r_lipschitz,
                         complexity_b=cfg.complexity_b, delta=cfg.delta,
                         n_tilde=cfg.n_tilde, big_o_constant=cfg.big_o_constant)
    reports = [min_error_bound(inputs)]
    if which == "eq1":
        # averaged bound requested: print both totals side by side
        reports.append(averaged_error_bound(inputs, cfg.lambda_tilde, cfg.m_total))

    if args.format == "csv":
        rows = ["which_bound,component,value"]
        for rep in reports:
            rows += [f"{rep.which_bound},{k},{v}" for k, v in _bound_rows(rep)[1:]]
        text = "\n".join(rows) + "\n"
    else:
        blocks = []
        for rep in reports:
            blocks.append("\n".join(f"{k} = {v}" for k, v in _bound_rows(rep)))
        text = "\n\n".join(blocks) + f"\nseed = {args.seed}\n"
    _emit(text, args.out)
    return 0


# ------------------------------------------------------------------- train

def _epoch_csv(epochs: list[EpochLosses]) -> str:
    rows = ["epoch,grl_spatial,grl_temporal,source,target,total"]
    rows += [f"{i},{_fmt(e.grl_spatial)},{_fmt(e.grl_temporal)},"
             f"{_fmt(e.source)},{_fmt(e.target)},{_fmt(e.total)}"
             for i, e in enumerate(epochs)]
    return "\n".join(rows) + "\n"


def _train_text(report: TrainReport) -> str:
    cfg = report.config
    lines = [f"phase = {report.phase}", f"seed = {report.seed}",
             f"epochs_run = {len(report.epochs)}",
             f"wall_time = {_fmt(report.wall_time)}"]
    if report.final_auc is not None:
        lines.append(f"final_auc = {_fmt(report.final_auc)}")
    if cfg is not None:
        lines += [f"pretrain_epochs = {cfg.pretrain_epochs}",
                  f"finetune_epochs = {cfg.finetune_epochs}",
                  f"lr = {_fmt(cfg.lr)}", f"ablation = {cfg.ablation}"]
    return "\n".join(lines) + "\n"


def _parse_seeds(raw: str | None, fallback: int) -> list[int]:
    if not raw:
        return [fallback]
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def _run_ablation(pair: DomainPair, base_cfg, switches: list[str],
                  seeds: list[int], out: str | None) -> int:
    table = ablation_run(pair, base_cfg, switches, seeds)
    _emit(table.to_csv(), out)
    return 0


def cmd_train(args) -> int:
    import dataclasses
    pair = load_domain_pair(args.dataset)
    cfg = _load_config(args.config).train
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.ablation:
        switches = [tok for tok in args.ablation.split(",") if tok]
        seeds = _parse_seeds(args.seeds, cfg.seed)
        return _run_ablation(pair, cfg, switches, seeds, args.out and
                             os.path.join(args.out, "ablation.csv"))
    state, report = run_training(pair, cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        save_state(state, os.path.join(args.out, "state.ckpt"))
        with open(os.path.join(args.out, "train_report.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(_train_text(report))
        with open(os.path.join(args.out, "epochs.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write(_epoch_csv(report.epochs))
    text = _epoch_csv(report.epochs) if args.format == "csv" else _train_text(report)
    sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    pair = load_domain_pair(args.dataset)
    state = load_state(args.state)
    value = evaluate_auc(state, pair)
    if args.format == "csv":
        _emit(f"metric,value\nauc,{_fmt(value)}\n", args.out)
    else:
        _emit(f"auc = {_fmt(value)}\nseed = {args.seed}\n", args.out)
    return 0


def cmd_ablate(args) -> int:
    import dataclasses
    pair = load_domain_pair(args.dataset)
    cfg = _load_config(args.config).train
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    switches = ([tok for tok in args.switches.split(",") if tok]
                if args.switches else list(ABLATION_SWITCHES[:4]))
    seeds = _parse_seeds(args.seeds, cfg.seed)
    return _run_ablation(pair, cfg, switches, seeds, args.out)


# --------------------------------------------------------------------- eee

def _load_any_graph(path: str, domain: str) -> DynamicGraph:
    root = Path(path)
    if (root / "manifest").exists():
        return load_dynamic_graph(path)
    if (root / domain / "manifest").exists():
        return load_dynamic_graph(root / domain)
    raise DatasetFormatError(
        f"{path} is neither a domain directory nor a pair directory")


def cmd_eee(args) -> int:
    g = _load_any_graph(args.dataset, args.domain)
    if not (-len(g.snapshots) <= args.snapshot < len(g.snapshots)):
        raise ValueError(f"snapshot index {args.snapshot} out of range for "
                         f"{len(g.snapshots)} snapshots")
    comp = eee_components(g.snapshots[args.snapshot], args.k)
    header = "node," + ",".join(f"c{j}" for j in range(args.k))
    rows = [header]
    for v in range(comp.vectors.shape[0]):
        rows.append(f"{v}," + ",".join(_fmt(x) for x in comp.vectors[v]))
    _emit("\n".join(rows) + "\n", args.out)
    return 0


# ------------------------------------------------------------------ parser

def _add_common(sub: argparse.ArgumentParser, seed_default: int | None = 0) -> None:
    sub.add_argument("--seed", type=int, default=seed_default,
                     help="seed for every random draw (echoed in reports)")
    sub.add_argument("--config", help="run-config file (INI sections)")
    sub.add_argument("--out", help="write the report here instead of stdout")
    sub.add_argument("--format", choices=("text", "csv"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dygraft",
        description="dynamic-graph transfer learning: datasets, discrepancies, "
                    "bounds, training")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("generate", help="write a synthetic source/target dataset")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for every random draw (echoed in reports)")
    p.add_argument("--config", help="run-config file (INI sections)")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser("discrepancy", help="dynamic discrepancy between two domains")
    p.add_argument("src", help="source domain directory")
    p.add_argument("tgt", help="target domain directory")
    p.add_argument("--measure", choices=tuple(_MEASURES))
    p.add_argument("--depth", type=int, help="refinement depth M")
    p.add_argument("--p", type=int, choices=(1, 2))
    p.add_argument("--epsilon", type=float, help="entropic regularization")
    p.add_argument("--bandwidth", type=float, help="kernel bandwidth (0 = median)")
    p.add_argument("--rho", type=float, help="loss Lipschitz constant")
    p.add_argument("--R", type=float, help="scorer Lipschitz constant")
    _add_common(p)
    p.set_defaults(func=cmd_discrepancy)

    p = subs.add_parser("bound", help="evaluate a generalization bound")
    p.add_argument("inputs", help="inputs file with a [bound] section")
    p.add_argument("--bound", choices=("theorem1", "eq1"),
                   help="eq1 additionally prints the min-error bound for comparison")
    _add_common(p)
    p.set_defaults(func=cmd_bound)

    p = subs.add_parser("train", help="pretrain + fine-tune on a dataset directory")
    p.add_argument("dataset", help="pair dataset directory")
    p.add_argument("--ablation", help="comma-separated ablation switches; "
                                      "routes through the ablation table")
    p.add_argument("--seeds", help="comma-separated seeds for --ablation")
    _add_common(p, seed_default=None)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("evaluate", help="AUC of a checkpoint on held-out nodes")
    p.add_argument("dataset", help="pair dataset directory")
    p.add_argument("--state", required=True, help="checkpoint file from train")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("ablate", help="train the full model and ablations")
    p.add_argument("dataset", help="pair dataset directory")
    p.add_argument("--switches", help="comma-separated ablation switches "
                                      "(default: the four standard ones)")
    p.add_argument("--seeds", help="comma-separated seeds")
    _add_common(p, seed_default=None)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("eee", help="singular-vector coordinates of one snapshot")
    p.add_argument("dataset", help="domain or pair dataset directory")
    p.add_argument("--snapshot", type=int, default=0)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--domain", choices=("source", "target"), default="source",
                   help="which half of a pair directory to read")
    _add_common(p)
    p.set_defaults(func=cmd_eee)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, SbmConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
