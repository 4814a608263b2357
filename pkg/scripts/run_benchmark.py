#!/usr/bin/env python3
"""Transfer-gain benchmark: full pipeline vs target-only baseline.

For each seed, draws a fresh source/target pair from the evolving
block-model generator, trains the full model and the no_pretrain ablation
on it, and reports per-seed AUCs plus a paired one-sided t-test.
"""

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from scipy import stats

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dygraft import TrainConfig, generate_evolving_sbm, run_training
from dygraft.runconfig import load_run_config


def benchmark_pair(cfg, seed):
    return generate_evolving_sbm(cfg.sbm_source, cfg.sbm_target, seed=seed)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parent.parent
                                            / "configs" / "benchmark_small.ini"))
    ap.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    ap.add_argument("--out", help="optional CSV path for per-seed results")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]

    rows = []
    t0 = time.perf_counter()
    for seed in seeds:
        pair = benchmark_pair(cfg, seed)
        train_cfg = dataclasses.replace(cfg.train, seed=seed)
        _, full = run_training(pair, train_cfg)
        _, base = run_training(pair, dataclasses.replace(train_cfg,
                                                         ablation="no_pretrain"))
        rows.append((seed, full.final_auc, base.final_auc))
        print(f"seed {seed}: full = {full.final_auc:.4f}   "
              f"target-only = {base.final_auc:.4f}")

    full_aucs = [r[1] for r in rows]
    base_aucs = [r[2] for r in rows]
    mean_full = sum(full_aucs) / len(full_aucs)
    mean_base = sum(base_aucs) / len(base_aucs)
    t_stat, p_value = stats.ttest_rel(full_aucs, base_aucs, alternative="greater")
    print(f"\nmean AUC: full = {mean_full:.4f}, target-only = {mean_base:.4f}")
    print(f"paired one-sided t-test: t = {t_stat:.3f}, p = {p_value:.5f}")
    print(f"total wall time: {time.perf_counter() - t0:.1f}s")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("seed,full_auc,target_only_auc\n")
            for seed, f, b in rows:
                fh.write(f"{seed},{f:.17g},{b:.17g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
