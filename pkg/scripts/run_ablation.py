#!/usr/bin/env python3
"""Architecture ablations on one fixed synthetic pair.

Keeps the dataset fixed (one generator seed) and varies the model seed, so
differences between rows come from the architecture switch alone.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dygraft import ablation_run, generate_evolving_sbm
from dygraft.runconfig import load_run_config
from dygraft.training import ABLATION_SWITCHES


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parent.parent
                                            / "configs" / "benchmark_small.ini"))
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--switches", default=",".join(ABLATION_SWITCHES[:4]))
    ap.add_argument("--out", help="optional CSV path")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    pair = generate_evolving_sbm(cfg.sbm_source, cfg.sbm_target, seed=args.data_seed)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    switches = [s for s in args.switches.split(",") if s.strip()]

    table = ablation_run(pair, cfg.train, switches, seeds)
    print(table.to_csv(), end="")
    print()
    for name in ["full"] + switches:
        print(f"mean AUC {name:-<24} {table.mean_auc(name):.4f}")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
