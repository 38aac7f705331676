"""HACE vs SCE linear probes on synthetic two-level hierarchies.

Trains the full learning-rate pairing grid for each seed, picks the best
HACE and SCE configurations by mean leaf top-1 and writes
comparison.json plus superclass_table.csv to OUT_DIR.

At the default drift (sigma_level=3) every probe saturates at 100%, so
also try e.g. --sigma-level 0.35 where leaves overlap.

Usage: python scripts/desk_comparison.py OUT_DIR [--sigma-level S] [--seeds 0,1,2,3,4]
"""

import argparse
import time
from dataclasses import replace

from hace.experiment import DESK_BASE, DESK_SPEC, desk_comparison


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--sigma-level", type=float, default=DESK_SPEC.sigma_level)
    p.add_argument("--sigma-leaf", type=float, default=DESK_SPEC.sigma_leaf)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--dilutions", default="0.2,0.5,0.7")
    p.add_argument("--epochs", type=int, default=DESK_BASE.epochs)
    args = p.parse_args()

    spec = replace(DESK_SPEC, sigma_leaf=args.sigma_leaf, sigma_level=args.sigma_level)
    seeds = [int(s) for s in args.seeds.split(",")]
    dilutions = [float(d) for d in args.dilutions.split(",")]
    start = time.perf_counter()
    report = desk_comparison(seeds, spec, DESK_BASE.replace(epochs=args.epochs), dilutions, args.out)

    print(f"{'run':28s} {'top1':>7s} {'top5':>7s} {'super':>7s}")
    for name, m in report["mean"].items():
        if m["runs_ok"]:
            print(f"{name:28s} {m['top1']:7.2f} {m['top5']:7.2f} {m['superclass']:7.2f}")
        else:
            print(f"{name:28s} diverged")
    best = report["best"]
    print(f"best HACE {best['hace']}, best SCE {best['sce']}, leaf top-1 gain {best['top1_gain']:+.2f}")
    print(f"{time.perf_counter() - start:.1f}s -> {args.out}")


if __name__ == "__main__":
    main()
