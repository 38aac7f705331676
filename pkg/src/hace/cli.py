"""Command-line entry point: ``hace {validate,targets,synth,train,eval,grid}``.

Exit codes: 0 success, 1 runtime failure, 2 input validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import FeatureFormatError, load_features, pair_splits, save_features
from .experiment import plan_grid, run_grid, run_single
from .metrics import MetricsError, emit_report, evaluate, load_dump
from .synthetic import SyntheticSpec, generate_synthetic
from .targets import KINDS, TargetScheme, build_target_matrix
from .taxonomy import TaxonomyError, load_taxonomy, reachability
from .trainer import ConfigError, RunConfig

log = logging.getLogger("hace")

INPUT_ERRORS = (TaxonomyError, ConfigError, FeatureFormatError, MetricsError, ValueError, FileNotFoundError)


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_validate(args) -> int:
    t = load_taxonomy(args.hierarchy, dag=args.dag)
    print(f"n={t.n} N={t.N} depth≤{t.max_depth}")
    print(f"root={t.root}")
    print("mode=" + ("tree" if t.is_tree else "dag"))
    for depth, count in t.depth_histogram().items():
        print(f"depth {depth}: {count}")
    return 0


def cmd_targets(args) -> int:
    kw = {k: getattr(args, k) for k in ("epsilon", "dilution", "beta") if getattr(args, k) is not None}
    scheme = TargetScheme(args.scheme, **kw)
    t = load_taxonomy(args.hierarchy, dag=args.dag)
    tm = build_target_matrix(t, scheme)
    tm.to_csv(args.out)
    print(f"wrote {t.n}x{t.N} target matrix to {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        branching=tuple(args.branching),
        dim=args.dim,
        sigma_leaf=args.sigma_leaf,
        sigma_level=args.sigma_level,
        samples_per_leaf=args.samples_per_leaf,
    )
    t, train_ds, test_ds = generate_synthetic(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = sorted(f"{p}\t{c}" for p, c in t.edges)
    (out / "hierarchy.tsv").write_text(f"# synthetic seed={args.seed}\n" + "\n".join(lines) + "\n", encoding="utf-8")
    ext = ".csv" if args.format == "csv" else ".bin"
    save_features(train_ds, out / f"train{ext}")
    save_features(test_ds, out / f"test{ext}")
    print(f"n={t.n} N={t.N} train={train_ds.S} test={test_ds.S} D={train_ds.D} -> {out}")
    return 0


def _overrides(args) -> dict:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        changes["epochs"] = args.epochs
    if getattr(args, "lr", None) is not None:
        changes["base_lr"] = args.lr
    return changes


def cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = RunConfig.from_dict({**raw, **_overrides(args)})
    t = load_taxonomy(args.hierarchy, dag=args.dag)
    train_ds = load_features(args.features, n_classes=t.n)
    if args.test_features:
        test_ds = load_features(args.test_features, n_classes=t.n, split="test")
        train_ds, test_ds = pair_splits(train_ds, test_ds)
    else:
        test_ds = train_ds
    for lv in args.levels:
        if not 1 <= lv <= t.max_depth:
            raise UsageError(f"level must lie in [1, {t.max_depth}], got {lv}")
    res = run_single("train", config, t, train_ds, test_ds, args.levels, args.out)
    if res.status != "ok":
        raise RuntimeError(res.error)
    print(f"top1={res.report['top1']:.2f} top5={res.report['top5']} -> {args.out}")
    return 0


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def cmd_grid(args) -> int:
    cfg_path = Path(args.config)
    raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    known = {"hierarchy", "features", "test_features", "synthetic", "levels", "dilutions", "base", "hace_scheme", "sce_scheme", "dag"}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown grid config keys: {', '.join(sorted(unknown))}")
    dilutions = raw.get("dilutions")
    if not dilutions:
        raise UsageError("grid config needs a non-empty 'dilutions' list")
    base = RunConfig.from_dict({**raw.get("base", {}), **_overrides(args)})
    plan = plan_grid(base, dilutions, raw.get("hace_scheme", "ancestral"), raw.get("sce_scheme", "one_hot"))
    levels = raw.get("levels", [])

    here = cfg_path.parent
    if "synthetic" in raw:
        spec = SyntheticSpec(**raw["synthetic"])
        t, train_ds, test_ds = generate_synthetic(spec, base.seed)
    else:
        if "hierarchy" not in raw or "features" not in raw:
            raise UsageError("grid config needs 'hierarchy' and 'features' (or 'synthetic')")
        t = load_taxonomy(_resolve(here, raw["hierarchy"]), dag=raw.get("dag", False))
        train_ds = load_features(_resolve(here, raw["features"]), n_classes=t.n)
        test_path = _resolve(here, raw.get("test_features"))
        test_ds = train_ds
        if test_path is not None:
            train_ds, test_ds = pair_splits(train_ds, load_features(test_path, n_classes=t.n, split="test"))
    for lv in levels:
        if not 1 <= lv <= t.max_depth:
            raise UsageError(f"level must lie in [1, {t.max_depth}], got {lv}")

    Path(args.out).mkdir(parents=True, exist_ok=True)
    results = run_grid(plan, t, train_ds, test_ds, levels, args.out, jobs=args.jobs)
    for r in results:
        top1 = f"{r.report['top1']:.2f}" if r.report else "-"
        print(f"{r.name:32s} lr={r.lr:<10.6g} {r.status:8s} top1={top1}")
    return 0


def cmd_eval(args) -> int:
    t = load_taxonomy(args.hierarchy, dag=args.dag)
    for lv in args.levels:
        if not 1 <= lv <= t.max_depth:
            raise UsageError(f"level must lie in [1, {t.max_depth}], got {lv}")
    dump = load_dump(args.dump)
    if dump.labels.size and (dump.labels.min() < 0 or dump.labels.max() >= t.n):
        raise UsageError(f"dump labels must lie in [0, {t.n})")
    report = evaluate(dump, t, reachability(t), args.levels, seed=args.seed)
    emit_report(report, args.out)
    print(f"top1={report.top1:.2f} top5={report.top5} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hace", description="Hierarchy-aware cross-entropy toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="parse and validate a hierarchy file")
    s.add_argument("--hierarchy", required=True)
    s.add_argument("--dag", action="store_true")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("targets", help="write a soft-target matrix as CSV")
    s.add_argument("--hierarchy", required=True)
    s.add_argument("--scheme", required=True, choices=KINDS)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--dilution", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--dag", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_targets)

    s = sub.add_parser("synth", help="generate a synthetic hierarchy with Gaussian features")
    s.add_argument("--branching", type=_int_list, default=[5, 5])
    s.add_argument("--dim", type=int, default=64)
    s.add_argument("--sigma-leaf", type=float, default=1.0)
    s.add_argument("--sigma-level", type=float, default=3.0)
    s.add_argument("--samples-per-leaf", type=int, default=40)
    s.add_argument("--format", choices=("bin", "csv"), default="bin")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train one linear probe")
    s.add_argument("--config", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--test-features")
    s.add_argument("--hierarchy", required=True)
    s.add_argument("--levels", type=_int_list, default=[])
    s.add_argument("--dag", action="store_true")
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a prediction dump")
    s.add_argument("--dump", required=True)
    s.add_argument("--hierarchy", required=True)
    s.add_argument("--levels", type=_int_list, default=[])
    s.add_argument("--dag", action="store_true")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("grid", help="run the HACE/SCE learning-rate pairing grid")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_grid)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        print(f"failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
