"""Single runs, the HACE/SCE learning-rate pairing grid, and the desk-scale comparison."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import FeatureDataset
from .metrics import LevelTable, PredictionDump, comparison_csv, comparison_table, emit_report, evaluate, save_dump
from .synthetic import SyntheticSpec, generate_synthetic
from .taxonomy import Taxonomy
from .trainer import ConfigError, LinearModel, LossContext, RunConfig, TrainingDiverged, effective_lr, train, write_trace


def plan_grid(
    base: RunConfig, dilutions, hace_scheme: str = "ancestral", sce_scheme: str = "one_hot"
) -> list[tuple[str, RunConfig]]:
    """Per d: HACE under both pairings and SCE at l*d; plus one SCE run at l."""
    dilutions = list(dilutions)
    if not dilutions:
        raise ConfigError("grid needs at least one dilution value")
    if len(set(dilutions)) != len(dilutions):
        raise ConfigError("duplicate dilution values")
    common = dict(alpha=None, beta=base.beta)
    runs = []
    for d in dilutions:
        for pairing in ("hace_anchored", "sce_anchored"):
            cfg = base.replace(loss="hace", scheme=hace_scheme, dilution=d, pairing=pairing, **common)
            runs.append((f"hace_d{d:g}_{pairing}", cfg))
    for d in dilutions:
        cfg = base.replace(loss="sce", scheme=sce_scheme, dilution=d, pairing="hace_anchored", **common)
        runs.append((f"sce_d{d:g}_hace_anchored", cfg))
    cfg = base.replace(loss="sce", scheme=sce_scheme, dilution=None, pairing="sce_anchored", **common)
    runs.append(("sce_sce_anchored", cfg))
    return [(name, _strip_unused(cfg)) for name, cfg in runs]


def _strip_unused(cfg: RunConfig) -> RunConfig:
    # base may carry epsilon/beta meant for only one side of the pairing
    changes = {}
    if cfg.scheme not in ("uniform_smooth", "ancestral_with_uniform") and cfg.epsilon:
        changes["epsilon"] = None
    if cfg.scheme not in ("lca_soft", "ancestral_with_lca"):
        changes["beta"] = None
    return cfg.replace(**changes) if changes else cfg


@dataclass
class RunResult:
    name: str
    config: RunConfig
    status: str
    lr: float
    trace: list[float]
    report: dict | None
    tables: dict | None = None
    error: str | None = None

    def summary(self) -> dict:
        out = {"name": self.name, "status": self.status, "lr": self.lr}
        if self.report is not None:
            out["top1"] = self.report["top1"]
            out["top5"] = self.report["top5"]
            out["per_level"] = {lv: v["overall"] for lv, v in self.report["per_level"].items()}
        if self.error:
            out["error"] = self.error
        return out


def run_single(
    name: str,
    config: RunConfig,
    t: Taxonomy,
    train_ds: FeatureDataset,
    test_ds: FeatureDataset,
    levels=(),
    out_dir: str | Path | None = None,
) -> RunResult:
    """Train one probe, evaluate on ``test_ds``, optionally write run artifacts."""
    ctx = LossContext(t, config)
    model = LinearModel.init(ctx.out_dim, train_ds.D, config.seed)
    lr = effective_lr(config)
    try:
        model, trace = train(model, train_ds, config, ctx)
    except TrainingDiverged as err:
        return RunResult(name, config, "diverged", lr, [], None, error=str(err))
    x = test_ds.normalized().x if config.normalize else test_ds.x
    dump = PredictionDump(ctx.predict(model.logits(x)), test_ds.y)
    cfg = asdict(config)
    report = evaluate(dump, t, ctx.r, levels, config=cfg, seed=config.seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(config.to_json(), encoding="utf-8")
        write_trace(trace, out / "trace.csv")
        model.save(out / "model.npz")
        save_dump(dump, out / "predictions.csv")
        emit_report(report, out / "report.json")
    return RunResult(name, config, "ok", lr, trace, report.to_dict(), report.per_level)


def run_grid(
    plan: list[tuple[str, RunConfig]],
    t: Taxonomy,
    train_ds: FeatureDataset,
    test_ds: FeatureDataset,
    levels=(),
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> list[RunResult]:
    def one(item):
        name, cfg = item
        sub = None if out_dir is None else Path(out_dir) / name
        return run_single(name, cfg, t, train_ds, test_ds, levels, sub)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, plan))
    else:
        results = [one(item) for item in plan]
    if out_dir is not None:
        summary = {"runs": [r.summary() for r in results]}
        (Path(out_dir) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return results


DESK_SPEC = SyntheticSpec(branching=(5, 5), dim=64, sigma_leaf=1.0, sigma_level=3.0, samples_per_leaf=40)
DESK_BASE = RunConfig(base_lr=0.5, epochs=20, batch_size=32, normalize=True)


def desk_comparison(
    seeds=(0, 1, 2, 3, 4),
    spec: SyntheticSpec = DESK_SPEC,
    base: RunConfig = DESK_BASE,
    dilutions=(0.2, 0.5, 0.7),
    out_dir: str | Path | None = None,
) -> dict:
    """HACE vs SCE linear probes on synthetic hierarchies, averaged over seeds.

    Best configurations are picked by mean leaf top-1 (ties by run name). The
    superclass table follows the family-level figure layout: one row per
    level-1 node, sorted by descending baseline (SCE) accuracy.
    """
    per_seed = []
    tables: dict[str, list] = {}
    for seed in seeds:
        t, train_ds, test_ds = generate_synthetic(spec, seed)
        plan = plan_grid(base.replace(seed=seed), dilutions)
        results = run_grid(plan, t, train_ds, test_ds, levels=(1,))
        per_seed.append({"seed": seed, "runs": [r.summary() for r in results]})
        for r in results:
            if r.status == "ok":
                tables.setdefault(r.name, []).append(r.tables[1])

    names = [name for name, _ in plan_grid(base, dilutions)]
    means = {}
    for name in names:
        ok = [run for s in per_seed for run in s["runs"] if run["name"] == name and run["status"] == "ok"]
        if not ok:
            means[name] = {"runs_ok": 0}
            continue
        means[name] = {
            "runs_ok": len(ok),
            "top1": float(np.mean([run["top1"] for run in ok])),
            "top5": float(np.mean([run["top5"] for run in ok])),
            "superclass": float(np.mean([run["per_level"]["1"] for run in ok])),
        }

    def best(prefix):
        cands = [n for n in names if n.startswith(prefix) and means[n]["runs_ok"]]
        return min(cands, key=lambda n: (-means[n]["top1"], n)) if cands else None

    best_hace, best_sce = best("hace_"), best("sce_")
    rows = []
    if best_hace and best_sce:
        rows = comparison_table(_mean_table(tables[best_sce]), _mean_table(tables[best_hace]))
    report = {
        "spec": asdict(spec),
        "base_config": asdict(base),
        "seeds": list(seeds),
        "dilutions": list(dilutions),
        "mean": means,
        "best": {
            "hace": best_hace,
            "sce": best_sce,
            "top1_gain": (means[best_hace]["top1"] - means[best_sce]["top1"]) if rows else None,
        },
        "superclass_table": rows,
        "per_seed": per_seed,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        (out / "superclass_table.csv").write_text(comparison_csv(rows), encoding="utf-8")
    return report


def _mean_table(tabs):
    """Average per-class accuracy of identically shaped level tables across seeds."""
    first = tabs[0]
    acc = []
    for k in range(len(first.node_ids)):
        vals = [tb.accuracy[k] for tb in tabs if tb.accuracy[k] is not None]
        acc.append(float(np.mean(vals)) if vals else None)
    support = [sum(tb.support[k] for tb in tabs) for k in range(len(first.node_ids))]
    overall = float(np.mean([tb.overall for tb in tabs]))
    seen = [a for a in acc if a is not None]
    return LevelTable(
        first.level, list(first.node_ids), acc, support, overall, float(np.mean(seen)) if seen else None, first.shallow_leaves
    )
