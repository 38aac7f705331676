"""Leaf top-k accuracy and per-class accuracy at coarser hierarchy levels.

A prediction dump carries either n leaf columns (post-hoc aggregation is
used for internal nodes) or N columns of natively aggregated scores, as a
HACE model produces. Ties are broken by the lowest node index everywhere.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import load_features
from .taxonomy import Taxonomy


class MetricsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PredictionDump:
    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.probs.ndim != 2 or self.labels.shape != (self.probs.shape[0],):
            raise MetricsError(f"inconsistent dump shapes {self.probs.shape} / {self.labels.shape}")
        if np.any(self.probs < 0):
            raise MetricsError("negative prediction score")

    def leaf_scores(self, n: int) -> np.ndarray:
        return self.probs[:, :n]


def _topk_hits(scores: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    # a label is in the top k iff fewer than k entries beat it under (score desc, index asc)
    true = scores[np.arange(len(labels)), labels][:, None]
    idx = np.arange(scores.shape[1])[None, :]
    beats = (scores > true) | ((scores == true) & (idx < labels[:, None]))
    return beats.sum(axis=1) < k


def top_k_accuracy(dump: PredictionDump, k: int, n: int | None = None) -> float:
    """Percentage of samples whose true leaf is among the k best leaf scores."""
    n = dump.probs.shape[1] if n is None else n
    if not 1 <= k <= n:
        raise MetricsError(f"k must lie in [1, {n}], got {k}")
    if len(dump.labels) == 0:
        return 0.0
    return 100.0 * float(_topk_hits(dump.leaf_scores(n), dump.labels, k).mean())


def level_nodes(t: Taxonomy, level: int) -> list[int]:
    """Nodes at ``level`` plus leaves shallower than it, in index order."""
    if not 1 <= level <= t.max_depth:
        raise MetricsError(f"level must lie in [1, {t.max_depth}], got {level}")
    return [
        i for i, v in enumerate(t.nodes) if t.depth[v] == level or (i < t.n and t.depth[v] < level)
    ]


@dataclass
class LevelTable:
    level: int
    node_ids: list[str]
    accuracy: list[float | None]
    support: list[int]
    overall: float
    mean_class: float | None
    shallow_leaves: int = 0  # leaves above `level` that stand in for themselves

    def rows(self):
        return zip(self.node_ids, self.accuracy, self.support)


def level_accuracy(dump: PredictionDump, t: Taxonomy, r: np.ndarray, level: int) -> LevelTable:
    """Aggregate to ``level`` and score the argmax against the true leaf's ancestor."""
    cand = np.array(level_nodes(t, level))
    if dump.probs.shape[1] == t.N:
        scores = dump.probs[:, cand]
    elif dump.probs.shape[1] == t.n:
        scores = dump.probs @ r[cand, : t.n].T.astype(np.float64)
    else:
        raise MetricsError(f"dump has {dump.probs.shape[1]} columns; expected n={t.n} or N={t.N}")
    pred = cand[np.argmax(scores, axis=1)]  # argmax keeps the first maximum
    correct = r[pred, dump.labels]
    # each sample is credited to the first candidate covering its true leaf
    owner = np.argmax(r[cand][:, dump.labels], axis=0)
    acc, support = [], []
    for c in range(len(cand)):
        mask = owner == c
        support.append(int(mask.sum()))
        acc.append(100.0 * float(correct[mask].mean()) if mask.any() else None)
    seen = [a for a in acc if a is not None]
    return LevelTable(
        level=level,
        node_ids=[t.nodes[i] for i in cand],
        accuracy=acc,
        support=support,
        overall=100.0 * float(correct.mean()) if len(correct) else 0.0,
        mean_class=float(np.mean(seen)) if seen else None,
        shallow_leaves=sum(1 for i in cand if t.depth[t.nodes[i]] < level),
    )


@dataclass
class MetricsReport:
    top1: float
    top5: float | None
    per_level: dict[int, LevelTable] = field(default_factory=dict)
    config: dict | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "top1": self.top1,
            "top5": self.top5,
            "per_level": {
                str(lv): {
                    "overall": tb.overall,
                    "mean_class": tb.mean_class,
                    "classes": len(tb.node_ids),
                    "shallow_leaves": tb.shallow_leaves,
                }
                for lv, tb in self.per_level.items()
            },
            "config": self.config,
            "seed": self.seed,
        }


def evaluate(dump: PredictionDump, t: Taxonomy, r: np.ndarray, levels=(), config=None, seed=None) -> MetricsReport:
    top5 = top_k_accuracy(dump, 5, t.n) if t.n >= 5 else None
    return MetricsReport(
        top1=top_k_accuracy(dump, 1, t.n),
        top5=top5,
        per_level={lv: level_accuracy(dump, t, r, lv) for lv in levels},
        config=config,
        seed=seed,
    )


def per_class_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "level", "accuracy", "support"])
    for tb in tables:
        for node, acc, sup in tb.rows():
            w.writerow([node, tb.level, "" if acc is None else repr(acc), sup])
    return buf.getvalue()


def emit_report(report: MetricsReport, path: str | Path) -> None:
    """Write ``path`` (JSON) and, if levels were requested, ``<stem>_per_class.csv``."""
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if report.per_level:
        csv_path = path.with_name(path.stem + "_per_class.csv")
        csv_path.write_text(per_class_csv(report.per_level.values()), encoding="utf-8")


def comparison_table(baseline: LevelTable, other: LevelTable) -> list[dict]:
    """Per-class rows sorted by descending baseline accuracy (ties by node id)."""
    if baseline.node_ids != other.node_ids:
        raise MetricsError("tables cover different nodes")
    rows = []
    for node, a, b, sup in zip(baseline.node_ids, baseline.accuracy, other.accuracy, baseline.support):
        rows.append(
            {
                "node_id": node,
                "support": sup,
                "baseline": a,
                "method": b,
                "gain": None if a is None or b is None else b - a,
            }
        )
    rows.sort(key=lambda row: (-(row["baseline"] if row["baseline"] is not None else -1.0), row["node_id"]))
    return rows


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "support", "baseline_accuracy", "method_accuracy", "gain"])
    fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
    for row in rows:
        w.writerow([row["node_id"], row["support"], fmt(row["baseline"]), fmt(row["method"]), fmt(row["gain"])])
    return buf.getvalue()


def save_dump(dump: PredictionDump, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"p{j}" for j in range(dump.probs.shape[1])])
        for row, label in zip(dump.probs, dump.labels):
            w.writerow([int(label)] + [repr(float(v)) for v in row])


def load_dump(path: str | Path) -> PredictionDump:
    """CSV ``label,p0,...`` or the binary feature format with D = width."""
    path = Path(path)
    if path.suffix != ".csv":
        ds = load_features(path)
        return PredictionDump(ds.x, ds.y)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["label"] + [f"p{j}" for j in range(len(rows[0]) - 1)] or len(rows[0]) < 2:
        raise MetricsError(f"{path}: malformed header")
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    except ValueError as err:
        raise MetricsError(f"{path}: {err}") from None
    return PredictionDump(arr[:, 1:], arr[:, 0].astype(np.int64))
