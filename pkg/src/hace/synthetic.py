"""Gaussian features with tree-structured class means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureDataset
from .taxonomy import Taxonomy, from_edges


@dataclass(frozen=True)
class SyntheticSpec:
    branching: tuple[int, ...] = (5, 5)
    dim: int = 64
    sigma_leaf: float = 1.0
    sigma_level: float = 3.0
    samples_per_leaf: int = 40

    def __post_init__(self):
        object.__setattr__(self, "branching", tuple(int(b) for b in self.branching))
        if len(self.branching) < 2:
            raise ValueError("need at least 2 levels of branching")
        if min(self.branching) < 1 or self.dim < 1 or self.samples_per_leaf < 1:
            raise ValueError("branching factors, dim and samples_per_leaf must be positive")
        if self.sigma_leaf < 0 or self.sigma_level < 0:
            raise ValueError("noise scales must be non-negative")


def balanced_tree(branching) -> Taxonomy:
    """Balanced tree; node names like ``n01.03`` sort in construction order."""
    edges = []
    frontier = [("root", "n")]
    for b in branching:
        width = len(str(b - 1))
        nxt = []
        for name, prefix in frontier:
            for k in range(b):
                child = f"{prefix}{k:0{width}d}" if prefix == "n" else f"{prefix}.{k:0{width}d}"
                edges.append((name, child))
                nxt.append((child, child))
        frontier = nxt
    return from_edges(edges)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> tuple[Taxonomy, FeatureDataset, FeatureDataset]:
    """Returns (taxonomy, train, test); each node mean drifts from its parent's."""
    t = balanced_tree(spec.branching)
    rng = np.random.default_rng(seed)
    means = {t.root: np.zeros(spec.dim)}
    # breadth-first so every parent mean exists before its children
    order = sorted(t.nodes, key=lambda v: (t.depth[v], v))
    for v in order:
        means[v] = means[t.parents[v][0]] + rng.normal(0.0, spec.sigma_level, spec.dim)
    leaf_means = np.stack([means[v] for v in t.leaves])
    splits = []
    for split in ("train", "test"):
        y = np.repeat(np.arange(t.n), spec.samples_per_leaf)
        x = leaf_means[y] + rng.normal(0.0, spec.sigma_leaf, (len(y), spec.dim))
        splits.append(FeatureDataset(x, y, split))
    return t, splits[0], splits[1]
