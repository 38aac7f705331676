"""Ground-truth soft targets.

Construction is two-step: a horizontal distribution over leaves (one-hot,
uniform label smoothing, or LCA soft labels), then optional vertical
redistribution of every leaf's mass up its ancestral path with dilution d.
Mass that reaches the root is stored as ``root_mass`` rather than in the
node-indexed row, because the root carries no logit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .taxonomy import MAX_PATHS, PathLimitError, Taxonomy, TaxonomyError, lca_height_matrix

LEAF_KINDS = ("one_hot", "uniform_smooth", "lca_soft")
ANCESTRAL_KINDS = ("ancestral", "ancestral_with_uniform", "ancestral_with_lca")
KINDS = LEAF_KINDS + ANCESTRAL_KINDS

_NEEDS = {
    "one_hot": set(),
    "uniform_smooth": {"epsilon"},
    "lca_soft": {"beta"},
    "ancestral": {"dilution"},
    "ancestral_with_uniform": {"epsilon", "dilution"},
    "ancestral_with_lca": {"beta", "dilution"},
}


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")


def _check_dilution(dilution: float) -> None:
    if not 0.0 < dilution <= 1.0:
        raise ValueError(f"dilution must lie in (0, 1], got {dilution}")


@dataclass(frozen=True)
class TargetScheme:
    kind: str
    epsilon: float | None = None
    dilution: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown target scheme {self.kind!r}; expected one of {KINDS}")
        needs = _NEEDS[self.kind]
        for name in ("epsilon", "dilution", "beta"):
            value = getattr(self, name)
            # plain "ancestral" tolerates an explicit epsilon=0
            if name == "epsilon" and self.kind == "ancestral" and value in (None, 0, 0.0):
                continue
            if name in needs and value is None:
                raise ValueError(f"scheme {self.kind!r} requires {name}")
            if name not in needs and value is not None:
                raise ValueError(f"scheme {self.kind!r} does not take {name}")
        if self.epsilon is not None:
            _check_epsilon(self.epsilon)
        if self.dilution is not None:
            _check_dilution(self.dilution)
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def is_ancestral(self) -> bool:
        return self.kind in ANCESTRAL_KINDS


@dataclass(frozen=True, eq=False)
class TargetMatrix:
    """Row i is the soft target for leaf i over the N indexed nodes."""

    t: np.ndarray
    root_mass: np.ndarray
    nodes: tuple[str, ...]
    scheme: TargetScheme

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def leaf_targets(self) -> np.ndarray:
        return self.t[:, : self.n]

    def gather(self, labels: np.ndarray) -> np.ndarray:
        return self.t[np.asarray(labels)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.nodes) + ["__root__"])
            for row, rm in zip(self.t, self.root_mass):
                w.writerow([repr(float(v)) for v in row] + [repr(float(rm))])


def one_hot(t: Taxonomy, leaf: str | int) -> np.ndarray:
    """Length-N row with a single 1 at ``leaf``."""
    row = np.zeros(t.N)
    row[t.leaf_index(leaf)] = 1.0
    return row


def uniform_smooth(t: Taxonomy, leaf: str | int, epsilon: float) -> np.ndarray:
    """Label smoothing over the n leaves."""
    _check_epsilon(epsilon)
    p = np.full(t.n, epsilon / t.n)
    p[t.leaf_index(leaf)] += 1.0 - epsilon
    return p


def lca_soft_labels(t: Taxonomy, leaf: str | int, beta: float, heights: np.ndarray | None = None) -> np.ndarray:
    """Leaf distribution proportional to exp(-beta * lca_height(c, leaf))."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if heights is None:
        heights = lca_height_matrix(t)
    h = heights[t.leaf_index(leaf)]
    w = np.exp(-beta * (h - h.min()))
    return w / w.sum()


def _check_leaf_dist(t: Taxonomy, p_tilde: np.ndarray) -> np.ndarray:
    p_tilde = np.asarray(p_tilde, dtype=np.float64)
    if p_tilde.shape != (t.n,):
        raise ValueError(f"leaf distribution must have shape ({t.n},), got {p_tilde.shape}")
    if np.any(p_tilde < 0) or abs(p_tilde.sum() - 1.0) > 1e-9:
        raise ValueError("leaf distribution must be non-negative and sum to 1")
    return p_tilde


def ancestral_smooth(t: Taxonomy, p_tilde: np.ndarray, dilution: float) -> tuple[np.ndarray, float]:
    """Vertical smoothing on a tree. Returns (row over N nodes, root mass)."""
    if not t.is_tree:
        raise TaxonomyError("ancestral_smooth needs a tree; use ancestral_smooth_dag")
    _check_dilution(dilution)
    p_tilde = _check_leaf_dist(t, p_tilde)
    row = np.zeros(t.N)
    root_mass = 0.0
    for c in np.flatnonzero(p_tilde):
        mass = p_tilde[c]
        v = t.nodes[c]
        while v != t.root:
            row[t.index[v]] += dilution * mass
            mass *= 1.0 - dilution
            v = t.parents[v][0]
        root_mass += mass
    return row, root_mass


def ancestral_smooth_dag(
    t: Taxonomy, p_tilde: np.ndarray, dilution: float, limit: int = MAX_PATHS
) -> tuple[np.ndarray, float]:
    """Vertical smoothing on a DAG; outgoing mass is split equally among parents.

    Each distinct path prefix c -> v contributes d (1-d)^m prod 1/|P(b_j)|
    to v, with the product over the m nodes the mass has left.
    """
    _check_dilution(dilution)
    p_tilde = _check_leaf_dist(t, p_tilde)
    keep = 1.0 - dilution
    row = np.zeros(t.N)
    root_mass = 0.0
    for c in np.flatnonzero(p_tilde):
        n_paths = 0
        stack = [(t.nodes[c], float(p_tilde[c]))]
        while stack:
            v, mass = stack.pop()
            if v == t.root:
                root_mass += mass
                n_paths += 1
                if n_paths > limit:
                    raise PathLimitError(f"more than {limit} ancestral paths", [t.nodes[c]])
                continue
            row[t.index[v]] += dilution * mass
            if keep == 0.0:
                continue
            parents = t.parents[v]
            share = mass * keep / len(parents)
            stack.extend((p, share) for p in parents)
    return row, root_mass


def _horizontal(t: Taxonomy, scheme: TargetScheme, i: int, heights) -> np.ndarray:
    if scheme.kind in ("uniform_smooth", "ancestral_with_uniform"):
        return uniform_smooth(t, i, scheme.epsilon)
    if scheme.kind in ("lca_soft", "ancestral_with_lca"):
        return lca_soft_labels(t, i, scheme.beta, heights)
    p = np.zeros(t.n)
    p[i] = 1.0
    return p


def build_target_matrix(t: Taxonomy, scheme: TargetScheme) -> TargetMatrix:
    heights = lca_height_matrix(t) if scheme.kind in ("lca_soft", "ancestral_with_lca") else None
    rows = np.zeros((t.n, t.N))
    root_mass = np.zeros(t.n)
    vertical = ancestral_smooth if t.is_tree else ancestral_smooth_dag
    for i in range(t.n):
        p_tilde = _horizontal(t, scheme, i, heights)
        if scheme.is_ancestral:
            rows[i], root_mass[i] = vertical(t, p_tilde, scheme.dilution)
        else:
            rows[i, : t.n] = p_tilde
    rows.setflags(write=False)
    root_mass.setflags(write=False)
    return TargetMatrix(rows, root_mass, t.nodes, scheme)
