"""Class hierarchies: parsing, validation, reachability, paths and LCAs.

The root is bookkept separately and never receives an index. Indexed nodes
are ordered leaves first (lexicographic), then internal nodes (lexicographic),
so leaf-only slices are a prefix view of every node-indexed array.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_PATHS = 10_000


class TaxonomyError(ValueError):
    """Invalid hierarchy. ``nodes`` lists the offending identifiers."""

    def __init__(self, message: str, nodes: Iterable[str] = ()):
        self.nodes = sorted(set(nodes))
        if self.nodes:
            message = f"{message}: {', '.join(self.nodes)}"
        super().__init__(message)


class PathLimitError(TaxonomyError):
    pass


@dataclass(frozen=True)
class AncestralPath:
    """Leaf-to-root path ``b_0 .. b_k``.

    ``parent_counts[j]`` is the number of parents of ``nodes[j]`` (the
    splitting factor applied when mass leaves ``b_j``); it has length k.
    """

    nodes: tuple[str, ...]
    parent_counts: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True, eq=False)
class Taxonomy:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    root: str
    n: int
    dag: bool = False
    parents: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)
    children: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)
    depth: dict[str, int] = field(repr=False, default_factory=dict)
    index: dict[str, int] = field(repr=False, default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def leaves(self) -> tuple[str, ...]:
        return self.nodes[: self.n]

    @property
    def internal(self) -> tuple[str, ...]:
        return self.nodes[self.n :]

    @property
    def is_tree(self) -> bool:
        return all(len(self.parents[v]) == 1 for v in self.nodes)

    @property
    def max_depth(self) -> int:
        return max(self.depth[v] for v in self.nodes)

    def is_leaf(self, node: str) -> bool:
        i = self.index.get(node)
        return i is not None and i < self.n

    def leaf_index(self, leaf: str | int) -> int:
        """Index of a leaf given by identifier or by index."""
        if isinstance(leaf, (int, np.integer)):
            if 0 <= leaf < self.n:
                return int(leaf)
            raise TaxonomyError(f"leaf index {leaf} out of range [0, {self.n})")
        if not self.is_leaf(leaf):
            raise TaxonomyError("not a leaf", [str(leaf)])
        return self.index[leaf]

    def node_name(self, node: str | int) -> str:
        if isinstance(node, (int, np.integer)):
            return self.nodes[int(node)]
        return node

    def depth_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for v in self.nodes:
            hist[self.depth[v]] = hist.get(self.depth[v], 0) + 1
        return dict(sorted(hist.items()))


def from_edges(edges: Sequence[tuple[str, str]], dag: bool = False) -> Taxonomy:
    """Validate a parent->child edge list and build a Taxonomy."""
    if not edges:
        raise TaxonomyError("empty hierarchy")
    seen: set[tuple[str, str]] = set()
    dupes = []
    for e in edges:
        if e in seen:
            dupes.extend(e)
        seen.add(e)
    if dupes:
        raise TaxonomyError("duplicate edge", dupes)
    self_loops = [p for p, c in edges if p == c]
    if self_loops:
        raise TaxonomyError("cycle detected", self_loops)

    all_nodes = {v for e in edges for v in e}
    parents: dict[str, list[str]] = {v: [] for v in all_nodes}
    children: dict[str, list[str]] = {v: [] for v in all_nodes}
    for p, c in edges:
        parents[c].append(p)
        children[p].append(c)

    roots = sorted(v for v in all_nodes if not parents[v])
    if not roots:
        raise TaxonomyError("cycle detected", all_nodes)
    if len(roots) > 1:
        raise TaxonomyError("multiple roots", roots)
    root = roots[0]

    # Kahn's algorithm; anything left over sits on or behind a cycle
    indeg = {v: len(parents[v]) for v in all_nodes}
    queue = deque([root])
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if len(order) != len(all_nodes):
        stuck = all_nodes - set(order)
        on_cycle = [v for v in stuck if _reaches(v, v, children)]
        if on_cycle:
            raise TaxonomyError("cycle detected", on_cycle)
        raise TaxonomyError("orphan node", stuck)

    if not dag:
        multi = [v for v in all_nodes if len(parents[v]) > 1]
        if multi:
            raise TaxonomyError("multiple parents in tree mode (use DAG mode)", multi)

    depth = {root: 0}
    bfs = deque([root])
    while bfs:
        v = bfs.popleft()
        for c in children[v]:
            if c not in depth:
                depth[c] = depth[v] + 1
                bfs.append(c)

    non_root = all_nodes - {root}
    leaves = sorted(v for v in non_root if not children[v])
    internal = sorted(v for v in non_root if children[v])
    nodes = tuple(leaves + internal)
    return Taxonomy(
        nodes=nodes,
        edges=frozenset(edges),
        root=root,
        n=len(leaves),
        dag=dag,
        parents={v: tuple(sorted(parents[v])) for v in all_nodes},
        children={v: tuple(sorted(children[v])) for v in all_nodes},
        depth=depth,
        index={v: i for i, v in enumerate(nodes)},
    )


def _reaches(src: str, dst: str, children: dict[str, list[str]]) -> bool:
    stack = list(children[src])
    visited = set()
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        if v not in visited:
            visited.add(v)
            stack.extend(children[v])
    return False


def parse_taxonomy(source: str, dag: bool = False) -> Taxonomy:
    """Parse ``parent<TAB>child`` lines. Blank lines and ``#`` comments are skipped."""
    edges = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not all(parts):
            raise TaxonomyError(f"line {lineno}: expected 'parent<TAB>child', got {raw!r}")
        edges.append((parts[0], parts[1]))
    return from_edges(edges, dag=dag)


def load_taxonomy(path: str | Path, dag: bool = False) -> Taxonomy:
    return parse_taxonomy(Path(path).read_text(encoding="utf-8"), dag=dag)


def reachability(t: Taxonomy) -> np.ndarray:
    """N x N boolean matrix, ``r[i, j]`` iff node j is i or a descendant of i."""
    r = np.eye(t.N, dtype=bool)
    # internal nodes are resolved after all their children by depth-first memo
    done = np.zeros(t.N, dtype=bool)
    done[: t.n] = True

    def fill(i: int) -> None:
        stack = [(i, False)]
        while stack:
            v, expanded = stack.pop()
            if done[v]:
                continue
            kids = [t.index[c] for c in t.children[t.nodes[v]]]
            if expanded:
                for c in kids:
                    r[v] |= r[c]
                done[v] = True
            else:
                stack.append((v, True))
                stack.extend((c, False) for c in kids if not done[c])

    for i in range(t.n, t.N):
        fill(i)
    r.setflags(write=False)
    return r


def ancestral_paths(t: Taxonomy, leaf: str | int, limit: int = MAX_PATHS) -> list[AncestralPath]:
    """All simple leaf->root paths (exactly one in a tree)."""
    start = t.nodes[t.leaf_index(leaf)]
    out: list[AncestralPath] = []
    stack = [(start,)]
    while stack:
        path = stack.pop()
        v = path[-1]
        if v == t.root:
            counts = tuple(len(t.parents[b]) for b in path[:-1])
            out.append(AncestralPath(path, counts))
            if len(out) > limit:
                raise PathLimitError(f"more than {limit} ancestral paths", [start])
            continue
        for p in reversed(t.parents[v]):
            stack.append(path + (p,))
    return out


def node_level(t: Taxonomy, node: str | int) -> int:
    """Edges from the root (minimum over paths in a DAG); the root is level 0."""
    name = t.node_name(node)
    if name not in t.depth:
        raise TaxonomyError("unknown node", [str(name)])
    return t.depth[name]


def ancestors(t: Taxonomy, node: str) -> set[str]:
    """Proper ancestors of ``node``, root included."""
    out: set[str] = set()
    stack = list(t.parents[node])
    while stack:
        v = stack.pop()
        if v not in out:
            out.add(v)
            stack.extend(t.parents[v])
    return out


def lca(t: Taxonomy, a: str | int, b: str | int) -> str:
    if not t.is_tree:
        raise TaxonomyError("lowest common ancestor is only defined for trees")
    a_name = t.nodes[t.leaf_index(a)]
    b_name = t.nodes[t.leaf_index(b)]
    a_line = [a_name]
    while a_line[-1] != t.root:
        a_line.append(t.parents[a_line[-1]][0])
    b_anc = ancestors(t, b_name) | {b_name}
    return next(v for v in a_line if v in b_anc)


def lca_height(t: Taxonomy, a: str | int, b: str | int) -> int:
    """Edges from the deeper of the two leaves up to their LCA's level."""
    a_name = t.nodes[t.leaf_index(a)]
    b_name = t.nodes[t.leaf_index(b)]
    common = lca(t, a_name, b_name)
    return max(t.depth[a_name], t.depth[b_name]) - t.depth[common]


def lca_height_matrix(t: Taxonomy) -> np.ndarray:
    """n x n integer matrix of pairwise LCA heights."""
    if not t.is_tree:
        raise TaxonomyError("lowest common ancestor is only defined for trees")
    lines = []
    for leaf in t.leaves:
        line = [leaf]
        while line[-1] != t.root:
            line.append(t.parents[line[-1]][0])
        lines.append(line)
    depth = np.array([t.depth[v] for v in t.leaves])
    h = np.zeros((t.n, t.n), dtype=int)
    for i in range(t.n):
        pos = {v: k for k, v in enumerate(lines[i])}
        for j in range(t.n):
            common = next(v for v in lines[j] if v in pos)
            h[i, j] = max(depth[i], depth[j]) - t.depth[common]
    return h
