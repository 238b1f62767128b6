"""Expander hierarchy: repeated decomposition and contraction into a tree sparsifier.

Leaves are the vertices of the input graph; every inner node is a cluster
found at some level. The weight on the edge above a node is the border of
its leaf cluster in the input graph, and ``vol0`` is the cluster's volume.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix

from .decomp import DecompConfig, Decomposition, decompose_with_auto_gamma
from .graph import Graph

log = logging.getLogger(__name__)

MAX_LEVELS = 64


class HierarchyError(RuntimeError):
    pass


@dataclass
class LevelGraph:
    """Quotient graph of one level.

    ``vertex_of[v]`` is the level vertex containing input vertex ``v`` and
    ``nodes[x]`` the tree node for level vertex ``x``.
    """

    graph: Graph
    vertex_of: np.ndarray
    nodes: np.ndarray


def contract(g: Graph, d: Decomposition | np.ndarray) -> Graph:
    """One vertex per component; capacities between components are summed and
    capacity inside a component is dropped."""
    labels = d.labels if isinstance(d, Decomposition) else np.asarray(d, dtype=np.int64)
    k = int(labels.max()) + 1 if labels.size else 0
    u, v, w = g.edges()
    a, b = labels[u], labels[v]
    keep = a != b
    mat = coo_matrix((w[keep], (a[keep], b[keep])), shape=(k, k)).tocsr()
    mat = mat + mat.T
    return Graph(mat.tocsr(), np.zeros(k))


@dataclass
class TreeSparsifier:
    parent: np.ndarray          # -1 at the root
    weight: np.ndarray          # capacity of the edge to the parent (0 at the root)
    vol0: np.ndarray
    level: np.ndarray
    n_leaves: int
    levels: list = field(default_factory=list)      # LevelGraph per level, finest first
    gammas: list = field(default_factory=list)      # threshold accepted per level

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parent < 0)[0])

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.size)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(v)
        return out

    def depth(self) -> np.ndarray:
        dep = np.zeros(self.size, dtype=np.int64)
        for v in self.topdown():
            p = self.parent[v]
            if p >= 0:
                dep[v] = dep[p] + 1
        return dep

    def topdown(self) -> list[int]:
        """Nodes ordered so every parent precedes its children."""
        ch = self.children()
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(ch[v]))
        return order

    def leaves_under(self) -> list[np.ndarray]:
        """Sorted input vertices under every node."""
        sets: list[list[int]] = [[] for _ in range(self.size)]
        for leaf in range(self.n_leaves):
            v = leaf
            while v >= 0:
                sets[v].append(leaf)
                v = self.parent[v]
        return [np.array(s, dtype=np.int64) for s in sets]

    def euler(self):
        """Entry/exit times of a preorder walk: ``x`` is under ``v`` iff ``tin[v] <= tin[x] < tout[v]``."""
        ch = self.children()
        tin = np.zeros(self.size, dtype=np.int64)
        tout = np.zeros(self.size, dtype=np.int64)
        clock = 0
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                tout[v] = clock
                continue
            tin[v] = clock
            clock += 1
            stack.append((v, True))
            stack.extend((c, False) for c in reversed(ch[v]))
        return tin, tout


def _tree_from_arrays(parent, weight, vol0, level, n_leaves, levels=None, gammas=None):
    return TreeSparsifier(np.asarray(parent, dtype=np.int64), np.asarray(weight, dtype=np.float64),
                          np.asarray(vol0, dtype=np.float64), np.asarray(level, dtype=np.int64),
                          n_leaves, levels or [], gammas or [])


def build_hierarchy(g: Graph, cfg: DecompConfig | None = None) -> TreeSparsifier:
    """Decompose and contract until one vertex remains.

    A component of size one is carried to the next level as the same tree
    node. When a level cannot contract any further because its graph has no
    edges left, a root is added above all remaining vertices.
    """
    cfg = cfg or DecompConfig()
    n = g.n
    if n == 0:
        raise ValueError("cannot build a hierarchy on an empty graph")
    parent = [-1] * n
    weight = list(g.degree - g.self_loop)
    vol0 = list(g.degree)
    level = [0] * n
    cur = g
    vertex_of = np.arange(n, dtype=np.int64)
    nodes = np.arange(n, dtype=np.int64)
    levels = [LevelGraph(cur, vertex_of, nodes)]
    gammas: list[float] = []
    gamma = cfg.gamma0
    lvl = 0
    while cur.n > 1:
        if lvl >= MAX_LEVELS:
            raise HierarchyError(f"no single root after {MAX_LEVELS} levels ({cur.n} vertices left)")
        dec = decompose_with_auto_gamma(cur, cfg, gamma, level=lvl)
        gamma = dec.gamma_used
        gammas.append(gamma)
        lvl += 1
        if dec.count == cur.n:
            # nothing merges: the level graph has no edges left
            root = len(parent)
            parent.append(-1)
            weight.append(0.0)
            vol0.append(float(sum(vol0[x] for x in nodes)))
            level.append(lvl)
            for x in nodes:
                parent[x] = root
            nodes = np.array([root], dtype=np.int64)
            vertex_of = np.zeros(n, dtype=np.int64)
            cur = Graph.from_edges(1, [], [])
            levels.append(LevelGraph(cur, vertex_of, nodes))
            break
        nxt = contract(cur, dec)
        new_nodes = np.empty(dec.count, dtype=np.int64)
        for c, members in enumerate(dec.components):
            if members.size == 1:
                new_nodes[c] = nodes[members[0]]
                continue
            node = len(parent)
            parent.append(-1)
            weight.append(float(nxt.degree[c]))
            vol0.append(float(sum(vol0[nodes[x]] for x in members)))
            level.append(lvl)
            for x in members:
                parent[nodes[x]] = node
            new_nodes[c] = node
        vertex_of = dec.labels[vertex_of]
        nodes = new_nodes
        cur = nxt
        levels.append(LevelGraph(cur, vertex_of, nodes))
        log.debug("level %d: %d vertices (gamma %.4g)", lvl, cur.n, gamma)
    root = int(nodes[0])
    weight[root] = 0.0
    return _tree_from_arrays(parent, weight, vol0, level, n, levels, gammas)


@dataclass
class TreeStats:
    height: int
    nodes: int
    level_sizes: list


def tree_stats(t: TreeSparsifier) -> TreeStats:
    sizes = [lg.graph.n for lg in t.levels] if t.levels else [t.n_leaves]
    return TreeStats(int(t.depth().max()), t.size, sizes)


def format_tree(t: TreeSparsifier) -> str:
    """One line per node, ``id parent weight vol0 level``; leaves come first."""
    lines = [f"{v} {int(t.parent[v])} {_num(t.weight[v])} {_num(t.vol0[v])} {int(t.level[v])}"
             for v in range(t.size)]
    return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_tree(path, t: TreeSparsifier) -> None:
    with open(path, "w") as fh:
        fh.write(format_tree(t))


def read_tree(path) -> TreeSparsifier:
    rows = [line.split() for line in open(path) if line.strip()]
    ids = [int(r[0]) for r in rows]
    if ids != list(range(len(rows))):
        raise ValueError("tree file ids must be 0..N-1 in order")
    parent = [int(r[1]) for r in rows]
    n_leaves = sum(1 for r in rows if int(r[4]) == 0)
    return _tree_from_arrays(parent, [float(r[2]) for r in rows], [float(r[3]) for r in rows],
                             [int(r[4]) for r in rows], n_leaves)


def leaf_labels(t: TreeSparsifier, node_set) -> np.ndarray:
    """Label each leaf by its nearest ancestor (or itself) in ``node_set``; -1 if none."""
    mark = np.zeros(t.size, dtype=bool)
    mark[list(node_set)] = True
    lab = np.full(t.size, -1, dtype=np.int64)
    for v in t.topdown():
        p = t.parent[v]
        lab[v] = v if mark[v] else (lab[p] if p >= 0 else -1)
    return lab[: t.n_leaves]
