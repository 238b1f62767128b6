"""Normalized k-cut on the hierarchy tree and refinement on the input graph.

A solution is a set of tree edges, each identified by its lower node. The
cluster of a cut edge ``e`` holds the leaves whose first cut edge on the way
to the root is ``e``; leaves with no cut edge above them form the residual
cluster. A cluster's tree border is the weight of its own edge plus the
weights of the cut edges directly below it, so clusters that are full
subtrees are charged exactly their border in the input graph.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .decomp import DecompConfig
from .graph import Graph, Partition, cluster_aggregates, normalized_cut_value
from .hierarchy import TreeSparsifier, build_hierarchy, leaf_labels

log = logging.getLogger(__name__)

GREEDY = "greedy"
DP = "dp"
MOVE_TOL = 1e-12


class SolverError(ValueError):
    pass


@dataclass
class TreeSolution:
    edges: list                       # cut edges, each named by its lower node
    value: float                      # tree objective of all edges
    prefix_values: list = field(default_factory=list)  # objective using the first k'-1 edges, k' = 1..k


def _num(x, exact):
    return Fraction(float(x)) if exact else float(x)


def _validate_edges(t: TreeSparsifier, edges) -> list[int]:
    edges = [int(e) for e in edges]
    if len(set(edges)) != len(edges):
        raise SolverError("cut edges must be distinct")
    for e in edges:
        if not 0 <= e < t.size or t.parent[e] < 0:
            raise SolverError(f"node {e} has no edge to a parent")
    return edges


def _cluster_sums(t: TreeSparsifier, edges, exact=False):
    """Tree border and volume per cluster: one entry per edge in ``edges``, then the residual."""
    edges = _validate_edges(t, edges)
    cut = set(edges)
    idx = {e: i for i, e in enumerate(edges)}
    k = len(edges) + 1
    bord = [_num(t.weight[e], exact) for e in edges] + [_num(0, exact)]
    vol = [_num(t.vol0[e], exact) for e in edges] + [_num(t.vol0[t.root], exact)]
    for e in edges:
        a = t.parent[e]
        while a >= 0 and a not in cut:
            a = t.parent[a]
        j = idx[a] if a >= 0 else k - 1
        bord[j] += _num(t.weight[e], exact)
        vol[j] -= _num(t.vol0[e], exact)
    return bord, vol


def tree_objective(t: TreeSparsifier, edges, exact: bool = False):
    """Sum of tree border over volume across the clusters defined by ``edges``."""
    bord, vol = _cluster_sums(t, edges, exact)
    total = _num(0, exact)
    for b, v in zip(bord, vol):
        if v <= 0:
            raise SolverError("solution has a cluster of zero volume")
        total += b / v
    return total


def _prefix_values(t, edges, exact=False):
    return [tree_objective(t, edges[:j], exact) for j in range(len(edges) + 1)]


def greedy_cut(t: TreeSparsifier, k: int) -> TreeSolution:
    """Cut ``k - 1`` edges, each time the one whose cut raises the tree objective least.

    Ties are broken by the smaller increase in total border, then the smaller
    edge id.
    """
    if k < 1:
        raise SolverError("k must be at least 1")
    if k > t.n_leaves:
        raise SolverError(f"k={k} exceeds the number of leaves ({t.n_leaves})")
    size, root = t.size, t.root
    par, w, vol0 = t.parent, t.weight, t.vol0
    depth = t.depth()
    by_depth = [np.flatnonzero(depth == dd) for dd in range(int(depth.max()), 0, -1)]
    tin, tout = t.euler()
    cut = np.zeros(size, dtype=bool)
    owner = np.full(size, root, dtype=np.int64)
    cb = np.zeros(size)
    cv = np.zeros(size)
    cv[root] = vol0[root]
    ids = np.arange(size)
    edges: list[int] = []
    for _ in range(k - 1):
        acc_w = np.zeros(size)
        acc_v = np.zeros(size)
        for nodes in by_depth:
            cw = np.where(cut[nodes], w[nodes], acc_w[nodes])
            cvv = np.where(cut[nodes], vol0[nodes], acc_v[nodes])
            acc_w += np.bincount(par[nodes], weights=cw, minlength=size)
            acc_v += np.bincount(par[nodes], weights=cvv, minlength=size)
        new_v = vol0 - acc_v
        new_b = w + acc_w
        o = owner
        old_v = cv[o] - new_v
        old_b = cb[o] + w - acc_w
        ok = (~cut) & (par >= 0) & (new_v > 0) & (old_v > 0)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            raise SolverError(f"no eligible edge left after {len(edges)} cuts")
        oc = o[cand]
        delta = new_b[cand] / new_v[cand] + old_b[cand] / old_v[cand] - cb[oc] / cv[oc]
        e = int(cand[np.lexsort((ids[cand], 2 * w[cand], delta))[0]])
        oe = int(o[e])
        cb[oe], cv[oe] = old_b[e], old_v[e]
        cb[e], cv[e] = new_b[e], new_v[e]
        cut[e] = True
        sub = (tin >= tin[e]) & (tin < tout[e]) & (owner == oe)
        owner[sub] = e
        edges.append(e)
    prefix = _prefix_values(t, edges)
    return TreeSolution(edges, prefix[-1], prefix)


# ---------------------------------------------------------------------- binarization


@dataclass
class BinaryTree:
    left: np.ndarray       # -1 when absent
    right: np.ndarray
    parent: np.ndarray
    weight: np.ndarray
    vol0: np.ndarray
    cuttable: np.ndarray   # False on the root and on every edge above a dummy
    original: np.ndarray   # node id in the source tree, -1 for dummies
    root: int

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def dummies(self) -> int:
        return int((self.original < 0).sum())


def binarize(t: TreeSparsifier) -> BinaryTree:
    """Give every node at most two children by inserting left-deep chains of dummy nodes.

    Original nodes keep their ids; dummies get ids from ``t.size`` on and their
    edges are marked non-cuttable.
    """
    ch = t.children()
    parent = list(t.parent)
    weight = list(t.weight)
    vol0 = list(t.vol0)
    original = list(range(t.size))
    left = [-1] * t.size
    right = [-1] * t.size

    def new_node(p):
        parent.append(p)
        weight.append(0.0)
        vol0.append(0.0)
        original.append(-1)
        left.append(-1)
        right.append(-1)
        return len(parent) - 1

    for v in range(t.size):
        kids = ch[v]
        cur = v
        while len(kids) > 2:
            last, kids = kids[-1], kids[:-1]
            dummy = new_node(cur)
            left[cur], right[cur] = dummy, last
            parent[last] = cur
            cur = dummy
        if kids:
            left[cur] = kids[0]
            parent[kids[0]] = cur
        if len(kids) > 1:
            right[cur] = kids[1]
            parent[kids[1]] = cur
    # aggregates for dummies, bottom-up (dummies are created after their parents)
    for x in range(len(parent) - 1, t.size - 1, -1):
        vol0[x] = sum(vol0[c] for c in (left[x], right[x]) if c >= 0)
        weight[x] = sum(weight[c] for c in (left[x], right[x]) if c >= 0)
    original = np.array(original, dtype=np.int64)
    parent = np.array(parent, dtype=np.int64)
    cuttable = (original >= 0) & (parent >= 0)
    return BinaryTree(np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), parent,
                      np.array(weight), np.array(vol0), cuttable, original, t.root)


# --------------------------------------------------------------------------- DP


class DPTable:
    """Pareto tables for the tree k-cut.

    For node ``v`` and ``j`` closed clusters inside its subtree, each cell keeps
    the non-dominated states ``(closed, open_border, open_vol)``: the summed
    value of closed clusters, the tree border already charged to the still-open
    cluster containing ``v``, and that cluster's volume. Smaller ``closed`` and
    ``open_border`` and larger ``open_vol`` are better. Cutting the edge above
    ``v`` closes the open cluster at ``(w(v) + open_border) / open_vol``. At the
    root the open cluster is the residual cluster.
    """

    def __init__(self, t: TreeSparsifier, kmax: int, exact: bool = False, cap: int | None = None):
        if kmax < 1:
            raise SolverError("k must be at least 1")
        if kmax > t.n_leaves:
            raise SolverError(f"k={kmax} exceeds the number of leaves ({t.n_leaves})")
        self.tree = t
        self.kmax = kmax
        self.exact = exact
        self.bt = bt = binarize(t)
        if cap is None and int(bt.cuttable.sum()) > 40:
            cap = 24
        self.cap = cap
        self.cells: list[dict] = [None] * bt.size
        self.zero = zero = _num(0, exact)
        w = [_num(x, exact) for x in bt.weight]
        vol = [_num(x, exact) for x in bt.vol0]
        for v in self._postorder():
            kids = [c for c in (bt.left[v], bt.right[v]) if c >= 0]
            if not kids:
                self.cells[v] = {0: [(zero, zero, vol[v], None)]}
                continue
            opts = [self._options(c, w[c]) for c in kids]
            if len(opts) == 1:
                merged = {j: [(s[0], s[1], s[2], (s[3],)) for s in lst] for j, lst in opts[0].items()}
            else:
                merged = {}
                for ja, la in opts[0].items():
                    for jb, lb in opts[1].items():
                        j = ja + jb
                        if j > kmax - 1:
                            continue
                        bucket = merged.setdefault(j, [])
                        for a in la:
                            for b in lb:
                                bucket.append((a[0] + b[0], a[1] + b[1], a[2] + b[2], (a[3], b[3])))
            self.cells[v] = {j: self._prune(lst) for j, lst in merged.items()}
        root = bt.root
        self.best: dict[int, tuple] = {}
        for j, lst in self.cells[root].items():
            top = None
            for i, s in enumerate(lst):
                if s[2] <= 0:
                    continue
                val = s[0] + s[1] / s[2]
                if top is None or val < top[0]:
                    top = (val, i)
            if top is not None:
                self.best[j + 1] = top

    def _postorder(self):
        bt = self.bt
        out, stack = [], [(bt.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                out.append(v)
                continue
            stack.append((v, True))
            for c in (bt.right[v], bt.left[v]):
                if c >= 0:
                    stack.append((c, False))
        return out

    def _options(self, c, wc):
        """States child ``c`` hands to its parent: edge kept, or edge cut (closing its cluster)."""
        cuttable = bool(self.bt.cuttable[c])
        out: dict[int, list] = {}
        for j, lst in self.cells[c].items():
            for i, s in enumerate(lst):
                out.setdefault(j, []).append((s[0], s[1], s[2], (c, j, i, False)))
                if cuttable and s[2] > 0 and j + 1 <= self.kmax - 1:
                    closed = s[0] + (wc + s[1]) / s[2]
                    out.setdefault(j + 1, []).append((closed, wc, self.zero, (c, j, i, True)))
        return out

    def _prune(self, states):
        states.sort(key=lambda s: (s[0], s[1], -s[2]))
        kept = []
        for s in states:
            if any(k[0] <= s[0] and k[1] <= s[1] and k[2] >= s[2] for k in kept):
                continue
            kept.append(s)
        if self.cap is not None and len(kept) > self.cap:
            def score(s):
                return s[0] + (s[1] / s[2] if s[2] > 0 else float("inf"))
            kept.sort(key=lambda s: (score(s), s[0]))
            kept = kept[: self.cap]
        return kept

    def value(self, k: int):
        if k not in self.best:
            raise SolverError(f"no feasible {k}-cut on this tree")
        return self.best[k][0]

    def edges(self, k: int) -> list[int]:
        """Cut edges (original node ids) of the best ``k``-cluster solution."""
        if k not in self.best:
            raise SolverError(f"no feasible {k}-cut on this tree")
        out: list[int] = []
        stack = [(self.bt.root, k - 1, self.best[k][1])]
        while stack:
            v, j, i = stack.pop()
            back = self.cells[v][j][i][3]
            if back is None:
                continue
            for c, jc, ic, was_cut in back:
                if was_cut:
                    out.append(int(self.bt.original[c]))
                stack.append((c, jc, ic))
        return sorted(out)


def dp_cut(t: TreeSparsifier, k: int, exact: bool = False, cap: int | None = None) -> TreeSolution:
    """Minimum tree objective over all ``k - 1`` edge subsets (exact unless capped)."""
    table = DPTable(t, k, exact=exact, cap=cap)
    edges = table.edges(k)
    prefix = [table.value(j) if j in table.best else None for j in range(1, k + 1)]
    return TreeSolution(edges, tree_objective(t, edges, exact), prefix)


# --------------------------------------------------------------- cluster assignment


def assign_clusters(t: TreeSparsifier, sol: TreeSolution | list, g: Graph | None = None) -> Partition:
    """Cluster ``j`` collects the leaves whose first cut edge towards the root is
    ``edges[j]``; all other leaves form the last cluster."""
    edges = _validate_edges(t, sol.edges if isinstance(sol, TreeSolution) else sol)
    k = len(edges) + 1
    owner = leaf_labels(t, edges)
    remap = np.full(t.size + 1, k - 1, dtype=np.int64)
    for j, e in enumerate(edges):
        remap[e] = j
    labels = remap[owner]
    if np.bincount(labels, minlength=k).min() == 0:
        raise SolverError("solution leaves a cluster empty")
    return Partition.from_labels(g, labels, k)


# -------------------------------------------------------------------------- refine


def refine(levels: list, g0: Graph, p: Partition, max_passes: int = 10,
           climb_steps: int = 32) -> tuple[Partition, int]:
    """Move whole level vertices between clusters while that lowers the normalized cut.

    Levels are visited from coarse to fine. A level vertex may move only when
    all its input vertices share one cluster; it moves to the adjacent cluster
    with the most negative change if that change is below ``-1e-12`` and its
    source cluster keeps positive volume. On the input graph, a local optimum
    is then escaped by a tentative sequence of up to ``climb_steps`` best
    single moves (worsening ones allowed, each vertex at most once) that is
    rolled back to its best prefix; improvements trigger further passes.
    Returns the refined partition and the number of kept moves.
    """
    labels = np.array(p.assignment, dtype=np.int64)
    k = int(p.k)
    border, vol = cluster_aggregates(g0, labels, k)
    count = np.bincount(labels, minlength=k)
    state = (labels, border, vol, count)
    moves = 0
    for lg in reversed(levels):
        if lg.graph.n >= 2 and lg.graph.n < g0.n:
            moves += _level_passes(g0, np.asarray(lg.vertex_of, dtype=np.int64), lg.graph.adj, state, max_passes)
    ident = np.arange(g0.n, dtype=np.int64)
    if k >= 2 and g0.n >= 2:
        moves += _level_passes(g0, ident, g0.adj, state, max_passes)
        for _ in range(max_passes if climb_steps > 0 else 0):
            gained = _climb(g0, state, climb_steps)
            if gained == 0:
                break
            moves += gained + _level_passes(g0, ident, g0.adj, state, max_passes)
    return Partition.from_labels(g0, labels, k), moves


def _level_passes(g0, xo, adj, state, max_passes) -> int:
    """Improving passes over the pure vertices of one level; returns the number of moves."""
    labels, border, vol, count = state
    k = len(border)
    nl = adj.shape[0]
    eu, ev, ew = g0.edges()
    order = np.argsort(xo, kind="stable")
    bounds = np.searchsorted(xo[order], np.arange(nl + 1))
    xvol = np.bincount(xo, weights=g0.degree, minlength=nl)
    xcnt = np.bincount(xo, minlength=nl)
    cross = xo[eu] != xo[ev]
    a_x, b_x, c_w = xo[eu[cross]], xo[ev[cross]], ew[cross]
    a_v, b_v = eu[cross], ev[cross]
    moves = 0
    for _ in range(max_passes):
        lo = np.full(nl, k, dtype=np.int64)
        hi = np.full(nl, -1, dtype=np.int64)
        np.minimum.at(lo, xo, labels)
        np.maximum.at(hi, xo, labels)
        pure = lo == hi
        conn = np.bincount(a_x * k + labels[b_v], weights=c_w, minlength=nl * k)
        conn += np.bincount(b_x * k + labels[a_v], weights=c_w, minlength=nl * k)
        conn = conn.reshape(nl, k)
        ext = conn.sum(axis=1)
        xl = np.where(pure, lo, 0)
        cand = np.flatnonzero(pure & (xvol > 0) & (xcnt < count[xl]) & (ext > conn[np.arange(nl), xl]))
        if cand.size == 0:
            break
        delta, target = _best_moves(cand, xl[cand], conn[cand], ext[cand], xvol[cand], border, vol)
        keep = delta < -MOVE_TOL
        cand, delta = cand[keep], delta[keep]
        touched = np.zeros(nl, dtype=bool)
        moved = 0
        for x in cand[np.lexsort((cand, delta))]:
            if touched[x]:
                continue
            a = int(labels[order[bounds[x]]])
            if xcnt[x] >= count[a]:
                continue
            dl, tg = _best_moves(np.array([x]), np.array([a]), conn[x:x + 1], ext[x:x + 1],
                                 xvol[x:x + 1], border, vol)
            if not dl[0] < -MOVE_TOL:
                continue
            b = int(tg[0])
            _apply(state, a, b, conn[x, a], conn[x, b], ext[x], xvol[x], xcnt[x])
            labels[order[bounds[x]:bounds[x + 1]]] = b
            touched[x] = True
            touched[adj.indices[adj.indptr[x]:adj.indptr[x + 1]]] = True
            moved += 1
        moves += moved
        if moved == 0:
            break
    return moves


def _apply(state, a, b, conn_a, conn_b, ext, xvol, xcnt):
    _, border, vol, count = state
    border[a] += 2 * conn_a - ext
    border[b] += ext - 2 * conn_b
    vol[a] -= xvol
    vol[b] += xvol
    count[a] -= xcnt
    count[b] += xcnt


def _climb(g0, state, steps) -> int:
    """Tentative best-move sequence on the input graph, kept up to its best prefix.

    Returns the number of kept moves (zero when no prefix improves the objective).
    """
    labels, border, vol, count = state
    k = len(border)
    n = g0.n
    adj = g0.adj
    deg = g0.degree
    rows = np.repeat(np.arange(n), np.diff(adj.indptr))
    conn = np.bincount(rows * k + labels[adj.indices], weights=adj.data, minlength=n * k).reshape(n, k)
    ext = conn.sum(axis=1)
    ones = np.ones(n, dtype=np.int64)
    locked = np.zeros(n, dtype=bool)
    start = float(np.sum(border / vol))
    best, best_len, total = start, 0, start
    trail = []
    for _ in range(min(steps, n)):
        cand = np.flatnonzero(~locked & (deg > 0) & (count[labels] > 1) & (ext > conn[np.arange(n), labels]))
        if cand.size == 0:
            break
        delta, target = _best_moves(cand, labels[cand], conn[cand], ext[cand], deg[cand], border, vol)
        i = int(np.lexsort((cand, delta))[0])
        if not np.isfinite(delta[i]):
            break
        x, a, b = int(cand[i]), int(labels[cand[i]]), int(target[i])
        _apply(state, a, b, conn[x, a], conn[x, b], ext[x], deg[x], ones[x])
        labels[x] = b
        nb = adj.indices[adj.indptr[x]:adj.indptr[x + 1]]
        w = adj.data[adj.indptr[x]:adj.indptr[x + 1]]
        np.subtract.at(conn[:, a], nb, w)
        np.add.at(conn[:, b], nb, w)
        locked[x] = True
        trail.append((x, a, b))
        total = float(np.sum(border / vol))
        if total < best - MOVE_TOL:
            best, best_len = total, len(trail)
    for x, a, b in reversed(trail[best_len:]):
        nb = adj.indices[adj.indptr[x]:adj.indptr[x + 1]]
        w = adj.data[adj.indptr[x]:adj.indptr[x + 1]]
        cb, ca = conn[x, b], conn[x, a]
        _apply(state, b, a, cb, ca, ext[x], deg[x], 1)
        labels[x] = a
        np.subtract.at(conn[:, b], nb, w)
        np.add.at(conn[:, a], nb, w)
    border[:], vol[:] = cluster_aggregates(g0, labels, k)
    return best_len


def _best_moves(xs, src, conn, ext, xvol, border, vol):
    """Best target cluster and objective change for moving each of ``xs`` out of ``src``."""
    rows = np.arange(len(xs))
    b_src, v_src = border[src], vol[src]
    new_src_v = v_src - xvol
    ok_src = new_src_v > 1e-12 * np.maximum(v_src, 1.0)
    safe = np.where(ok_src, new_src_v, 1.0)
    src_term = (b_src - ext + 2 * conn[rows, src]) / safe - b_src / v_src
    new_b = border[None, :] + ext[:, None] - 2 * conn
    new_v = vol[None, :] + xvol[:, None]
    dst_term = new_b / new_v - border[None, :] / vol[None, :]
    delta = src_term[:, None] + dst_term
    valid = (conn > 0) & ok_src[:, None]
    valid[rows, src] = False
    delta = np.where(valid, delta, np.inf)
    target = np.argmin(delta, axis=1)
    return delta[rows, target], target


# ------------------------------------------------------------------------ pipeline


@dataclass
class KResult:
    k: int
    partition: Partition
    theta: float                 # exact normalized cut after refinement
    theta_tree: float            # tree objective of the tree solution
    theta_unrefined: float       # exact normalized cut of the tree solution
    moves: int
    refine_time: float


@dataclass
class NcutRun:
    tree: TreeSparsifier
    results: dict
    hierarchy_time: float
    solve_time: float

    def total_time(self, k: int) -> float:
        return self.hierarchy_time + self.solve_time + self.results[k].refine_time


def normalize_ks(ks) -> list[int]:
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise SolverError("k values must be at least 1")
    return ks


def solve_ncut(g: Graph, ks, cfg: DecompConfig | None = None, heuristic: str = GREEDY,
               refine_result: bool = True, max_passes: int = 10,
               tree: TreeSparsifier | None = None) -> NcutRun:
    """Build the hierarchy once and solve the normalized cut for every ``k`` in ``ks``.

    The tree problem is solved once at the largest ``k``; smaller values reuse
    the greedy prefix or the DP table.
    """
    ks = normalize_ks(ks)
    if ks[-1] > g.n:
        raise SolverError(f"k={ks[-1]} exceeds the vertex count {g.n}")
    if heuristic not in (GREEDY, DP):
        raise SolverError(f"unknown heuristic {heuristic!r}")
    if g.total_volume <= 0:
        raise SolverError("graph has zero volume")
    t0 = time.perf_counter()
    if tree is None:
        tree = build_hierarchy(g, cfg)
    t1 = time.perf_counter()
    kmax = ks[-1]
    if heuristic == GREEDY:
        sol = greedy_cut(tree, kmax)
        edge_sets = {k: sol.edges[: k - 1] for k in ks}
    else:
        table = DPTable(tree, kmax)
        edge_sets = {k: table.edges(k) for k in ks}
    t2 = time.perf_counter()
    results = {}
    for k in ks:
        edges = edge_sets[k]
        part = assign_clusters(tree, edges, g)
        theta_tree = tree_objective(tree, edges)
        theta0 = normalized_cut_value(g, part)
        tr = time.perf_counter()
        moves = 0
        if refine_result and k > 1:
            part, moves = refine(tree.levels, g, part, max_passes)
        theta = normalized_cut_value(g, part)
        results[k] = KResult(k, part, theta, theta_tree, theta0, moves, time.perf_counter() - tr)
    return NcutRun(tree, results, t1 - t0, t2 - t1)
