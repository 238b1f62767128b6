"""Undirected weighted graphs with self-loops, cut quantities and file I/O.

Vertex sets are passed around as plain numpy index arrays (or boolean masks,
or any iterable of ints); :func:`as_mask` normalizes them.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

VertexSet = Union[np.ndarray, Sequence[int], Iterable[int]]

#: conductance reported for a cut whose smaller side has zero volume
INFINITE_CONDUCTANCE = math.inf


class GraphFormatError(ValueError):
    """Raised when a graph file cannot be parsed."""

    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class Graph:
    """Immutable undirected graph with non-negative capacities and self-loops.

    ``adj`` is a symmetric CSR matrix with an empty diagonal; loop weight is kept
    separately in ``self_loop`` and counts once towards the degree.
    """

    __slots__ = ("adj", "self_loop", "degree", "_edges")

    def __init__(self, adj: sp.csr_matrix, self_loop: np.ndarray | None = None):
        adj = sp.csr_matrix(adj, dtype=np.float64)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError("adjacency must be square")
        adj.setdiag(0)
        adj.eliminate_zeros()
        adj.sum_duplicates()
        adj.sort_indices()
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("capacities must be non-negative")
        if self_loop is None:
            self_loop = np.zeros(n)
        self_loop = np.asarray(self_loop, dtype=np.float64).copy()
        if self_loop.shape != (n,) or (n and self_loop.min() < 0):
            raise ValueError("self_loop must be a non-negative vector of length n")
        self.adj = adj
        self.self_loop = self_loop
        self.degree = np.asarray(adj.sum(axis=1)).ravel() + self_loop
        self._edges = None
        for arr in (adj.data, adj.indices, adj.indptr, self_loop, self.degree):
            arr.flags.writeable = False

    @classmethod
    def from_edges(cls, n: int, u, v, w=None, loops=None) -> "Graph":
        """Build a graph from an undirected edge list; duplicates are summed.

        Pairs with ``u == v`` are added to the self-loop weight and zero-capacity
        edges are dropped.
        """
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        w = np.ones(len(u)) if w is None else np.asarray(w, dtype=np.float64).ravel()
        if not (len(u) == len(v) == len(w)):
            raise ValueError("edge arrays differ in length")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise ValueError("vertex id out of range")
        if len(w) and w.min() < 0:
            raise ValueError("capacities must be non-negative")
        self_loop = np.zeros(n) if loops is None else np.asarray(loops, dtype=np.float64).copy()
        is_loop = u == v
        np.add.at(self_loop, u[is_loop], w[is_loop])
        u, v, w = u[~is_loop], v[~is_loop], w[~is_loop]
        keep = w > 0
        u, v, w = u[keep], v[keep], w[keep]
        adj = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(n, n),
        ).tocsr()
        return cls(adj, self_loop)

    @classmethod
    def from_dense(cls, matrix) -> "Graph":
        """Symmetric dense matrix; the diagonal becomes self-loop weight."""
        a = np.asarray(matrix, dtype=np.float64)
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not symmetric")
        loops = np.diag(a).copy()
        off = a - np.diag(loops)
        return cls(sp.csr_matrix(off), loops)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def m(self) -> int:
        """Number of distinct non-loop edges."""
        return self.adj.nnz // 2

    @property
    def total_volume(self) -> float:
        return float(self.degree.sum())

    @property
    def edge_capacity(self) -> float:
        """Total non-loop capacity (each edge once)."""
        return float(self.adj.data.sum()) / 2

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges as ``(u, v, w)`` with ``u < v``."""
        if self._edges is None:
            coo = self.adj.tocoo()
            keep = coo.row < coo.col
            self._edges = (coo.row[keep].astype(np.int64), coo.col[keep].astype(np.int64),
                           coo.data[keep].copy())
        return self._edges

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.adj.indptr[v], self.adj.indptr[v + 1]
        return self.adj.indices[lo:hi], self.adj.data[lo:hi]

    def capacity(self, u: int, v: int) -> float:
        if u == v:
            return float(self.self_loop[u])
        return float(self.adj[u, v])

    def to_dense(self) -> np.ndarray:
        """Dense symmetric matrix with loop weights on the diagonal."""
        return self.adj.toarray() + np.diag(self.self_loop)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, vol={self.total_volume:g})"


def as_mask(g: Graph, s: VertexSet) -> np.ndarray:
    """Boolean membership vector for ``s`` over ``range(g.n)``."""
    arr = np.asarray(s if not isinstance(s, (set, frozenset)) else sorted(s))
    if arr.dtype == bool:
        if arr.shape != (g.n,):
            raise ValueError("boolean mask has wrong length")
        return arr
    idx = arr.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= g.n):
        raise ValueError("vertex id out of range")
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    return mask


def volume(g: Graph, s: VertexSet) -> float:
    return float(g.degree[as_mask(g, s)].sum())


def border(g: Graph, s: VertexSet) -> float:
    """Total capacity of edges with exactly one endpoint in ``s``."""
    mask = as_mask(g, s)
    u, v, w = g.edges()
    return float(w[mask[u] != mask[v]].sum())


def conductance_cut(g: Graph, s: VertexSet) -> float:
    """``border(S) / min(vol(S), vol(V - S))``; ``inf`` if the smaller side has no volume."""
    mask = as_mask(g, s)
    size = int(mask.sum())
    if size == 0 or size == g.n:
        raise ValueError("conductance is only defined for proper non-empty cuts")
    vs = float(g.degree[mask].sum())
    small = min(vs, g.total_volume - vs)
    if small <= 0:
        return INFINITE_CONDUCTANCE
    return border(g, mask) / small


@dataclass
class Partition:
    """Assignment of every vertex to one of ``k`` clusters.

    ``border`` and ``volume`` hold per-cluster aggregates when the partition was
    built against a graph.
    """

    assignment: np.ndarray
    k: int
    border: np.ndarray | None = None
    volume: np.ndarray | None = None

    @classmethod
    def from_labels(cls, g: Graph | None, labels, k: int | None = None) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64).copy()
        if labels.size and labels.min() < 0:
            raise ValueError("cluster ids must be non-negative")
        if k is None:
            k = int(labels.max()) + 1 if labels.size else 0
        if labels.size and labels.max() >= k:
            raise ValueError("cluster id out of range")
        if g is None:
            return cls(labels, k)
        if labels.shape != (g.n,):
            raise ValueError("assignment length does not match the graph")
        b, vol = cluster_aggregates(g, labels, k)
        return cls(labels, k, b, vol)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def clusters(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.k + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.k)]

    def is_k_cut(self) -> bool:
        return bool(self.k >= 1 and np.all(self.sizes() > 0))


def cluster_aggregates(g: Graph, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster ``(border, volume)`` for a label vector."""
    u, v, w = g.edges()
    crossing = labels[u] != labels[v]
    b = np.bincount(labels[u[crossing]], weights=w[crossing], minlength=k)
    b += np.bincount(labels[v[crossing]], weights=w[crossing], minlength=k)
    vol = np.bincount(labels, weights=g.degree, minlength=k)
    return b, vol


def normalized_cut_value(g: Graph, p: Partition | np.ndarray, exact: bool = False):
    """Sum over clusters of ``border / volume``.

    With ``exact=True`` the value is a :class:`fractions.Fraction` computed from
    the float capacities without rounding.
    """
    if not isinstance(p, Partition):
        p = Partition.from_labels(g, p)
    labels, k = p.assignment, p.k
    if labels.shape != (g.n,):
        raise ValueError("partition does not match the graph")
    if np.any(np.bincount(labels, minlength=k) == 0):
        raise ValueError("partition has an empty cluster")
    if exact:
        u, v, w = g.edges()
        bs = [Fraction(0)] * k
        for a, b, c in zip(labels[u].tolist(), labels[v].tolist(), w.tolist()):
            if a != b:
                bs[a] += Fraction(c)
                bs[b] += Fraction(c)
        vols = [Fraction(0)] * k
        for lab, d in zip(labels.tolist(), g.degree.tolist()):
            vols[lab] += Fraction(d)
        if any(x == 0 for x in vols):
            raise ValueError("partition has a zero-volume cluster")
        return sum((bs[i] / vols[i] for i in range(k)), Fraction(0))
    b, vol = cluster_aggregates(g, labels, k)
    if np.any(vol <= 0):
        raise ValueError("partition has a zero-volume cluster")
    return float(np.sum(b / vol))


def induced_with_self_loops(g: Graph, a: VertexSet) -> Graph:
    """Subgraph on ``a`` (relabelled in increasing id order) that keeps every degree.

    Capacity to vertices outside ``a`` is turned into self-loop weight.
    """
    mask = as_mask(g, a)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("cannot induce on an empty vertex set")
    rows = g.adj[idx]
    sub = rows[:, idx]
    outside = rows.multiply(~mask[np.newaxis, :]).tocsr()
    removed = np.asarray(outside.sum(axis=1)).ravel()
    return Graph(sub, g.self_loop[idx] + removed)


def connected_components(g: Graph) -> list[np.ndarray]:
    """Components as sorted index arrays, ordered by smallest contained id."""
    labels = component_labels(g)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels)
    return np.split(order, np.cumsum(counts)[:-1])


def component_labels(g: Graph) -> np.ndarray:
    """Component id per vertex, numbered by smallest contained vertex."""
    if g.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = _cc(g.adj, directed=False)
    return canonical_labels(labels)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber labels so cluster ids follow the order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv.ravel()]


# --------------------------------------------------------------------------- I/O


def _tokens(line: str, lineno: int, path) -> list[float]:
    out = []
    for tok in line.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise GraphFormatError(f"non-numeric token {tok!r}", lineno, path) from None
    return out


def _as_id(x: float, lineno: int, path) -> int:
    if x != int(x):
        raise GraphFormatError(f"vertex id {x!r} is not an integer", lineno, path)
    return int(x)


def parse_metis(text: str, path: str | None = None) -> Graph:
    lines = text.splitlines()
    pos = 0
    while pos < len(lines) and (lines[pos].lstrip().startswith("%") or not lines[pos].strip()):
        pos += 1
    if pos == len(lines):
        raise GraphFormatError("missing header", None, path)
    header_no = pos + 1
    head = _tokens(lines[pos], header_no, path)
    if not 2 <= len(head) <= 4 or any(x != int(x) or x < 0 for x in head):
        raise GraphFormatError("malformed header, expected 'n m [fmt [ncon]]'", header_no, path)
    n, m = int(head[0]), int(head[1])
    fmt = f"{int(head[2]):03d}" if len(head) >= 3 else "000"
    if len(fmt) != 3 or set(fmt) - {"0", "1"}:
        raise GraphFormatError(f"unsupported fmt code {fmt!r}", header_no, path)
    has_size, has_vwgt, has_ewgt = fmt[0] == "1", fmt[1] == "1", fmt[2] == "1"
    ncon = int(head[3]) if len(head) == 4 else (1 if has_vwgt else 0)
    skip = int(has_size) + (ncon if has_vwgt else 0)
    rows, cols, vals = [], [], []
    loops = np.zeros(n)
    vertex = 0
    pos += 1
    last_line = header_no
    while vertex < n and pos < len(lines):
        raw = lines[pos]
        pos += 1
        if raw.lstrip().startswith("%"):
            continue
        lineno = pos
        last_line = lineno
        toks = _tokens(raw, lineno, path)[skip:]
        step = 2 if has_ewgt else 1
        if len(toks) % step:
            raise GraphFormatError("dangling neighbour without weight", lineno, path)
        for j in range(0, len(toks), step):
            nb = _as_id(toks[j], lineno, path)
            if not 1 <= nb <= n:
                raise GraphFormatError(f"vertex id {nb} out of range 1..{n}", lineno, path)
            wt = toks[j + 1] if has_ewgt else 1.0
            if wt < 0:
                raise GraphFormatError(f"negative weight {wt:g}", lineno, path)
            if nb - 1 == vertex:
                loops[vertex] += wt
            else:
                rows.append(vertex)
                cols.append(nb - 1)
                vals.append(wt)
        vertex += 1
    if vertex < n:
        raise GraphFormatError(f"expected {n} adjacency lines, found {vertex}", last_line, path)
    for extra in range(pos, len(lines)):
        if lines[extra].strip() and not lines[extra].lstrip().startswith("%"):
            raise GraphFormatError("more adjacency lines than vertices", extra + 1, path)
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    if (a - a.T).count_nonzero():
        raise GraphFormatError("adjacency lists are not symmetric", header_no, path)
    found = len(vals) // 2 + int(np.count_nonzero(loops))
    if found != m:
        raise GraphFormatError(f"header declares {m} edges but lists contain {found}", header_no, path)
    return Graph(a, loops)


def parse_edge_list(text: str, path: str | None = None) -> Graph:
    us, vs, ws, linenos = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#%":
            continue
        toks = _tokens(s, lineno, path)
        if len(toks) not in (2, 3):
            raise GraphFormatError("expected 'u v [w]'", lineno, path)
        a, b = _as_id(toks[0], lineno, path), _as_id(toks[1], lineno, path)
        if a < 0 or b < 0:
            raise GraphFormatError("negative vertex id", lineno, path)
        wt = toks[2] if len(toks) == 3 else 1.0
        if wt < 0:
            raise GraphFormatError(f"negative weight {wt:g}", lineno, path)
        us.append(a)
        vs.append(b)
        ws.append(wt)
        linenos.append(lineno)
    if not us:
        return Graph.from_edges(0, [], [])
    base = 0 if min(min(us), min(vs)) == 0 else 1
    n = max(max(us), max(vs)) + 1 - base
    return Graph.from_edges(n, np.array(us) - base, np.array(vs) - base, ws)


def load_graph(path: str | os.PathLike, format: str = "metis") -> Graph:
    """Read a METIS or whitespace edge-list file."""
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if format == "metis":
        return parse_metis(text, path)
    if format in ("edge_list", "edgelist", "edges"):
        return parse_edge_list(text, path)
    raise ValueError(f"unknown graph format {format!r}")


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def format_metis(g: Graph) -> str:
    weighted = bool(np.any(g.adj.data != 1) or np.any((g.self_loop != 0) & (g.self_loop != 1)))
    m = g.m + int(np.count_nonzero(g.self_loop))
    out = [f"{g.n} {m}" + (" 1" if weighted else "")]
    for v in range(g.n):
        nbrs, wts = g.neighbors(v)
        items = [(int(j), float(c)) for j, c in zip(nbrs, wts)]
        if g.self_loop[v] > 0:
            items.append((v, float(g.self_loop[v])))
            items.sort()
        if weighted:
            out.append(" ".join(f"{j + 1} {_num(c)}" for j, c in items))
        else:
            out.append(" ".join(str(j + 1) for j, _ in items))
    return "\n".join(out) + "\n"


def write_metis(g: Graph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_metis(g))


def write_partition(labels, path: str | os.PathLike) -> None:
    """One cluster id per line; line ``i`` belongs to vertex ``i``."""
    labels = labels.assignment if isinstance(labels, Partition) else labels
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(x)}\n" for x in np.asarray(labels))


def read_partition(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
