"""Deterministic synthetic graphs."""
from __future__ import annotations

import numpy as np

from .graph import Graph


def complete(n: int) -> Graph:
    if n < 1:
        raise ValueError("n must be positive")
    u, v = np.triu_indices(n, 1)
    return Graph.from_edges(n, u, v)


def cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    u = np.arange(n)
    return Graph.from_edges(n, u, (u + 1) % n)


def path(n: int) -> Graph:
    if n < 1:
        raise ValueError("n must be positive")
    u = np.arange(n - 1)
    return Graph.from_edges(n, u, u + 1)


def star(leaves: int) -> Graph:
    if leaves < 1:
        raise ValueError("a star needs at least one leaf")
    return Graph.from_edges(leaves + 1, np.zeros(leaves, dtype=int), np.arange(1, leaves + 1))


def grid(rows: int, cols: int) -> Graph:
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")
    ids = np.arange(rows * cols).reshape(rows, cols)
    u = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    v = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    return Graph.from_edges(rows * cols, u, v)


def barbell(size: int = 3) -> Graph:
    """Two cliques of ``size`` vertices joined by one edge ``(size - 1, size)``."""
    if size < 2:
        raise ValueError("clique size must be at least 2")
    u, v = np.triu_indices(size, 1)
    uu = np.concatenate([u, u + size, [size - 1]])
    vv = np.concatenate([v, v + size, [size]])
    return Graph.from_edges(2 * size, uu, vv)


def disjoint_union(*graphs: Graph) -> Graph:
    us, vs, ws, loops = [], [], [], []
    off = 0
    for g in graphs:
        u, v, w = g.edges()
        us.append(u + off)
        vs.append(v + off)
        ws.append(w)
        loops.append(g.self_loop)
        off += g.n
    return Graph.from_edges(off, np.concatenate(us), np.concatenate(vs), np.concatenate(ws),
                            np.concatenate(loops))


def sbm(blocks: int, size: int, p_in: float, p_out: float, seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Stochastic block model with equal blocks; returns the graph and the planted labels."""
    if blocks < 1 or size < 1:
        raise ValueError("blocks and size must be positive")
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    us, vs = [], []
    for a in range(blocks):
        for b in range(a, blocks):
            p = p_in if a == b else p_out
            pairs = size * (size - 1) // 2 if a == b else size * size
            cnt = rng.binomial(pairs, p)
            if cnt == 0:
                continue
            idx = rng.choice(pairs, size=cnt, replace=False)
            if a == b:
                iu, iv = np.triu_indices(size, 1)
                x, y = iu[idx], iv[idx]
            else:
                x, y = np.divmod(idx, size)
            us.append(x + a * size)
            vs.append(y + b * size)
    n = blocks * size
    u = np.concatenate(us) if us else np.zeros(0, dtype=int)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=int)
    return Graph.from_edges(n, u, v), np.repeat(np.arange(blocks), size)


def random_connected(n: int, p: float, seed: int = 0, max_weight: int = 1) -> Graph:
    """Random spanning tree plus independent extra edges with probability ``p``;
    integer capacities drawn from ``1..max_weight``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    tu = perm[1:]
    tv = perm[rng.integers(0, np.arange(1, n))] if n > 1 else np.zeros(0, dtype=int)
    iu, iv = np.triu_indices(n, 1)
    extra = rng.random(len(iu)) < p
    u = np.concatenate([tu, iu[extra]])
    v = np.concatenate([tv, iv[extra]])
    key = np.minimum(u, v) * n + np.maximum(u, v)
    _, first = np.unique(key, return_index=True)
    u, v = u[first], v[first]
    w = rng.integers(1, max_weight + 1, size=len(u)).astype(np.float64)
    return Graph.from_edges(n, u, v, w)
