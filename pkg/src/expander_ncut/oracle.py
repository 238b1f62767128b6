"""Exact brute-force references and numerical checks of the random-walk analysis.

Everything here is exhaustive or dense, so each entry point refuses inputs
above a small size limit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Graph, as_mask, induced_with_self_loops
from .hierarchy import TreeSparsifier
from .solver import SolverError, tree_objective
from .walk import rayleigh

MAX_CONDUCTANCE_N = 24
MAX_NEAR_EXPANDER_N = 20
MAX_NCUT_N = 10
MAX_TREE_EDGES = 16
MAX_WALK_N = 64
_CHUNK = 1 << 15


class OracleRefusal(ValueError):
    """Input exceeds the size an exhaustive oracle accepts."""


def _refuse(what, n, limit):
    if n > limit:
        raise OracleRefusal(f"{what}: size {n} exceeds the limit of {limit}")


def _subset_bits(masks: np.ndarray, width: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(width)) & 1).astype(np.float64)


def _subset_stats(g: Graph, idx: np.ndarray, masks: np.ndarray):
    """Volume and border in ``g`` of the subsets of ``idx`` encoded by ``masks``."""
    bits = _subset_bits(masks, len(idx))
    full = np.zeros((len(masks), g.n))
    full[:, idx] = bits
    vol = full @ g.degree
    inner = g.degree - g.self_loop
    dense = g.to_dense()
    np.fill_diagonal(dense, 0.0)
    within = np.einsum("ij,ij->i", full @ dense, full)
    return vol, full @ inner - within


def brute_force_conductance(g: Graph) -> tuple[float, np.ndarray]:
    """Minimum conductance over all proper cuts and a minimizing set (vertex 0 stays outside)."""
    n = g.n
    _refuse("brute_force_conductance", n, MAX_CONDUCTANCE_N)
    if n < 2:
        return 1.0, np.zeros(0, dtype=np.int64)
    total = g.total_volume
    best, best_mask = math.inf, 1
    idx = np.arange(1, n)
    top = 1 << (n - 1)
    for start in range(1, top, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, top), dtype=np.int64)
        vol, bord = _subset_stats(g, idx, masks)
        small = np.minimum(vol, total - vol)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(small > 0, bord / np.where(small > 0, small, 1), np.inf)
        i = int(np.argmin(phi))
        if phi[i] < best:
            best, best_mask = float(phi[i]), int(masks[i])
    s = idx[[(best_mask >> b) & 1 == 1 for b in range(n - 1)]]
    return best, s


@dataclass
class NearExpanderCheck:
    ok: bool
    witness: np.ndarray | None = None

    def __bool__(self):
        return bool(self.ok)


def check_near_expander(g: Graph, a, phi: float) -> NearExpanderCheck:
    """Every ``X`` in ``a`` with ``vol(X) <= vol(a)/2`` has border in ``g`` at least ``phi * vol(X)``."""
    idx = np.flatnonzero(as_mask(g, a))
    _refuse("check_near_expander", len(idx), MAX_NEAR_EXPANDER_N)
    half = g.degree[idx].sum() / 2
    top = 1 << len(idx)
    for start in range(1, top, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, top), dtype=np.int64)
        vol, bord = _subset_stats(g, idx, masks)
        bad = (vol <= half) & (bord < phi * vol - 1e-12 * np.maximum(vol, 1))
        if bad.any():
            m = int(masks[np.argmax(bad)])
            return NearExpanderCheck(False, idx[[(m >> b) & 1 == 1 for b in range(len(idx))]])
    return NearExpanderCheck(True)


def restricted_growth_strings(n: int, k: int) -> np.ndarray:
    """All labelings of ``n`` items with exactly ``k`` blocks in canonical (first-occurrence) form."""
    if k < 1 or k > n:
        return np.zeros((0, n), dtype=np.int64)
    rows = np.zeros((1, 1), dtype=np.int64)
    for i in range(1, n):
        top = rows.max(axis=1)
        ext = []
        for lab in range(min(i, k - 1) + 1):
            ok = top + 1 >= lab
            # remaining positions must still be able to open the missing blocks
            ok &= (np.maximum(top, lab) + 1) + (n - i - 1) >= k
            if ok.any():
                sub = rows[ok]
                ext.append(np.hstack([sub, np.full((len(sub), 1), lab, dtype=np.int64)]))
        rows = np.vstack(ext)
    return rows[rows.max(axis=1) == k - 1]


def brute_force_ncut(g: Graph, k: int) -> tuple[float, np.ndarray]:
    """Exact minimum normalized cut over all partitions into exactly ``k`` nonempty blocks."""
    n = g.n
    _refuse("brute_force_ncut", n, MAX_NCUT_N)
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, n]")
    labs = restricted_growth_strings(n, k)
    u, v, w = g.edges()
    theta = np.zeros(len(labs))
    for c in range(k):
        ind = (labs == c).astype(np.float64)
        vol = ind @ g.degree
        bord = (ind[:, u] != ind[:, v]).astype(np.float64) @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            theta += np.where(vol > 0, bord / np.where(vol > 0, vol, 1), np.inf)
    i = int(np.argmin(theta))
    if not np.isfinite(theta[i]):
        raise ValueError("every k-partition has a zero-volume cluster")
    return float(theta[i]), labs[i]


def brute_force_tree_cut(t: TreeSparsifier, k: int, exact: bool = False):
    """Minimum tree objective over all ``k - 1`` subsets of tree edges."""
    edges = [v for v in range(t.size) if t.parent[v] >= 0]
    _refuse("brute_force_tree_cut", len(edges), MAX_TREE_EDGES)
    if k < 1:
        raise ValueError("k must be at least 1")
    best, arg = None, None
    for combo in itertools.combinations(edges, k - 1):
        try:
            val = tree_objective(t, combo, exact)
        except SolverError:
            continue
        if best is None or val < best:
            best, arg = val, list(combo)
    if best is None:
        raise ValueError(f"no feasible {k}-cut on this tree")
    return best, arg


# ------------------------------------------------------------------ flow walk


@dataclass
class FlowWalk:
    """Trace of the multicommodity lazy walk.

    ``P[i, j]`` is the flow of commodity ``j`` at vertex ``i`` divided by
    ``d_i d_j``; ``potential[t]`` and ``delta[t]`` are recorded before step ``t``.
    """

    P: np.ndarray
    degree: np.ndarray
    active: np.ndarray
    potential: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    mass_error: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.potential) - 1


def _potential(P, d, act):
    da = d[act]
    vol = da.sum()
    mu = (da[:, None] * P[act]).sum(axis=0) / vol
    diff = P[act] - mu
    return float(np.dot(da, (diff * diff).sum(axis=1)))


def _edge_energy(P, edges):
    u, v, w = edges
    diff = P[u] - P[v]
    return float(np.dot(w, (diff * diff).sum(axis=1)))


def exact_walk(g: Graph, steps: int | None = None, active=None, until: float | None = None,
               max_steps: int = 100000) -> FlowWalk:
    """Run the dense multicommodity lazy walk on ``G{active}`` (vertices outside stay frozen).

    Runs ``steps`` steps, or, with ``until``, until the potential drops to that
    value (at most ``max_steps``).
    """
    n = g.n
    _refuse("exact_walk", n, MAX_WALK_N)
    d = g.degree
    if np.any(d <= 0):
        raise ValueError("exact_walk needs positive degrees")
    act = np.ones(n, dtype=bool) if active is None else as_mask(g, active)
    dense = g.to_dense()
    np.fill_diagonal(dense, 0.0)
    eu, ev, ew = g.edges()
    keep = act[eu] & act[ev]
    edges = (eu[keep], ev[keep], ew[keep])
    inside = dense * np.outer(act, act)
    outside = dense.sum(axis=1) - inside.sum(axis=1)
    mix = inside + np.diag(g.self_loop + outside)
    step_op = 0.5 * np.eye(n) + 0.5 * mix / d[:, None]
    step_op[~act] = np.eye(n)[~act]
    P = np.diag(1.0 / d)
    trace = FlowWalk(P, d, act)
    t = 0
    while True:
        phi = _potential(P, d, act)
        trace.potential.append(phi)
        trace.delta.append(0.5 * _edge_energy(P, edges) / phi if phi > 0 else 0.0)
        mass = d @ P
        trace.mass_error = max(trace.mass_error, float(np.abs(mass - 1.0).max()))
        if until is not None:
            if phi <= until or t >= max_steps:
                break
        elif t >= (steps or 0):
            break
        P = step_op @ P
        t += 1
    trace.P = P
    return trace


def initial_potential(g: Graph) -> float:
    """Closed form of the potential before the first step: ``sum 1/d_i - n/vol``."""
    return float(np.sum(1.0 / g.degree) - g.n / g.total_volume)


@dataclass
class CheckReport:
    ok: bool
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.ok)


def check_potential_decrease(trace: FlowWalk, tol: float = 1e-9) -> CheckReport:
    """Relative potential drop of every step is at least the recorded ``delta``."""
    fails = []
    for t in range(trace.steps):
        phi, nxt = trace.potential[t], trace.potential[t + 1]
        if phi <= 1e-12:
            continue
        drop = (phi - nxt) / phi
        if drop < trace.delta[t] - tol:
            fails.append((t, drop, trace.delta[t]))
    return CheckReport(not fails, fails)


def check_averaging_claim(vectors, mu, rtol: float = 1e-12, exact: bool = False) -> CheckReport:
    """``d*|mean - mu|^2 - sum |a_i - mu|^2`` equals ``|sum a_i|^2/d - sum |a_i|^2``, which is
    at most zero and equals ``-|a_1 - a_2|^2 / 2`` for two vectors.

    In floating point the residuals are measured relative to the operand scale
    ``sum |a_i|^2 + d |mu|^2``; with ``exact`` the inputs are converted to
    rationals and every comparison must hold with equality.
    """
    a = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    mu = np.asarray(mu, dtype=np.float64)
    if exact:
        to_q = np.vectorize(Fraction, otypes=[object])
        a, mu, rtol = to_q(a), to_q(mu), 0
    d = len(a)
    lhs = d * np.sum((a.sum(axis=0) / d - mu) ** 2) - np.sum((a - mu) ** 2)
    rhs = np.sum(a.sum(axis=0) ** 2) / d - np.sum(a * a)
    scale = max(np.sum(a * a) + d * np.sum(mu * mu), 1e-300)
    fails = []
    if abs(lhs - rhs) > rtol * scale:
        fails.append(("identity", lhs, rhs))
    if rhs > rtol * scale:
        fails.append(("sign", rhs, 0.0))
    pair = None
    if d == 2:
        pair = -np.sum((a[0] - a[1]) ** 2) / 2
        if abs(lhs - pair) > rtol * scale:
            fails.append(("pair", lhs, pair))
    return CheckReport(not fails, fails, {"lhs": lhs, "rhs": rhs, "pair": pair})


def check_projection_stats(vectors, trials: int = 100000, seed: int = 0, alpha: float = 5.0) -> CheckReport:
    """Monte Carlo check of three projection properties for Gaussian vectors with variance ``1/dim``.

    1. mean of ``(v.r)^2`` is within 2% of ``|v|^2/dim``;
    2. ``P[(v.r)^2 >= alpha |v|^2/dim]`` stays below ``exp(-alpha/5) + 0.01``;
    3. for at least 8 vectors, ``P[sum (v_i.r)^2 >= sum |v_i|^2 / (20 dim log2 n)] >= 0.45``.
    """
    if trials < 10000:
        raise ValueError("at least 10^4 trials are required")
    vs = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    nvec, dim = vs.shape
    rng = np.random.default_rng(seed)
    proj = np.empty((trials, nvec))
    batch = 20000
    for s in range(0, trials, batch):
        b = min(batch, trials - s)
        # same stream as ``b`` successive sample_projection draws
        r = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(b, dim))
        proj[s:s + b] = r @ vs.T
    sq = proj * proj
    norms = np.sum(vs * vs, axis=1) / dim
    fails, details = [], {}
    nz = norms > 0
    mean = sq.mean(axis=0)
    details["mean"] = mean.tolist()
    if np.any(np.abs(mean[nz] - norms[nz]) > 0.02 * norms[nz]):
        fails.append("mean")
    if np.any(mean[~nz] != 0):
        fails.append("zero-vector")
    bound = math.exp(-alpha / 5) + 0.01
    tail = (sq >= alpha * norms[None, :]).mean(axis=0)
    details["tail"] = tail[nz].tolist()
    if np.any(tail[nz] > bound):
        fails.append("tail")
    if nvec >= 8 and norms.sum() > 0:
        freq = float((sq.sum(axis=1) >= norms.sum() / (20 * math.log2(nvec))).mean())
        details["sum_frequency"] = freq
        if freq < 0.45:
            fails.append("sum")
    return CheckReport(not fails, fails, details)


def check_recentered_rayleigh(g: Graph, u, s, lam: float) -> CheckReport | None:
    """Rayleigh bound after removing a low-energy set ``s`` and recentering on the rest.

    Returns ``None`` (skipped) when the hypothesis does not hold.
    """
    u = np.asarray(u, dtype=np.float64)
    d = g.degree
    smask = as_mask(g, s)
    b = ~smask
    vol_a, vol_b = d.sum(), d[b].sum()
    energy = np.dot(d, u * u)
    if not np.dot(d[smask], u[smask] ** 2) <= lam * energy or not lam < vol_b / vol_a or vol_b <= 0:
        return None
    zb = u[b] - np.dot(d[b], u[b]) / vol_b
    gb = induced_with_self_loops(g, b)
    if energy <= 0:
        return CheckReport(True, details={"lhs": 0.0, "rhs": 0.0})
    ru = rayleigh(g, u)
    rz = rayleigh(gb, zb) if np.dot(d[b], zb * zb) > 0 else 0.0
    rhs = vol_b / (vol_b - lam * vol_a) * ru
    ok = bool(rz <= rhs + 1e-9)
    return CheckReport(ok, [] if ok else [("bound", rz, rhs)], {"lhs": rz, "rhs": rhs})
