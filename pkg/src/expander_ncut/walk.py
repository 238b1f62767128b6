"""Lazy random walks on projected vectors and the sweep-cut machinery.

The walk operator is the averaging form of the lazy walk on ``G{A}``::

    u'_i = u_i / 2 + (sum_j c_ij u_j + loop_i u_i) / (2 d_i)

It keeps constant vectors fixed and preserves the degree-weighted sum of ``u``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .graph import Graph, as_mask, component_labels, induced_with_self_loops

log = logging.getLogger(__name__)

FRESH_PROJECTION = "fresh_projection"
SINGLE_WALK = "single_walk"


def default_t_max(n: int) -> int:
    """Iteration cap used when none is configured: ``10 * ceil(log2(n)^2)``."""
    return 10 * max(1, math.ceil(math.log2(max(n, 2)) ** 2))


@dataclass
class WalkConfig:
    phi: float = 0.01
    gamma: float = 0.3
    beta: float = 0.1
    rho: float = 1e-4
    t_max: int | None = None
    mode: str = SINGLE_WALK
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.phi <= 1:
            raise ValueError("phi must lie in (0, 1]")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.beta <= 0.5:
            raise ValueError("beta must lie in (0, 1/2]")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if self.mode not in (FRESH_PROJECTION, SINGLE_WALK):
            raise ValueError(f"unknown walk mode {self.mode!r}")

    @classmethod
    def theoretical(cls, g: Graph, phi: float, seed: int = 0, t_max: int | None = None) -> "WalkConfig":
        """Parameters of the fresh-projection cut procedure for target expansion ``phi``."""
        _, gamma, beta = theoretical_params(g, phi)
        return cls(phi=phi, gamma=gamma, beta=beta, t_max=t_max, mode=FRESH_PROJECTION, seed=seed)


def theoretical_params(g: Graph, phi: float) -> tuple[int, float, float]:
    """Round count ``T``, cut threshold ``gamma`` and balance ``beta`` for ``phi``.

    ``m`` is the total edge capacity (the edge count for unit weights); logs are base 2.
    ``gamma`` is capped at 1 (no conductance exceeds 1, so a larger
    threshold would accept every cut) and ``beta`` at 1/2.
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    m = g.edge_capacity
    n = g.n
    if m < 1 or n < 2:
        raise ValueError("theoretical parameters need m >= 1 and n >= 2")
    rounds = math.ceil(1 / (12 * phi) - 1e-12)
    gamma = min(1.0, 343 * math.sqrt(phi * math.log2(32 * m**3) * math.log2(n) ** 2))
    lm = math.log2(m)
    beta = 0.5 if lm <= 0 else min(0.5, 2 * math.sqrt(phi) / lm**1.5)
    return max(rounds, 1), gamma, beta


def sample_projection(n: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian vector with i.i.d. ``N(0, 1/n)`` coordinates."""
    return rng.normal(0.0, 1.0 / math.sqrt(n), size=n)


def lazy_step(g_active: Graph, u: np.ndarray) -> np.ndarray:
    """One lazy random-walk step on ``g_active`` (degree-preserving ``G{A}``)."""
    u = np.asarray(u, dtype=np.float64)
    d = g_active.degree
    out = u.copy()
    pos = d > 0
    mixed = g_active.adj @ u + g_active.self_loop * u
    out[pos] = 0.5 * u[pos] + 0.5 * mixed[pos] / d[pos]
    return out


def center(u: np.ndarray, a, g: Graph) -> np.ndarray:
    """Subtract the degree-weighted mean over ``a`` from the entries in ``a``."""
    u = np.array(u, dtype=np.float64)
    mask = np.ones(g.n, dtype=bool) if a is None else as_mask(g, a)
    d = g.degree[mask]
    vol = d.sum()
    if vol <= 0:
        raise ValueError("cannot center over a set of zero volume")
    u[mask] -= np.dot(d, u[mask]) / vol
    return u


def rayleigh(g_active: Graph, u: np.ndarray) -> float:
    """Edge energy over degree-weighted energy; self-loops add only to the denominator."""
    u = np.asarray(u, dtype=np.float64)
    den = float(np.dot(g_active.degree, u * u))
    if den <= 0:
        raise ValueError("Rayleigh quotient undefined for a zero vector")
    a, b, w = g_active.edges()
    return float(np.dot(w, (u[a] - u[b]) ** 2)) / den


# ----------------------------------------------------------------------------- sweeps


class Sweep(NamedTuple):
    """Per-segment outcome of :func:`batched_sweep` (arrays indexed by segment)."""

    found: np.ndarray        # bool, a qualifying prefix exists
    length: np.ndarray       # prefix length of the chosen cut
    conductance: np.ndarray
    small_vol: np.ndarray    # volume of the smaller side
    balanced: np.ndarray
    prefix_is_small: np.ndarray


def sweep_order(seg: np.ndarray, u: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Positions sorted by ``(segment, u value, vertex id)``."""
    return np.lexsort((ids, u, seg))


def prefix_profile(seg_sorted, d_sorted, delta_sorted, nseg):
    """Segment-local prefix borders/volumes plus segment totals and start offsets."""
    starts = np.searchsorted(seg_sorted, np.arange(nseg))
    cb = np.cumsum(delta_sorted)
    cv = np.cumsum(d_sorted)
    off_b = np.where(starts > 0, cb[starts - 1], 0.0)
    off_v = np.where(starts > 0, cv[starts - 1], 0.0)
    pb = cb - off_b[seg_sorted]
    pv = cv - off_v[seg_sorted]
    ends = np.append(starts[1:], len(seg_sorted))
    total = np.zeros(nseg)
    nonempty = ends > starts
    total[nonempty] = pv[ends[nonempty] - 1]
    return pb, pv, total, starts, ends


def border_increments(rank, rows, cols, caps, inner_deg, n):
    """Change in border when each vertex joins the prefix of lower-ranked vertices."""
    earlier = rank[cols] < rank[rows]
    inc = np.bincount(rows[earlier], weights=caps[earlier], minlength=n)
    return inner_deg - 2 * inc


class Profile(NamedTuple):
    """Prefix statistics of a multi-segment sweep, all in sorted position order."""

    order: np.ndarray      # positions into ``verts``
    seg: np.ndarray        # segment of each sorted position
    border: np.ndarray     # border of the segment prefix ending here
    vol: np.ndarray        # volume of that prefix
    total: np.ndarray      # per-segment volume
    starts: np.ndarray
    ends: np.ndarray
    small: np.ndarray      # smaller-side volume of the prefix cut
    phi: np.ndarray        # prefix conductance (inf on the last position)


def sweep_profile(verts, seg, nseg, u, degree, inner_deg, rows, cols, caps) -> Profile:
    """Sort every segment by ``(u, id)`` and compute all prefix borders and volumes.

    ``verts`` lists the swept vertices with segment ids ``seg`` (0..nseg-1);
    ``rows/cols/caps`` are the directed edges inside segments; ``inner_deg`` is
    the non-loop degree within the segment's working graph and ``degree`` the
    full degree (loops included).
    """
    n = len(degree)
    order = sweep_order(seg, u[verts], verts)
    sv = verts[order]
    ss = seg[order]
    rank = np.full(n, -1, dtype=np.int64)
    rank[sv] = np.arange(len(sv))
    delta = border_increments(rank, rows, cols, caps, inner_deg, n)
    pb, pv, total, starts, ends = prefix_profile(ss, degree[sv], delta[sv], nseg)
    small = np.minimum(pv, total[ss] - pv)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(small > 0, pb / np.where(small > 0, small, 1.0), np.inf)
    pos = np.arange(len(sv))
    phi[pos == ends[ss] - 1] = np.inf
    return Profile(order, ss, pb, pv, total, starts, ends, small, phi)


def batched_sweep(verts, seg, nseg, u, degree, inner_deg, rows, cols, caps, gamma, beta_vol):
    """Sweep every segment (component) at once; arguments as in :func:`sweep_profile`.

    ``beta_vol`` is a scalar or per-segment volume threshold for calling a cut
    balanced. Among prefixes with conductance ``< gamma``, a balanced one of
    minimum conductance is preferred; otherwise the one with the largest
    smaller side. Returns the :class:`Profile` and a :class:`Sweep`.
    """
    prof = sweep_profile(verts, seg, nseg, u, degree, inner_deg, rows, cols, caps)
    ss, pv, total, starts = prof.seg, prof.vol, prof.total, prof.starts
    small, phi = prof.small, prof.phi
    qual = phi < gamma
    bvol = np.broadcast_to(np.asarray(beta_vol, dtype=np.float64), (nseg,))
    balanced = small >= bvol[ss]

    found = np.zeros(nseg, dtype=bool)
    length = np.zeros(nseg, dtype=np.int64)
    cond = np.full(nseg, np.inf)
    svol = np.zeros(nseg)
    bal = np.zeros(nseg, dtype=bool)
    pref_small = np.zeros(nseg, dtype=bool)
    q = np.flatnonzero(qual)
    if q.size:
        flag = (~balanced[q]).astype(np.int64)
        s1 = np.where(balanced[q], phi[q], -small[q])
        s2 = np.where(balanced[q], -small[q], phi[q])
        pick = q[np.lexsort((q, s2, s1, flag, ss[q]))]
        first = np.ones(len(pick), dtype=bool)
        first[1:] = ss[pick[1:]] != ss[pick[:-1]]
        pick = pick[first]
        sg = ss[pick]
        found[sg] = True
        length[sg] = pick - starts[sg] + 1
        cond[sg] = phi[pick]
        svol[sg] = small[pick]
        bal[sg] = balanced[pick]
        pref_small[sg] = pv[pick] <= total[sg] - pv[pick]
    return prof, Sweep(found, length, cond, svol, bal, pref_small)


def _single(g_active: Graph, u: np.ndarray):
    n = g_active.n
    verts = np.arange(n)
    seg = np.zeros(n, dtype=np.int64)
    coo = g_active.adj.tocoo()
    inner = np.asarray(g_active.adj.sum(axis=1)).ravel()
    return verts, seg, coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data, inner


@dataclass
class SweepCut:
    vertices: np.ndarray
    conductance: float
    balanced: bool


def _prefix_border_vol(g_active: Graph, u: np.ndarray):
    verts, seg, rows, cols, caps, inner = _single(g_active, u)
    order = sweep_order(seg, u, verts)
    rank = np.empty(g_active.n, dtype=np.int64)
    rank[order] = np.arange(g_active.n)
    delta = border_increments(rank, rows, cols, caps, inner, g_active.n)
    pb = np.cumsum(delta[order])[:-1]
    pv = np.cumsum(g_active.degree[order])[:-1]
    return order, pb, pv


def prefix_conductances(g_active: Graph, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted vertex order and the conductance of each of the ``n - 1`` proper prefixes."""
    u = np.asarray(u, dtype=np.float64)
    order, pb, pv = _prefix_border_vol(g_active, u)
    small = np.minimum(pv, g_active.total_volume - pv)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(small > 0, pb / np.where(small > 0, small, 1.0), np.inf)
    return order, phi


def sweep_cut(g_active: Graph, u: np.ndarray, gamma: float, beta_vol: float = 0.0) -> SweepCut | None:
    """Best prefix cut of ``u`` with conductance below ``gamma`` (smaller side returned).

    With ``beta_vol = 0`` every cut counts as balanced and the result is the
    minimum-conductance qualifying prefix.
    """
    if g_active.n < 2:
        return None
    u = np.asarray(u, dtype=np.float64)
    verts, seg, rows, cols, caps, inner = _single(g_active, u)
    prof, res = batched_sweep(verts, seg, 1, u, g_active.degree, inner, rows, cols, caps,
                              gamma, beta_vol)
    order = prof.order
    if not res.found[0]:
        return None
    k = int(res.length[0])
    side = order[:k] if res.prefix_is_small[0] else order[k:]
    return SweepCut(np.sort(verts[side]), float(res.conductance[0]), bool(res.balanced[0]))


def two_ended_sweep(g_active: Graph, u: np.ndarray, gamma: float) -> tuple[np.ndarray, float] | None:
    """Heuristic search for a large cut ``{v : u_v outside [a, b]}`` with conductance below ``gamma``.

    Candidates are every one-sided prefix and suffix, the sets visited by a
    two-pointer scan that grows whichever end adds more volume while staying
    below ``gamma``, and the union of the best prefix with the best disjoint
    suffix. The winner maximizes the smaller side's volume (then minimizes
    conductance). Returns the set (prefix part plus suffix part) and its
    conductance, or ``None``.
    """
    n = g_active.n
    if n < 2:
        return None
    u = np.asarray(u, dtype=np.float64)
    order = sweep_order(np.zeros(n, dtype=np.int64), u, np.arange(n))
    d = g_active.degree[order]
    total = g_active.total_volume
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    adj = g_active.adj
    inner = np.asarray(adj.sum(axis=1)).ravel()[order]

    _, pborder, pvol = _prefix_border_vol(g_active, u)
    _, pphi = prefix_conductances(g_active, u)
    best = None  # (key, a, b, phi)

    def consider(a, b, bd, vol):
        nonlocal best
        small = min(vol, total - vol)
        if small <= 0:
            return
        phi = bd / small
        if not phi < gamma:
            return
        key = (-small, phi)
        if best is None or key < best[0]:
            best = (key, a, b, phi)

    # one-sided cuts: prefixes (a, n) and suffixes (0, b)
    for a in range(1, n):
        consider(a, n, pborder[a - 1], pvol[a - 1])
    for b in range(1, n):
        consider(0, b, pborder[b - 1], total - pvol[b - 1])

    # two-pointer scan; S = order[:a] + order[b:], interval order[a:b] stays non-empty
    in_s = np.zeros(n, dtype=bool)
    a, b, bd, vol = 0, n, 0.0, 0.0

    def gain(p):
        nbrs, wts = g_active.neighbors(order[p])
        w_in = wts[in_s[pos[nbrs]]].sum()
        return inner[p] - 2 * w_in

    while b - a > 1:
        opts = []
        for p, side in ((a, 0), (b - 1, 1)):
            nb, nv = bd + gain(p), vol + d[p]
            small = min(nv, total - nv)
            phi = nb / small if small > 0 else np.inf
            opts.append((phi < gamma, d[p], -phi, -side, p, side, nb, nv, phi))
        ok = [o for o in opts if o[0]]
        choice = max(ok, key=lambda o: (o[1], o[2], o[3])) if ok else max(opts, key=lambda o: (o[2], o[3]))
        _, _, _, _, p, side, bd, vol, _ = choice
        in_s[p] = True
        if side == 0:
            a += 1
        else:
            b -= 1
        if a > 0 and b < n:
            consider(a, b, bd, vol)

    # best prefix combined with the best disjoint suffix
    if n >= 3:
        half = total / 2
        pre_ok = np.flatnonzero(pvol <= half)
        if pre_ok.size:
            a = int(pre_ok[np.argmin(pphi[pre_ok])]) + 1
            sfx_vol = total - pvol  # suffix starting at position b (b = 1..n-1)
            cand = np.arange(a + 1, n)
            cand = cand[sfx_vol[cand - 1] <= half]
            if cand.size:
                b = int(cand[np.argmin(pphi[cand - 1])])
                members = np.concatenate([order[:a], order[b:]])
                consider(a, b, _border_of(adj, members), d[:a].sum() + d[b:].sum())

    if best is None:
        return None
    _, a, b, phi = best
    s = np.concatenate([order[:a], order[b:]])
    return np.sort(s), float(phi)


def _border_of(adj, members) -> float:
    mask = np.zeros(adj.shape[0], dtype=bool)
    mask[members] = True
    coo = adj.tocoo()
    return float(coo.data[mask[coo.row] & ~mask[coo.col]].sum())


def degree_energy(d: np.ndarray, u: np.ndarray) -> float:
    return float(np.dot(d, u * u))


def certification_statistic(g_active: Graph, u: np.ndarray, initial_energy: float) -> float:
    """Degree-weighted energy of the centered ``u`` relative to ``initial_energy``.

    ``initial_energy`` is the centered energy of the walk vector when the
    component started; the statistic is 1 at that moment and decays towards 0
    as the walk mixes.
    """
    if initial_energy <= 0:
        raise ValueError("initial energy must be positive")
    d = g_active.degree
    vol = d.sum()
    if vol <= 0:
        raise ValueError("component has zero volume")
    u = np.asarray(u, dtype=np.float64)
    c = u - np.dot(d, u) / vol
    return degree_energy(d, c) / initial_energy


# ------------------------------------------------------------------- cut procedure


@dataclass
class CutOutcome:
    """Result of :func:`cut_procedure`.

    ``kind`` is ``"expander"``, ``"balanced"`` (``first`` = S, ``second`` = rest)
    or ``"unbalanced"`` (``first`` = remaining A, ``second`` = removed L).
    """

    kind: str
    first: np.ndarray | None = None
    second: np.ndarray | None = None
    conductance: float | None = None
    rounds: int = 0
    cap_reached: bool = False
    cuts: list = field(default_factory=list)  # (working set A, S, conductance) per executed cut


class _WalkOperator:
    """Lazy step on ``G{A}`` acting on full-length vectors; rows outside A stay frozen."""

    def __init__(self, g: Graph, mask: np.ndarray):
        u, v, w = g.edges()
        keep = mask[u] & mask[v]
        a, b, c = u[keep], v[keep], w[keep]
        self.rows = np.concatenate([a, b])
        self.cols = np.concatenate([b, a])
        self.caps = np.concatenate([c, c])
        self.inner = np.bincount(self.rows, weights=self.caps, minlength=g.n)
        self.mask = mask & (g.degree > 0)
        self.d = g.degree

    def __call__(self, u: np.ndarray) -> np.ndarray:
        lap = self.inner * u - np.bincount(self.rows, weights=self.caps * u[self.cols], minlength=len(u))
        out = u.copy()
        m = self.mask
        out[m] = u[m] - 0.5 * lap[m] / self.d[m]
        return out


def replay_walk(g: Graph, history, u: np.ndarray) -> np.ndarray:
    """Apply one lazy step per recorded active set (boolean masks over ``g``), in order."""
    u = np.asarray(u, dtype=np.float64)
    for mask in history:
        u = _WalkOperator(g, np.asarray(mask, dtype=bool))(u)
    return u


def _center_mask(u, d, mask):
    vol = d[mask].sum()
    if vol > 0:
        u = u.copy()
        u[mask] -= np.dot(d[mask], u[mask]) / vol
    return u


def cut_procedure(g: Graph, cfg: WalkConfig) -> CutOutcome:
    """Look for a low-conductance cut with lazy random walks on random projections.

    ``fresh_projection`` draws a new projection every round and replays the
    recorded walk steps on it; ``single_walk`` keeps one vector and advances it
    one step per round, stopping once the certification statistic drops to
    ``cfg.rho``. Unbalanced cuts are moved from A to L; the procedure returns
    ``Balanced`` as soon as a balanced cut is found or L becomes balanced.
    """
    n = g.n
    if n <= 1:
        return CutOutcome("expander")
    if len(np.unique(component_labels(g))) > 1:
        raise ValueError("cut_procedure needs a connected graph")
    rng = np.random.default_rng(cfg.seed)
    d = g.degree
    beta_vol = cfg.beta * g.total_volume / 2
    t_max = cfg.t_max if cfg.t_max is not None else default_t_max(n)
    if cfg.mode == FRESH_PROJECTION:
        wanted = math.ceil(1 / (12 * cfg.phi) - 1e-12)
        rounds = min(wanted, t_max)
        capped = rounds < wanted
    else:
        rounds, capped = t_max, True

    active = np.ones(n, dtype=bool)
    removed = np.zeros(n, dtype=bool)
    history: list[np.ndarray] = []
    ops: dict[bytes, _WalkOperator] = {}
    outcome = CutOutcome("expander")

    def operator(mask):
        key = np.packbits(mask).tobytes()
        if key not in ops:
            ops[key] = _WalkOperator(g, mask)
        return ops[key]

    u = None
    e0 = None
    for t in range(1, rounds + 1):
        if cfg.mode == FRESH_PROJECTION:
            u = sample_projection(n, rng) / np.where(d > 0, d, 1.0)
            for mask in history:
                u = operator(mask)(u)
        else:
            if u is None:
                u = sample_projection(n, rng) / np.where(d > 0, d, 1.0)
                u = _center_mask(u, d, active)
                e0 = degree_energy(d[active], u[active])
            u = operator(active.copy())(u)
        u = _center_mask(u, d, active)
        history.append(active.copy())

        idx = np.flatnonzero(active)
        if cfg.mode == SINGLE_WALK:
            energy = degree_energy(d[idx], u[idx])
            if e0 <= 0 or energy / e0 <= cfg.rho:
                capped = False
                outcome.rounds = t
                break
        if idx.size < 2:
            outcome.rounds = t
            break
        ga = induced_with_self_loops(g, active)
        ua = u[idx]
        cut = sweep_cut(ga, ua, cfg.gamma, beta_vol)
        if cut is None:
            outcome.rounds = t
            continue
        s_local, phi = cut.vertices, cut.conductance
        balanced = cut.balanced
        if not balanced:
            two = two_ended_sweep(ga, ua, cfg.gamma) if idx.size >= 3 else None
            if two is not None:
                cand, cphi = two
                vol_c = ga.degree[cand].sum()
                if vol_c > ga.total_volume - vol_c:
                    cand = np.setdiff1d(np.arange(idx.size), cand)
                    vol_c = ga.degree[cand].sum()
                if vol_c >= ga.degree[s_local].sum():
                    s_local, phi = cand, cphi
                    balanced = vol_c >= beta_vol
        s = idx[s_local]
        outcome.cuts.append((idx.copy(), s.copy(), phi))
        outcome.rounds = t
        if balanced:
            rest = np.setdiff1d(np.arange(n), s)
            return CutOutcome("balanced", s, rest, phi, t, False, outcome.cuts)
        active[s] = False
        removed[s] = True
        if d[removed].sum() >= beta_vol:
            a_idx, l_idx = np.flatnonzero(active), np.flatnonzero(removed)
            return CutOutcome("balanced", a_idx, l_idx, phi, t, False, outcome.cuts)
        if cfg.mode == SINGLE_WALK:
            u = _center_mask(u, d, active)

    if not removed.any():
        return CutOutcome("expander", rounds=outcome.rounds, cap_reached=capped, cuts=outcome.cuts)
    return CutOutcome("unbalanced", np.flatnonzero(active), np.flatnonzero(removed),
                      outcome.cuts[-1][2], outcome.rounds, capped, outcome.cuts)
