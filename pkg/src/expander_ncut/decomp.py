"""Expander decomposition: the practical single-walk driver, the recursive
cut-procedure driver, and automatic threshold tuning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .graph import Graph, canonical_labels, connected_components, induced_with_self_loops
from .walk import (
    FRESH_PROJECTION,
    WalkConfig,
    cut_procedure,
    default_t_max,
    sample_projection,
    sweep_profile,
    theoretical_params,
)

log = logging.getLogger(__name__)

CERTIFIED = "certified"
CAP_REACHED = "cap_reached"
NEAR_EXPANDER = "near_expander"

GAMMA_FLOOR = 1e-6


class DecompositionError(RuntimeError):
    """Raised when automatic threshold tuning cannot produce an acceptable level."""


@dataclass
class DecompConfig:
    gamma0: float = 0.3
    epsilon: float = 0.8
    reduction_threshold: float = 0.95
    rho: float = 1e-4
    t_max: int | None = None
    seed: int = 0
    mode: str = "practical"

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.reduction_threshold < 1:
            raise ValueError("reduction_threshold must lie in (0, 1)")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if self.mode not in ("practical", "theoretical"):
            raise ValueError(f"unknown decomposition mode {self.mode!r}")


@dataclass
class Split:
    """One executed cut: the component it was applied to, the smaller side, and its conductance."""

    component: np.ndarray
    side: np.ndarray
    conductance: float
    gamma: float


@dataclass
class Decomposition:
    labels: np.ndarray                # component id per vertex, ordered by smallest member
    components: list                  # sorted vertex arrays
    status: list                      # per component: certified / cap_reached / near_expander
    cut_edges: float
    gamma_used: float
    splits: list = field(default_factory=list)
    restarts: int = 0

    @property
    def count(self) -> int:
        return len(self.components)


def _finish(g: Graph, labels: np.ndarray, status_of: dict, gamma: float, splits, restarts=0):
    labels = canonical_labels(labels)
    k = int(labels.max()) + 1 if labels.size else 0
    comps = _groups(labels, k)
    status = [status_of.get(int(c[0]), CERTIFIED) for c in comps]
    u, v, w = g.edges()
    cut = float(w[labels[u] != labels[v]].sum())
    return Decomposition(labels, comps, status, cut, gamma, splits, restarts)


def _groups(labels, k):
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(k + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(k)]


def _refine_components(n, rows, cols, labels):
    """Split each label class into its connected pieces over edges internal to the class."""
    keep = labels[rows] == labels[cols]
    a = coo_matrix((np.ones(int(keep.sum())), (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    _, lab = _cc(a, directed=False)
    return canonical_labels(lab)


def decompose_practical(g: Graph, cfg: DecompConfig | None = None, gamma: float | None = None,
                        level: int = 0, attempt: int = 0) -> Decomposition:
    """Decompose ``g`` by iterating one lazy random walk in every active component.

    Each round advances the walk one step inside every active component,
    recenters it, and sweeps. A component whose sweep (or the fallback
    two-ended candidate) finds a cut with conductance below ``gamma`` is split
    in place and the walk continues without restarting. A component is
    certified once its certification statistic drops to ``cfg.rho`` and is
    marked cap-reached after ``t_max`` steps.
    """
    cfg = cfg or DecompConfig()
    gamma = cfg.gamma0 if gamma is None else gamma
    n = g.n
    if n == 0:
        return Decomposition(np.zeros(0, dtype=np.int64), [], [], 0.0, gamma)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, level, attempt]))
    t_max = cfg.t_max if cfg.t_max is not None else default_t_max(n)
    d = g.degree
    eu, ev, ew = g.edges()
    rows = np.concatenate([eu, ev]).astype(np.int64)
    cols = np.concatenate([ev, eu]).astype(np.int64)
    caps = np.concatenate([ew, ew])

    comp = _refine_components(n, rows, cols, np.zeros(n, dtype=np.int64))
    safe_d = np.where(d > 0, d, 1.0)
    u = sample_projection(n, rng) / safe_d
    splits: list[Split] = []
    finished: dict[int, str] = {}  # smallest member -> status

    def center(u, comp, nc):
        vol = np.bincount(comp, weights=d, minlength=nc)
        s = np.bincount(comp, weights=d * u, minlength=nc)
        mean = np.divide(s, vol, out=np.zeros(nc), where=vol > 0)
        return u - mean[comp], vol

    def energies(u, comp, nc):
        return np.bincount(comp, weights=d * u * u, minlength=nc)

    nc = int(comp.max()) + 1
    u, vol = center(u, comp, nc)
    e0 = energies(u, comp, nc)
    clock = np.zeros(nc, dtype=np.int64)
    active = np.ones(nc, dtype=bool)
    sizes = np.bincount(comp, minlength=nc)

    def retire(cids, status):
        for c in cids:
            finished[int(first_member[c])] = status
        active[cids] = False

    first_member = np.full(nc, n, dtype=np.int64)
    np.minimum.at(first_member, comp, np.arange(n))
    trivial = np.flatnonzero((sizes < 2) | (vol <= 0) | (e0 <= 0))
    retire(trivial, CERTIFIED)

    while active.any():
        act_v = active[comp]
        alive = (comp[rows] == comp[cols]) & act_v[rows]
        r, c_, w = rows[alive], cols[alive], caps[alive]
        inner = np.bincount(r, weights=w, minlength=n)
        lap = inner * u - np.bincount(r, weights=w * u[c_], minlength=n)
        step = act_v & (d > 0)
        u = u.copy()
        u[step] -= 0.5 * lap[step] / d[step]
        u, vol = center(u, comp, nc)
        clock[active] += 1

        energy = energies(u, comp, nc)
        sigma = np.divide(energy, e0, out=np.zeros(nc), where=e0 > 0)
        done = active & (sigma <= cfg.rho)
        retire(np.flatnonzero(done), CERTIFIED)

        # sweep every still-active component at once
        act_c = np.flatnonzero(active)
        if act_c.size == 0:
            break
        seg_of = np.full(nc, -1, dtype=np.int64)
        seg_of[act_c] = np.arange(act_c.size)
        verts = np.flatnonzero(active[comp])
        seg = seg_of[comp[verts]]
        alive = (comp[rows] == comp[cols]) & active[comp[rows]]
        r, c_, w = rows[alive], cols[alive], caps[alive]
        inner = np.bincount(r, weights=w, minlength=n)
        prof = sweep_profile(verts, seg, act_c.size, u, d, inner, r, c_, w)
        side = _choose_cuts(prof, gamma, verts, r, c_, w, d, act_c.size)

        if side is None:
            capped = active & (clock >= t_max)
            retire(np.flatnonzero(capped), CAP_REACHED)
            continue

        # side: per swept vertex, True when on the cut's first side; cut_seg marks split segments
        in_side, cut_seg, cut_phi = side
        new_lab = comp * 2
        new_lab[verts[in_side]] += 1
        for s in np.flatnonzero(cut_seg):
            members = verts[seg == s]
            a_mask = in_side[seg == s]
            a, b = members[a_mask], members[~a_mask]
            small = a if d[a].sum() <= d[b].sum() else b
            splits.append(Split(members, small, float(cut_phi[s]), gamma))

        old_comp, old_clock, old_active = comp, clock, active
        comp = _refine_components(n, rows, cols, new_lab)
        nc = int(comp.max()) + 1
        first_member = np.full(nc, n, dtype=np.int64)
        np.minimum.at(first_member, comp, np.arange(n))
        parent = old_comp[first_member]
        changed = np.zeros(old_comp.max() + 1, dtype=bool)
        changed[act_c[cut_seg]] = True
        fresh = changed[parent]
        clock = np.where(fresh, 0, old_clock[parent])
        active = old_active[parent].copy()
        u, vol = center(u, comp, nc)
        energy = energies(u, comp, nc)
        e0_new = np.zeros(nc)
        e0_new[~fresh] = e0[parent[~fresh]]
        e0_new[fresh] = energy[fresh]
        e0 = e0_new
        sizes = np.bincount(comp, minlength=nc)
        trivial = np.flatnonzero(active & ((sizes < 2) | (vol <= 0) | (e0 <= 0)))
        retire(trivial, CERTIFIED)
        capped = active & (clock >= t_max)
        retire(np.flatnonzero(capped), CAP_REACHED)

    return _finish(g, comp, finished, gamma, splits)


def _choose_cuts(prof, gamma, verts, rows, cols, caps, d, nseg):
    """Pick a cut per segment: the minimum-conductance qualifying prefix, or failing
    that, the best prefix combined with the best disjoint suffix."""
    ss, phi, pv, total, starts, ends = prof.seg, prof.phi, prof.vol, prof.total, prof.starts, prof.ends
    npos = len(ss)
    pos = np.arange(npos)
    best_pos = np.full(nseg, -1, dtype=np.int64)
    q = np.flatnonzero(phi < gamma)
    if q.size:
        pick = q[np.lexsort((q, -prof.small[q], phi[q], ss[q]))]
        first = np.ones(pick.size, dtype=bool)
        first[1:] = ss[pick[1:]] != ss[pick[:-1]]
        best_pos[ss[pick[first]]] = pick[first]

    in_side = np.zeros(npos, dtype=bool)  # in sorted position order
    cut_seg = best_pos >= 0
    cut_phi = np.full(nseg, np.inf)
    cut_phi[cut_seg] = phi[best_pos[cut_seg]]
    pref_end = np.where(cut_seg, best_pos, -1)
    in_side = pos <= pref_end[ss]

    # two-ended fallback for segments with >= 3 vertices and no prefix cut
    sizes = ends - starts
    need = (~cut_seg) & (sizes >= 3)
    if need.any():
        half = total[ss] / 2
        finite = np.isfinite(phi)
        pre_small = finite & (pv <= half) & need[ss]
        suf_small = finite & (pv >= half) & need[ss]
        a_pos = _argmin_per_seg(ss, np.where(pre_small, phi, np.inf), nseg)
        b_pos = _argmin_per_seg(ss, np.where(suf_small, phi, np.inf), nseg)
        ok = need & (a_pos >= 0) & (b_pos >= 0) & (b_pos > a_pos)
        if ok.any():
            member = ok[ss] & ((pos <= a_pos[ss]) | (pos > b_pos[ss]))
            vmask = np.zeros(len(d), dtype=bool)
            vmask[verts[prof.order[member]]] = True
            crossing = vmask[rows] != vmask[cols]
            seg_of_v = np.full(len(d), -1, dtype=np.int64)
            seg_of_v[verts[prof.order]] = ss
            border = np.bincount(seg_of_v[rows[crossing]], weights=caps[crossing], minlength=nseg) / 2
            svol = np.bincount(ss[member], weights=d[verts[prof.order[member]]], minlength=nseg)
            small = np.minimum(svol, total - svol)
            with np.errstate(divide="ignore", invalid="ignore"):
                two_phi = np.where(small > 0, border / np.where(small > 0, small, 1), np.inf)
            hit = ok & (two_phi < gamma)
            if hit.any():
                in_side = np.where(hit[ss], member, in_side)
                cut_seg = cut_seg | hit
                cut_phi[hit] = two_phi[hit]

    if not cut_seg.any():
        return None
    flags = np.zeros(npos, dtype=bool)
    flags[prof.order] = in_side
    return flags, cut_seg, cut_phi


def _argmin_per_seg(seg, vals, nseg):
    out = np.full(nseg, -1, dtype=np.int64)
    idx = np.flatnonzero(np.isfinite(vals))
    if idx.size:
        pick = idx[np.lexsort((idx, vals[idx], seg[idx]))]
        first = np.ones(pick.size, dtype=bool)
        first[1:] = seg[pick[1:]] != seg[pick[:-1]]
        out[seg[pick[first]]] = pick[first]
    return out


def decompose_theoretical(g: Graph, phi: float, cfg: DecompConfig | None = None) -> Decomposition:
    """Recursive decomposition driven by the fresh-projection cut procedure.

    Balanced cuts split the graph and both sides are decomposed further; an
    unbalanced outcome emits the remaining set as a near-expander (no
    trimming) and recurses on the removed part.
    """
    cfg = cfg or DecompConfig()
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    n = g.n
    labels = np.full(n, -1, dtype=np.int64)
    status: dict[int, str] = {}
    splits: list[Split] = []
    if g.m == 0 or n < 2:
        gamma, beta = math.inf, 0.5
    else:
        _, gamma, beta = theoretical_params(g, phi)
    next_label = 0
    stack = [c for c in connected_components(g)][::-1]
    calls = 0
    while stack:
        part = stack.pop()
        if part.size == 1 or g.degree[part].sum() == 0:
            labels[part] = next_label
            status[int(part[0])] = CERTIFIED
            next_label += 1
            continue
        sub = induced_with_self_loops(g, part)
        comps = connected_components(sub)
        if len(comps) > 1:
            stack.extend(part[c] for c in comps[::-1])
            continue
        wc = WalkConfig(phi=phi, gamma=gamma, beta=beta, rho=cfg.rho, t_max=cfg.t_max,
                        mode=FRESH_PROJECTION,
                        seed=int(np.random.SeedSequence([cfg.seed, calls]).generate_state(1)[0]))
        calls += 1
        out = cut_procedure(sub, wc)
        for a, s, cphi in out.cuts:
            splits.append(Split(part[a], part[s], cphi, gamma))
        if out.kind == "expander":
            labels[part] = next_label
            status[int(part[0])] = CAP_REACHED if out.cap_reached else CERTIFIED
            next_label += 1
        elif out.kind == "balanced":
            stack.append(part[out.second])
            stack.append(part[out.first])
        else:
            keep = part[out.first]
            labels[keep] = next_label
            status[int(keep.min())] = NEAR_EXPANDER
            next_label += 1
            stack.append(part[out.second])
    return _finish(g, labels, status, gamma, splits)


def decompose_with_auto_gamma(g: Graph, cfg: DecompConfig | None = None, gamma: float | None = None,
                              level: int = 0) -> Decomposition:
    """Practical decomposition, lowering the threshold until the level contracts enough.

    A result that cuts nothing is accepted as is. Otherwise, if the component
    count exceeds ``reduction_threshold`` times the vertex count, the
    threshold is multiplied by ``epsilon`` and the level is recomputed.
    """
    cfg = cfg or DecompConfig()
    gamma = cfg.gamma0 if gamma is None else gamma
    n = g.n
    base = len(connected_components(g)) if n else 0
    attempt = 0
    while True:
        dec = decompose_practical(g, cfg, gamma, level=level, attempt=attempt)
        dec.restarts = attempt
        if n <= 1 or dec.count == base or dec.count <= cfg.reduction_threshold * n:
            return dec
        log.info("level %d: %d components from %d vertices at gamma=%.4g, lowering gamma",
                 level, dec.count, n, gamma)
        gamma *= cfg.epsilon
        attempt += 1
        if gamma < GAMMA_FLOOR:
            raise DecompositionError(
                f"threshold fell below {GAMMA_FLOOR:g} on level {level} without enough contraction "
                f"({dec.count} components from {n} vertices)")


def write_decomposition(path, dec: Decomposition) -> None:
    with open(path, "w") as fh:
        fh.write("".join(f"{int(c)}\n" for c in dec.labels))
