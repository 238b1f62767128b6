"""Command-line interface.

Subcommands: ``generate``, ``decompose``, ``hierarchy``, ``solve`` and ``oracle``.
Exit codes: 0 on success, 1 on a domain error or oracle refusal, 2 on I/O or
parse errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import generators
from .decomp import DecompConfig, DecompositionError, decompose_with_auto_gamma, write_decomposition
from .graph import Graph, GraphFormatError, connected_components, load_graph, write_metis, write_partition
from .hierarchy import HierarchyError, build_hierarchy, tree_stats, write_tree
from .oracle import (
    MAX_CONDUCTANCE_N,
    MAX_NCUT_N,
    MAX_NEAR_EXPANDER_N,
    MAX_TREE_EDGES,
    MAX_WALK_N,
    OracleRefusal,
    brute_force_conductance,
    brute_force_ncut,
    brute_force_tree_cut,
    check_averaging_claim,
    check_near_expander,
    check_potential_decrease,
    exact_walk,
    initial_potential,
)
from .solver import DP, GREEDY, SolverError, dp_cut, greedy_cut, normalize_ks, solve_ncut
from .walk import center, prefix_conductances, rayleigh

log = logging.getLogger("expander_ncut")

STATS_FIELDS = ["run", "seed", "k", "theta_exact", "theta_tree", "theta_unrefined", "moves"]
SUMMARY_FIELDS = ["k", "runs", "theta_mean", "theta_min", "theta_max", "theta_tree_mean"]
TIMING_FIELDS = ["run", "seed", "k", "hierarchy_s", "solve_s", "refine_s", "total_s"]

DOMAIN_ERRORS = (ValueError, SolverError, DecompositionError, HierarchyError, OracleRefusal)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_table(path: Path, fields, rows, fmt: str) -> None:
    if fmt == "json":
        path.write_text(json.dumps([{f: r[f] for f in fields} for r in rows], indent=2) + "\n")
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[f]) for f in fields])
    path.write_text(buf.getvalue())


def _k_list(text: str) -> list[int]:
    try:
        return normalize_ks(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid k list {text!r}: {exc}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _decomp_cfg(args, seed: int) -> DecompConfig:
    return DecompConfig(gamma0=args.gamma0, epsilon=args.epsilon, rho=args.rho, t_max=args.tmax, seed=seed)


def _load(args) -> Graph:
    return load_graph(args.graph, args.format)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ commands


def cmd_solve(args) -> int:
    g = _load(args)
    out = _out_dir(args)
    ks = args.k
    if ks[-1] > g.n:
        raise SolverError(f"k={ks[-1]} exceeds the vertex count {g.n}")
    rows, timings = [], []
    for run, seed in enumerate(range(args.seed, args.seed + args.runs)):
        res = solve_ncut(g, ks, _decomp_cfg(args, seed), heuristic=args.heuristic,
                         refine_result=not args.no_refine)
        for k in ks:
            r = res.results[k]
            write_partition(r.partition.assignment, out / f"part.seed{seed}.k{k}")
            rows.append({"run": run, "seed": seed, "k": k, "theta_exact": float(r.theta),
                         "theta_tree": float(r.theta_tree), "theta_unrefined": float(r.theta_unrefined),
                         "moves": r.moves})
            timings.append({"run": run, "seed": seed, "k": k, "hierarchy_s": res.hierarchy_time,
                            "solve_s": res.solve_time, "refine_s": r.refine_time,
                            "total_s": res.total_time(k)})
    summary = []
    for k in ks:
        th = [r["theta_exact"] for r in rows if r["k"] == k]
        tt = [r["theta_tree"] for r in rows if r["k"] == k]
        summary.append({"k": k, "runs": len(th), "theta_mean": float(np.mean(th)), "theta_min": min(th),
                        "theta_max": max(th), "theta_tree_mean": float(np.mean(tt))})
    ext = args.stats
    _write_table(out / f"stats.{ext}", STATS_FIELDS, rows, ext)
    _write_table(out / f"summary.{ext}", SUMMARY_FIELDS, summary, ext)
    _write_table(out / f"timings.{ext}", TIMING_FIELDS, timings, ext)
    for s in summary:
        print(f"k={s['k']} theta_mean={s['theta_mean']:.6g} theta_min={s['theta_min']:.6g}")
    return 0


def cmd_decompose(args) -> int:
    g = _load(args)
    out = _out_dir(args)
    dec = decompose_with_auto_gamma(g, _decomp_cfg(args, args.seed))
    write_decomposition(out / "components", dec)
    row = {"components": dec.count, "cut_edges": float(dec.cut_edges), "gamma_used": float(dec.gamma_used),
           "restarts": dec.restarts, "certified": dec.status.count("certified"),
           "cap_reached": dec.status.count("cap_reached")}
    _write_table(out / f"decomposition.{args.stats}", list(row), [row], args.stats)
    print(f"components={dec.count} cut_edges={_fmt(float(dec.cut_edges))} gamma_used={dec.gamma_used:.6g}")
    return 0


def cmd_hierarchy(args) -> int:
    g = _load(args)
    out = _out_dir(args)
    tree = build_hierarchy(g, _decomp_cfg(args, args.seed))
    write_tree(out / "tree.txt", tree)
    st = tree_stats(tree)
    rows = [{"level": i, "vertices": n, "gamma": float(tree.gammas[i]) if i < len(tree.gammas) else ""}
            for i, n in enumerate(st.level_sizes)]
    _write_table(out / f"levels.{args.stats}", ["level", "vertices", "gamma"], rows, args.stats)
    print(f"height={st.height} nodes={st.nodes} levels={st.level_sizes}")
    return 0


def cmd_generate(args) -> int:
    kind = args.kind
    if kind == "sbm":
        g, labels = generators.sbm(args.blocks, args.size, args.p_in, args.p_out, args.seed)
    elif kind == "barbell":
        g = generators.barbell(args.size)
    elif kind == "cycle":
        g = generators.cycle(args.n)
    elif kind == "complete":
        g = generators.complete(args.n)
    else:
        g = generators.grid(args.rows, args.cols)
    write_metis(g, args.out)
    print(f"{kind}: n={g.n} m={g.m} -> {args.out}")
    return 0


def cmd_oracle(args) -> int:
    g = _load(args)
    n = g.n
    k = args.k[-1]
    limits = [("brute-force conductance", n, MAX_CONDUCTANCE_N), ("brute-force ncut", n, MAX_NCUT_N),
              ("exact walk", n, MAX_WALK_N)]
    for what, size, limit in limits:
        if size > limit:
            raise OracleRefusal(f"{what}: size {size} exceeds the limit of {limit}")
    rng = np.random.default_rng(args.seed)
    results = []

    def report(name, ok, detail=""):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}")

    phi, s = brute_force_conductance(g)
    print(f"conductance: {phi:.6g} at {s.tolist()}")
    theta, part = brute_force_ncut(g, k)
    print(f"normalized {k}-cut: {theta:.6g} with labels {part.tolist()}")

    comps = connected_components(g)
    if len(comps) == 1 and n >= 2 and g.degree.min() > 0:
        worst = -math.inf
        for _ in range(100):
            u = center(rng.normal(size=n), None, g)
            if np.dot(g.degree, u * u) <= 0:
                continue
            _, pc = prefix_conductances(g, u)
            worst = max(worst, pc.min() - math.sqrt(2 * rayleigh(g, u)))
        report("sweep bound", worst <= 1e-9, f"max(best sweep - sqrt(2R)) = {worst:.3g}")
        trace = exact_walk(g, 50)
        report("potential decrease", bool(check_potential_decrease(trace)), f"{trace.steps} steps")
        p0 = trace.potential[0]
        report("initial potential", abs(p0 - initial_potential(g)) <= 1e-9 * max(p0, 1) and p0 <= g.total_volume,
               f"phi(0) = {p0:.12g}")
        if n <= MAX_NEAR_EXPANDER_N:
            vol = g.total_volume
            walk = exact_walk(g, until=1 / (4 * vol * vol))
            steps = max(walk.steps, 1)
            ok = bool(check_near_expander(g, np.arange(n), 6 / (12 * steps)))
            report("near expander", ok, f"{steps} steps")
    else:
        print("skip walk checks: graph must be connected with positive degrees")
    a = rng.normal(size=(5, 4))
    report("averaging identity", bool(check_averaging_claim(a, rng.normal(size=4))))
    tree = build_hierarchy(g, DecompConfig(seed=args.seed))
    if tree.size - 1 <= MAX_TREE_EDGES and tree.n_leaves >= 2:
        best, _ = brute_force_tree_cut(tree, 2)
        gval = greedy_cut(tree, 2).value
        dval = dp_cut(tree, 2).value
        report("tree 2-cut", math.isclose(gval, best, rel_tol=1e-12, abs_tol=1e-12)
               and math.isclose(dval, best, rel_tol=1e-12, abs_tol=1e-12),
               f"optimum {best:.6g}, greedy {gval:.6g}, dp {dval:.6g}")
    return 0 if all(results) else 1


# -------------------------------------------------------------------- parser


def _add_graph_args(p):
    p.add_argument("--graph", required=True, help="input graph file")
    p.add_argument("--format", choices=["metis", "edge_list"], default="metis")
    p.add_argument("--seed", type=int, default=0)


def _add_decomp_args(p):
    p.add_argument("--gamma0", type=float, default=0.3, help="initial cut threshold")
    p.add_argument("--epsilon", type=float, default=0.8, help="threshold reduction factor")
    p.add_argument("--rho", type=float, default=1e-4, help="certification threshold")
    p.add_argument("--tmax", type=_positive_int, default=None, help="walk steps per component")
    p.add_argument("--stats", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expander-ncut", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="normalized k-cut for one or more k")
    _add_graph_args(p)
    _add_decomp_args(p)
    p.add_argument("-k", type=_k_list, default=[2], help="comma-separated cluster counts")
    p.add_argument("--runs", type=_positive_int, default=1)
    p.add_argument("--heuristic", choices=[GREEDY, DP], default=GREEDY)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("decompose", help="expander decomposition with automatic threshold")
    _add_graph_args(p)
    _add_decomp_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("hierarchy", help="build and write the hierarchy tree")
    _add_graph_args(p)
    _add_decomp_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("generate", help="write a synthetic graph in METIS format")
    p.add_argument("kind", choices=["sbm", "barbell", "cycle", "complete", "grid"])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--size", type=int, default=3, help="clique size (barbell) or block size (sbm)")
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.5)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output graph file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="run exact checks on a small graph")
    _add_graph_args(p)
    p.add_argument("-k", type=_k_list, default=[2])
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GraphFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
