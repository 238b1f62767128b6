import numpy as np
import pytest
from hypothesis import settings

from expander_ncut import generators as gen
from expander_ncut.graph import Graph
from expander_ncut.hierarchy import TreeSparsifier

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title} | {detail}")


def barbell_graph():
    return gen.barbell(3)


def two_triangles_graph():
    return gen.disjoint_union(gen.complete(3), gen.complete(3))


@pytest.fixture
def barbell():
    return barbell_graph()


@pytest.fixture
def k8():
    return gen.complete(8)


@pytest.fixture
def c4():
    return gen.cycle(4)


@pytest.fixture
def p3():
    return gen.path(3)


@pytest.fixture
def p4():
    return gen.path(4)


@pytest.fixture
def two_triangles():
    return two_triangles_graph()


def random_tree(rng: np.random.Generator, n_nodes: int, max_weight: int = 9) -> TreeSparsifier:
    """Random rooted tree with leaves numbered first; integer weights and leaf volumes."""
    n_nodes = max(n_nodes, 2)
    parent_of = {0: -1}
    for v in range(1, n_nodes):
        parent_of[v] = int(rng.integers(0, v))
    kids = {v: [] for v in range(n_nodes)}
    for v, p in parent_of.items():
        if p >= 0:
            kids[p].append(v)
    leaves = [v for v in range(n_nodes) if not kids[v]]
    inner = [v for v in range(n_nodes) if kids[v]]
    ids = {v: i for i, v in enumerate(leaves + inner)}
    parent = np.full(n_nodes, -1, dtype=np.int64)
    for v, p in parent_of.items():
        parent[ids[v]] = ids[p] if p >= 0 else -1
    weight = rng.integers(0, max_weight + 1, size=n_nodes).astype(float)
    vol0 = np.zeros(n_nodes)
    vol0[: len(leaves)] = rng.integers(1, max_weight + 1, size=len(leaves))
    level = np.zeros(n_nodes, dtype=np.int64)
    # accumulate volumes bottom-up (children have larger original ids than parents)
    for v in sorted(parent_of, reverse=True):
        if parent_of[v] >= 0:
            vol0[ids[parent_of[v]]] += vol0[ids[v]]
            level[ids[parent_of[v]]] = max(level[ids[parent_of[v]]], level[ids[v]] + 1)
    weight[parent < 0] = 0
    return TreeSparsifier(parent, weight, vol0, level, len(leaves))


def random_graphs(count: int, n_lo: int, n_hi: int, seed: int, max_weight: int = 1, p: float = 0.3):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        out.append(gen.random_connected(n, float(rng.uniform(0.1, p + 0.3)), seed=seed * 1000 + i,
                                        max_weight=max_weight))
    return out


def loopy_pair(loop: float = 3.0) -> Graph:
    """Single unit edge whose endpoints carry self-loops; its only cut has conductance 1/(1+loop)."""
    return Graph.from_edges(2, [0], [1], [1.0], [loop, loop])
