import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expander_ncut import generators as gen
from expander_ncut.graph import (
    INFINITE_CONDUCTANCE,
    Graph,
    GraphFormatError,
    Partition,
    border,
    conductance_cut,
    connected_components,
    format_metis,
    induced_with_self_loops,
    load_graph,
    normalized_cut_value,
    parse_edge_list,
    parse_metis,
    read_partition,
    volume,
    write_metis,
    write_partition,
)
from expander_ncut.oracle import brute_force_conductance


@st.composite
def graphs(draw, max_n=9, loops=True):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=len(pairs), unique=True))
    w = draw(st.lists(st.integers(1, 5), min_size=len(chosen), max_size=len(chosen)))
    lp = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)) if loops else None
    u, v = zip(*chosen)
    return Graph.from_edges(n, u, v, w, lp)


def test_load_metis_path(tmp_path):
    f = tmp_path / "p3.graph"
    f.write_text("3 2\n2\n1 3\n2\n")
    g = load_graph(f)
    assert g.n == 3 and g.m == 2
    assert g.capacity(0, 1) == 1 and g.capacity(1, 2) == 1
    assert list(g.degree) == [1, 2, 1]


def test_edge_list_duplicates_summed():
    g = parse_edge_list("0 1\n1 2\n1 0\n")
    assert g.n == 3
    assert g.capacity(0, 1) == 2 and g.capacity(1, 2) == 1


def test_edge_list_loop():
    g = parse_edge_list("0 0 3")
    assert g.n == 1 and g.self_loop[0] == 3 and g.degree[0] == 3


def test_edge_list_one_based():
    g = parse_edge_list("1 2\n2 3\n")
    assert g.n == 3 and g.capacity(0, 1) == 1


def test_metis_weights_and_comments():
    g = parse_metis("% comment\n3 2 1\n2 5\n1 5 3 2\n2 2\n")
    assert g.capacity(0, 1) == 5 and g.capacity(1, 2) == 2


@pytest.mark.parametrize("text,line", [
    ("3\n2\n1 3\n2\n", 1),               # header lacks m
    ("3 2\n2\n1 x\n2\n", 3),             # non-numeric token
    ("3 2\n2\n1 4\n2\n", 3),             # id out of range
    ("3 2 1\n2 -1\n1 -1 3 1\n2 1\n", 2),  # negative weight
])
def test_metis_errors_name_line(text, line):
    with pytest.raises(GraphFormatError) as exc:
        parse_metis(text)
    assert exc.value.lineno == line
    assert f"line {line}" in str(exc.value)


def test_edge_list_negative_weight():
    with pytest.raises(GraphFormatError) as exc:
        parse_edge_list("0 1 2\n1 2 -1\n")
    assert exc.value.lineno == 2


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_graph(tmp_path / "nope.graph")


def test_volume_examples(c4, barbell):
    assert volume(c4, [0, 1, 2, 3]) == 8
    assert volume(c4, []) == 0
    assert volume(barbell, [0, 1, 2]) == 7


def test_border_examples(c4, barbell):
    assert border(c4, [0, 1]) == 2
    assert border(c4, [0, 1, 2, 3]) == 0
    assert border(barbell, [0, 1, 2]) == 1


def test_conductance_examples(c4):
    assert conductance_cut(c4, [0, 1]) == 0.5
    assert conductance_cut(gen.star(3), [1]) == 1.0
    with pytest.raises(ValueError):
        conductance_cut(c4, [])
    with pytest.raises(ValueError):
        conductance_cut(c4, [0, 1, 2, 3])


def test_conductance_zero_volume_sentinel():
    g = Graph.from_edges(3, [0], [1])
    assert conductance_cut(g, [2]) == INFINITE_CONDUCTANCE


def test_conductance_matches_brute_force_on_random_graph():
    g = gen.random_connected(8, 0.3, seed=3)
    phi, s = brute_force_conductance(g)
    assert conductance_cut(g, s) == phi


def test_normalized_cut_examples(p4, two_triangles):
    k4 = gen.complete(4)
    assert normalized_cut_value(k4, Partition.from_labels(k4, [0, 0, 1, 1]), exact=True) == Fraction(4, 3)
    assert normalized_cut_value(two_triangles, Partition.from_labels(two_triangles, [0] * 3 + [1] * 3)) == 0
    assert normalized_cut_value(p4, Partition.from_labels(p4, [0, 0, 1, 1]), exact=True) == Fraction(2, 3)


def test_normalized_cut_rejects_empty_cluster(p4):
    with pytest.raises(ValueError):
        normalized_cut_value(p4, Partition.from_labels(p4, [0, 0, 2, 2], k=3))


def test_induced_examples(barbell, p3):
    tri = induced_with_self_loops(barbell, [3, 4, 5])
    assert tri.n == 3 and tri.self_loop[0] == 1 and tri.degree[0] == 3
    same = induced_with_self_loops(barbell, range(6))
    assert (same.to_dense() == barbell.to_dense()).all()
    sub = induced_with_self_loops(p3, [0, 1])
    assert sub.capacity(0, 1) == 1 and sub.self_loop[1] == 1 and list(sub.degree) == [1, 2]
    with pytest.raises(ValueError):
        induced_with_self_loops(p3, [])


def test_components_examples(two_triangles, c4):
    comps = connected_components(two_triangles)
    assert [c.tolist() for c in comps] == [[0, 1, 2], [3, 4, 5]]
    assert len(connected_components(c4)) == 1
    empty = Graph.from_edges(5, [], [])
    assert [c.tolist() for c in connected_components(empty)] == [[0], [1], [2], [3], [4]]


def test_partition_aggregates_match(barbell):
    p = Partition.from_labels(barbell, [0, 0, 1, 1, 1, 1])
    for c, members in enumerate(p.clusters()):
        assert p.border[c] == border(barbell, members)
        assert p.volume[c] == volume(barbell, members)


def test_partition_file_round_trip(tmp_path):
    labels = np.array([0, 2, 1, 1, 0])
    write_partition(labels, tmp_path / "p")
    assert (read_partition(tmp_path / "p") == labels).all()


@given(graphs())
def test_degree_invariants(g):
    dense = g.to_dense()
    assert (dense == dense.T).all()
    off = dense - np.diag(np.diag(dense))
    assert np.allclose(g.degree, off.sum(axis=1) + g.self_loop)
    assert math.isclose(g.total_volume, 2 * g.edge_capacity + g.self_loop.sum())


@given(graphs(), st.data())
def test_cut_invariants(g, data):
    members = data.draw(st.lists(st.integers(0, g.n - 1), min_size=1, max_size=g.n - 1, unique=True))
    rest = np.setdiff1d(np.arange(g.n), members)
    assert border(g, members) == border(g, rest)
    phi = conductance_cut(g, members)
    labels = np.zeros(g.n, dtype=int)
    labels[members] = 1
    if min(volume(g, members), volume(g, rest)) > 0:
        theta = normalized_cut_value(g, Partition.from_labels(g, labels))
        assert phi <= theta + 1e-12 and theta <= 2 * phi + 1e-12


@given(graphs(), st.data())
def test_induced_preserves_degree(g, data):
    members = sorted(data.draw(st.lists(st.integers(0, g.n - 1), min_size=1, unique=True)))
    sub = induced_with_self_loops(g, members)
    assert (sub.degree == g.degree[members]).all()


@given(graphs())
def test_metis_round_trip(g):
    back = parse_metis(format_metis(g))
    assert (back.to_dense() == g.to_dense()).all()
    assert (back.self_loop == g.self_loop).all()


def test_write_metis_file(tmp_path, barbell):
    write_metis(barbell, tmp_path / "b.graph")
    assert (load_graph(tmp_path / "b.graph").to_dense() == barbell.to_dense()).all()
