import pytest

from ssmatch import AdmissibilityRule, greedy_oracle_pass, open_edge_stream
from ssmatch.baselines import brute_force_max_matching, hopcroft_karp, two_coloring
from ssmatch.generators import generate_from_spec, generate_graph, looks_like_spec


def test_path_3():
    g = generate_graph("path", {"n": 3})
    assert sorted(g.edges()) == [(0, 1), (1, 2)]


def test_complete_bipartite_2_2():
    g = generate_graph("complete-bipartite", {"a": 2, "b": 2})
    assert g.m == 4 and g.left == 2


def test_random_bipartite_is_deterministic(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    generate_graph("random-bipartite", {"n": 100, "L": 50, "p": 0.1}, seed=1).write(a)
    generate_graph("random-bipartite", {"n": 100, "L": 50, "p": 0.1}, seed=1).write(b)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.txt"
    generate_graph("random-bipartite", {"n": 100, "L": 50, "p": 0.1}, seed=2).write(c)
    assert a.read_bytes() != c.read_bytes()


def test_written_file_is_readable(tmp_path):
    p = tmp_path / "w.txt"
    g = generate_graph("random-bipartite", {"n": 30, "L": 10, "p": 0.3, "weighted": 1}, seed=4)
    g.write(p)
    s = open_edge_stream(p)
    assert s.left == 10 and s.weighted and s.m == g.m
    assert [(e.u, e.v, e.w) for e in s.begin_pass()] == g.edges()


@pytest.mark.parametrize("model,params", [
    ("random-bipartite", {"n": 10, "L": 5, "p": 1.5}),
    ("random-general", {"n": 10, "p": -0.1}),
    ("random-bipartite", {"n": 10, "L": 10, "p": 0.5}),
    ("cycle", {"n": 2}),
    ("path", {"n": 0}),
    ("complete-bipartite", {"a": 0, "b": 3}),
    ("path", {"n": 3, "q": 1}),
    ("no-such-model", {}),
])
def test_invalid_params(model, params):
    with pytest.raises(ValueError):
        generate_graph(model, params)


def test_random_bipartite_respects_sides():
    g = generate_graph("random-bipartite", {"n": 40, "L": 15, "p": 0.4}, seed=3)
    assert all(u < 15 <= v for u, v in g.edges())


def test_random_general_simple():
    g = generate_graph("random-general", {"n": 30, "p": 0.5}, seed=3)
    keys = [tuple(sorted(e)) for e in g.edges()]
    assert len(set(keys)) == len(keys)
    assert all(u != v for u, v in keys)


def test_hard_layered_defeats_one_greedy_pass():
    k = 6
    s = open_edge_stream("hard-layered:k=6")
    n, edges = s.n, [(e.u, e.v) for e in s.begin_pass()]
    two_coloring(n, edges)
    assert hopcroft_karp(n, edges, s.left).size == 2 * k
    res = greedy_oracle_pass(s.begin_pass(), [0.0] * n, AdmissibilityRule())
    assert res.size == k


def test_petersen():
    g = generate_from_spec("petersen")
    assert (g.n, g.m) == (10, 15)
    degrees = [0] * 10
    for u, v in g.edges():
        degrees[u] += 1
        degrees[v] += 1
    assert set(degrees) == {3}
    assert brute_force_max_matching(10, g.edges()).size == 5


def test_spec_detection():
    assert looks_like_spec("path:n=3")
    assert looks_like_spec("petersen")
    assert not looks_like_spec("graph.txt")
    assert not looks_like_spec("foo:n=3")
    assert generate_from_spec("cycle:n=5,seed=9").m == 5
