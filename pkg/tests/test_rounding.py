from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmatch import (FractionalMatching, SpaceMeter, build_matching_lp, cancel_cycles_bipartite,
                     extract_support, open_edge_stream, round_forest, round_general,
                     round_matching, solve_fractional)
from ssmatch.baselines import brute_force_max_matching, load_graph
from ssmatch.rounding import (CyclicSupport, PreconditionFailed, RoundingReport, SupportGraph,
                              cancel_cycles_inplace, default_tau)

HALF = Fraction(1, 2)


def fm(n, entries):
    return FractionalMatching.from_entries(n, entries)


def test_extract_support_examples():
    s = extract_support(fm(2, [(0, 1, 0.9)]), 0.01)
    assert list(s.x) == [(0, 1)] and s.loss == 0
    s = extract_support(fm(4, [(0, 1, 0.9), (2, 3, 0.005)]), 0.01)
    assert list(s.x) == [(0, 1)] and s.loss == pytest.approx(0.005)
    with pytest.raises(ValueError):
        extract_support(fm(2, [(0, 1, 0.9)]), -1)
    m = SpaceMeter(16)
    extract_support(fm(2, [(0, 1, 0.9)]), 0, m)
    assert m.current_bytes == 16


def test_threshold_loss_on_solver_output():
    s = open_edge_stream("random-bipartite:n=200,L=100,p=0.05,seed=1")
    lp = build_matching_lp(s.n, eps=0.1, left=s.left)
    x = solve_fractional(s, lp).x
    sup = extract_support(x, default_tau(lp))
    assert sup.loss <= 0.05 * x.value


def test_c4_cancels_to_two_opposite_edges():
    x = fm(4, [(0, 1, HALF), (1, 2, HALF), (2, 3, HALF), (0, 3, HALF)])
    f = cancel_cycles_bipartite(extract_support(x))
    assert sum(f.x.values()) == 2
    assert set(f.x.values()) == {1}
    assert sorted(f.x) in ([(0, 1), (2, 3)], [(0, 3), (1, 2)])


def test_forest_input_unchanged():
    x = fm(5, [(0, 1, 0.3), (1, 2, 0.6), (2, 3, 0.2), (3, 4, 0.7)])
    s = extract_support(x)
    f = cancel_cycles_bipartite(s)
    assert f.x == s.x


def test_weighted_cycle_moves_towards_heavier_edges():
    x = fm(4, [(0, 1, HALF, 1), (1, 2, HALF, 2), (2, 3, HALF, 1), (0, 3, HALF, 2)])
    s = extract_support(x)
    f = cancel_cycles_bipartite(s)
    assert sorted(f.x) == [(0, 3), (1, 2)]
    assert f.value == 4 and s.value == 3


def test_odd_cycle_in_bipartite_mode_is_an_error():
    x = fm(3, [(0, 1, HALF), (1, 2, HALF), (0, 2, HALF)])
    with pytest.raises(Exception):
        cancel_cycles_bipartite(extract_support(x))


def test_round_forest_examples():
    M = round_forest(extract_support(fm(2, [(0, 1, 0.95)])))
    assert M.edges == [(0, 1)]
    M = round_forest(extract_support(fm(3, [(0, 1, HALF), (1, 2, HALF)])))
    assert M.size == 1
    with pytest.raises(CyclicSupport):
        round_forest(extract_support(fm(4, [(0, 1, HALF), (1, 2, HALF), (2, 3, HALF),
                                            (0, 3, HALF)])))


def random_forest(rng, n, weighted):
    """Random forest with rational x, feasible degree loads."""
    edges = []
    for v in range(1, n):
        if rng.random() < 0.8:
            edges.append((int(rng.integers(0, v)), v))
    load = np.zeros(n)
    raw = {e: Fraction(int(rng.integers(1, 7)), 6) for e in edges}
    for (u, v), r in raw.items():
        load[u] += r
        load[v] += r
    x = FractionalMatching(n)
    for (u, v), r in raw.items():
        w = Fraction(int(rng.integers(1, 20)), 4) if weighted else 1
        x.add(u, v, r / Fraction(max(1, load[u], load[v])).limit_denominator(10**6), w)
    return x


@pytest.mark.parametrize("weighted", [False, True])
def test_round_forest_matches_brute_force(weighted):
    rng = np.random.default_rng(3)
    for _ in range(60):
        n = int(rng.integers(2, 21))
        x = random_forest(rng, n, weighted)
        s = extract_support(x)
        M = round_forest(s, weighted=weighted)
        assert M.is_vertex_disjoint() and set(M.edges) <= set(s.x)
        edges = [(u, v, s.w[(u, v)]) for (u, v) in s.x]
        opt = brute_force_max_matching(n, edges, "weighted" if weighted else "cardinality")
        if weighted:
            assert M.weight == opt.weight
            assert M.weight >= s.value
        else:
            assert M.size == opt.size
            assert M.size >= sum(s.x.values()) - Fraction(1, 10**6)


def test_round_general_examples():
    lp = build_matching_lp(3, "general", "cardinality", 0.2, k_max=3)
    with pytest.raises(PreconditionFailed):
        round_general(fm(3, [(0, 1, HALF), (1, 2, HALF), (0, 2, HALF)]), lp)
    c5 = fm(5, [(i, (i + 1) % 5, Fraction(2, 5)) for i in range(5)])
    rep = RoundingReport()
    M = round_general(c5, build_matching_lp(5, "general", "cardinality", 0.2), report=rep)
    assert M.size == 2 and M.is_vertex_disjoint()
    assert rep.odd_cycles == 1


def test_round_general_drops_min_edge_lexicographically():
    # C5 with unequal values: the smallest-x edge (3, 4) is dropped first
    vals = [0.4, 0.4, 0.4, 0.1, 0.4]
    c5 = fm(5, [(i, (i + 1) % 5, v) for i, v in enumerate(vals)])
    rep = RoundingReport()
    round_general(c5, build_matching_lp(5, "general", "cardinality", 0.2), report=rep)
    assert rep.odd_drop_loss == pytest.approx(0.1)


def test_round_general_on_solver_output():
    rng = np.random.default_rng(12)
    for t in range(15):
        spec = f"random-general:n=12,p={rng.uniform(0.2, 0.7):.2f},seed={t}"
        s = open_edge_stream(spec)
        lp = build_matching_lp(s.n, "general", "cardinality", 0.2)
        sol = solve_fractional(s, lp)
        M, rep = round_matching(sol.x, lp)
        n, edges, _ = load_graph(s)
        nu = brute_force_max_matching(n, edges).size
        assert M.size >= 0.8 * sol.x.value - 1
        assert M.size >= 0.8 * nu - 1
        assert M.size <= nu


def test_value_chain_report():
    s = open_edge_stream("random-bipartite:n=100,L=50,p=0.05,seed=4")
    lp = build_matching_lp(s.n, eps=0.1, left=s.left)
    sol = solve_fractional(s, lp)
    M, rep = round_matching(sol.x, lp)
    assert rep.input_value == pytest.approx(sol.x.value)
    assert rep.forest_value == pytest.approx(rep.input_value - rep.threshold_loss)
    assert rep.matching_value == M.size >= rep.forest_value - 1e-6


def test_inplace_compaction_keeps_loads_and_meter():
    m = SpaceMeter()
    x = FractionalMatching(6, m)
    for u, v in [(0, 3), (0, 4), (1, 3), (1, 4), (2, 5), (1, 5)]:
        x.add(u, v, 0.4)
    loads = x.loads()
    value = x.value
    cancel_cycles_inplace(x)
    assert extract_support(x).is_forest()
    assert x.value == pytest.approx(value)
    assert np.all(x.loads() <= loads + 1e-12)
    assert m.current_bytes == 16 * len(x)


def exact_load(s, v):
    return sum((a for e, a in s.x.items() if v in e), Fraction(0))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_cancel_property(a, b, data):
    n = a + b
    pairs = [(i, a + j) for i in range(a) for j in range(b) if data.draw(st.booleans())]
    raw = {e: Fraction(data.draw(st.integers(1, 8)), 8) for e in pairs}
    load = [Fraction(0)] * n
    for (u, v), r in raw.items():
        load[u] += r
        load[v] += r
    x = FractionalMatching(n)
    for (u, v), r in raw.items():
        x.add(u, v, r / max(1, load[u], load[v]), Fraction(data.draw(st.integers(1, 5))))
    s = extract_support(x)
    f = cancel_cycles_bipartite(s)
    assert f.is_forest()
    assert sum(f.x.values()) == sum(s.x.values())          # exact with rationals
    assert f.value >= s.value
    assert all(exact_load(f, v) <= exact_load(s, v) for v in range(n))
    M = round_forest(f, weighted=True)
    assert M.weight >= f.value
