import math

import numpy as np
import pytest

from ssmatch import (CertificateInvalid, DualExport, EdgeStream, MWUConfig, RunStats, SpaceMeter,
                     WidthViolation, build_matching_lp, check_feasible, duality_gap_certificate,
                     greedy_oracle_pass, init_duals, mwu_step, open_edge_stream, solve_fractional,
                     verify_dual_feasibility)
from ssmatch.baselines import fractional_lp_opt, hopcroft_karp, load_graph
from ssmatch.lp import FractionalMatching
from ssmatch.oracles import OracleResult
from ssmatch.stream import BudgetExceeded, StreamIOError, VERTEX_RECORD_BYTES


def result(n, pairs):
    us = np.array([p[0] for p in pairs], dtype=np.int64)
    vs = np.array([p[1] for p in pairs], dtype=np.int64)
    return OracleResult(n, us, vs, np.ones(len(pairs)), threshold=1.0, min_ratio=0.0)


def test_init_duals():
    d = init_duals(3)
    assert list(d.weights) == [1, 1, 1] and d.normalizer == 3
    assert init_duals(1).normalizer == 1
    m = SpaceMeter()
    d = init_duals(10**6, m)
    assert m.current_bytes == 10**6 * VERTEX_RECORD_BYTES
    assert d.weights.shape == (10**6,) and d.weights.min() == d.weights.max() == 1
    with pytest.raises(ValueError):
        init_duals(0)


def test_mwu_step_examples():
    cfg = MWUConfig(eps=0.4, eta=0.1)
    d = init_duals(4)
    mwu_step(d, result(4, [(0, 1)]), cfg)
    assert d.weights.tolist() == pytest.approx([1.1, 1.1, 1, 1])
    assert d.weights[2:].tolist() == [1, 1]          # load 0: unchanged
    # a pass loading every vertex once keeps the distribution uniform
    # (K3 has no perfect matching, so the symmetric case is shown on K4)
    d = init_duals(4)
    mwu_step(d, result(4, [(0, 1), (2, 3)]), cfg)
    assert d.weights.tolist() == pytest.approx([1.1] * 4)
    assert d.probabilities().tolist() == pytest.approx([0.25] * 4)


def test_width_violation_names_oracle():
    r = result(3, [(0, 1), (1, 2)])
    r.oracle = "mine"
    with pytest.raises(WidthViolation) as ei:
        mwu_step(init_duals(3), r, MWUConfig())
    assert ei.value.oracle == "mine" and ei.value.load == 2


def test_potential_monotone_and_bounded():
    rng = np.random.default_rng(1)
    cfg = MWUConfig(eps=0.2)
    d = init_duals(20)
    for _ in range(50):
        perm = rng.permutation(20)
        k = int(rng.integers(0, 10))
        r = result(20, [(int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(k)])
        before = d.normalizer
        p = d.probabilities()
        load = np.bincount(np.concatenate([r.us, r.vs]), minlength=20)
        mwu_step(d, r, cfg)
        assert d.normalizer >= before
        assert math.log(d.normalizer) - math.log(before) <= cfg.eta * float(p @ load) + 1e-12


def test_t_max_formula():
    cfg = MWUConfig(eps=0.1)
    assert cfg.eta == 0.025
    assert cfg.resolve_t_max(100) == math.ceil(4 * math.log(100) / 0.01)
    assert MWUConfig(eps=0.1, tmax_scale=1).resolve_t_max(100) == math.ceil(math.log(100) / 0.01)
    assert MWUConfig(t_max=7).resolve_t_max(10**6) == 7
    with pytest.raises(ValueError):
        MWUConfig(eps=0.7)
    with pytest.raises(ValueError):
        MWUConfig(stop_rule="soon")


def solve(spec_or_stream, graph_class="bipartite", mode="cardinality", eps=0.1, **kw):
    s = spec_or_stream if isinstance(spec_or_stream, EdgeStream) else open_edge_stream(spec_or_stream)
    lp = build_matching_lp(s.n, graph_class, mode, eps, left=s.left)
    return s, lp, solve_fractional(s, lp, MWUConfig(eps=eps, **kw))


def test_single_edge():
    s, lp, sol = solve(EdgeStream(2, [0], [1]))
    assert sol.x[(0, 1)] >= 0.9
    assert sol.stats.certificate_gap <= 0.1


def test_p3():
    s, lp, sol = solve("path:n=3")
    assert 0.9 <= sol.x.value <= 1.0 + 1e-9
    assert sol.stats.certificate_gap <= 0.1


def test_random_bipartite_against_lp_optimum():
    s, lp, sol = solve("random-bipartite:n=200,L=100,p=0.05,seed=1")
    n, edges, left = load_graph(s)
    opt = hopcroft_karp(n, edges, left).size
    assert fractional_lp_opt(n, edges, degree_only=False) == opt
    assert sol.x.value >= 0.9 * opt
    assert sol.stats.certificate_gap <= 0.1
    assert sol.stats.converged


def test_pass_accounting_identity():
    for spec, kw in [("random-bipartite:n=100,L=50,p=0.05,seed=2", {}),
                     ("random-bipartite:n=80,L=40,p=0.1,weighted=1,seed=2", {"mode": "weighted"}),
                     ("random-general:n=30,p=0.2,seed=2", {"graph_class": "general"})]:
        s, lp, sol = solve(spec, **kw)
        st = sol.stats
        assert st.passes == st.iterations + st.preliminary_passes + st.certificate_passes
        assert st.passes == s.passes_completed
        assert st.passes <= st.t_max + 3


def test_fixed_stop_runs_t_max():
    s, lp, sol = solve("random-bipartite:n=40,L=20,p=0.2,seed=3", stop_rule="fixed", t_max=25)
    assert sol.stats.iterations == 25 and sol.stats.passes == 26


def test_t_max_exhausted_is_flagged():
    s, lp, sol = solve("random-bipartite:n=100,L=50,p=0.03,seed=1", t_max=2)
    assert not sol.converged and not sol.stats.converged
    # the best-so-far solution is still feasible and certified
    assert max(sol.x.loads()) <= 1 + 1e-9
    verify_dual_feasibility(s, sol.duals, slack=1e-9)


def test_solution_is_feasible_and_certified():
    for spec, kw in [("random-bipartite:n=150,L=75,p=0.04,seed=5", {}),
                     ("random-general:n=14,p=0.4,seed=5", {"graph_class": "general", "eps": 0.2}),
                     ("random-bipartite:n=60,L=30,p=0.2,weighted=1,seed=5", {"mode": "weighted"})]:
        s, lp, sol = solve(spec, **kw)
        assert check_feasible(sol.x, lp) == []
        verify_dual_feasibility(s, sol.duals, slack=1e-9)
        gap = duality_gap_certificate(sol.x, sol.duals, lp, s)
        assert gap == pytest.approx(sol.stats.certificate_gap, abs=1e-9)
        assert sol.duals.value >= sol.x.value - 1e-9


def test_duality_gap_examples():
    s = EdgeStream(2, [0], [1])
    lp = build_matching_lp(2)
    x = FractionalMatching.from_entries(2, [(0, 1, 1)])
    assert duality_gap_certificate(x, DualExport(np.array([1.0, 0.0])), lp, s) == 0
    k3 = EdgeStream(3, [0, 1, 0], [1, 2, 2])
    x = FractionalMatching.from_entries(3, [(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)])
    assert duality_gap_certificate(x, DualExport(np.array([0.5] * 3)), build_matching_lp(3), k3) == 0


def test_invalid_certificate_names_witness():
    s = EdgeStream(4, [0, 2], [1, 3])
    bad = DualExport(np.array([1.0, 0.0, 0.2, 0.2]))
    with pytest.raises(CertificateInvalid) as ei:
        verify_dual_feasibility(s, bad, slack=1e-9)
    assert ei.value.witness[:2] == (2, 3)
    fixed = verify_dual_feasibility(s, bad, slack=0.7, repair=True)
    assert fixed.y.tolist() == pytest.approx([2.5, 0, 0.5, 0.5])   # scaled by 1/0.4


def test_dual_file_round_trip(tmp_path):
    d = DualExport(np.array([0.25, 0.0, 1 / 3]), {frozenset({0, 1, 2}): 0.125}, "weighted", 0.2,
                   3.5, 17)
    p = tmp_path / "y.txt"
    d.write(p)
    r = DualExport.read(p)
    assert r.y.tolist() == d.y.tolist() and r.set_duals == d.set_duals
    assert (r.mode, r.eps, r.weight_scale, r.max_class) == ("weighted", 0.2, 3.5, 17)
    assert r.value == d.value


def test_budget_exceeded_carries_stats():
    s = open_edge_stream("random-bipartite:n=50,L=25,p=0.2,seed=1")
    lp = build_matching_lp(s.n, left=s.left)
    with pytest.raises(BudgetExceeded) as ei:
        solve_fractional(s, lp, meter=SpaceMeter(800))
    assert isinstance(ei.value.stats, RunStats)


def test_width_violation_from_custom_oracle():
    def doubled(cursor, duals, rule, meter, **kw):
        r = greedy_oracle_pass(cursor, duals, rule, meter, **kw)
        r.us = np.concatenate([r.us, r.us[:1]])
        r.vs = np.concatenate([r.vs, r.vs[:1] * 0 + (r.vs[:1] + 1) % cursor.n])
        r.ws = np.ones(len(r.us))
        return r

    s = open_edge_stream("path:n=6")
    lp = build_matching_lp(6, "general")
    with pytest.raises(WidthViolation):
        solve_fractional(s, lp, oracle=doubled)


def test_stream_failure_aborts_with_stats():
    s = open_edge_stream("random-bipartite:n=40,L=20,p=0.3,seed=1")
    s._inject_failure(10)
    lp = build_matching_lp(s.n, left=s.left)
    with pytest.raises(StreamIOError) as ei:
        solve_fractional(s, lp)
    assert ei.value.stats.passes == 0


def test_empty_graph():
    s = EdgeStream(5, [], [])
    lp = build_matching_lp(5)
    sol = solve_fractional(s, lp)
    assert sol.x.value == 0 and sol.duals.value == 0
    assert sol.stats.certificate_gap == 0


def test_oracle_mode_mismatch():
    s = open_edge_stream("path:n=4")
    with pytest.raises(ValueError):
        solve_fractional(s, build_matching_lp(4), oracle="weighted")
    with pytest.raises(ValueError):
        solve_fractional(s, build_matching_lp(4), oracle="general")
    with pytest.raises(ValueError):
        solve_fractional(s, build_matching_lp(5))


def test_general_mode_respects_odd_sets():
    s, lp, sol = solve("random-general:n=9,p=0.8,seed=3", graph_class="general", eps=0.2)
    assert check_feasible(sol.x, lp) == []
    s, lp, sol = solve("cycle:n=3", graph_class="general", eps=0.2)
    assert sol.x.value <= 1 + 1e-9


def test_weighted_values_in_input_units():
    s, lp, sol = solve("random-bipartite:n=60,L=30,p=0.2,weighted=1,seed=9", mode="weighted")
    wmax = max(e.w for e in s.begin_pass())
    assert sol.duals.weight_scale == wmax
    # LP weights are class-rounded stream weights, so never below the true weight
    stream_w = {}
    for e in s.begin_pass():
        k = (min(e.u, e.v), max(e.u, e.v))
        stream_w[k] = max(stream_w.get(k, 0), e.w)
    for k, w in sol.x.w.items():
        assert stream_w[k] - 1e-9 <= w < stream_w[k] * 1.1 + 1e-9
