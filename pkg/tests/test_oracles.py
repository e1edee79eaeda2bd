import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmatch import (AdmissibilityRule, Edge, EdgeStream, SpaceMeter, admissible,
                     greedy_oracle_pass, weight_class)
from ssmatch import kernels
from ssmatch.oracles import WeightClasses, max_weight_class
from ssmatch.stream import BudgetExceeded

CARD = AdmissibilityRule()


def test_admissible_examples():
    e = Edge(0, 1)
    assert admissible(e, [0, 0], CARD)
    assert not admissible(e, [0.6, 0.6], CARD)
    weighted = AdmissibilityRule(mode="weighted")
    assert admissible(Edge(0, 1, 0.5), [0.2, 0.2], weighted)
    assert not admissible(Edge(0, 1, 0.3), [0.2, 0.2], weighted)
    assert not admissible(e, [0.3, 0.3], CARD, surcharge=0.5)


def test_rule_validation():
    with pytest.raises(ValueError):
        AdmissibilityRule(lam=0)
    with pytest.raises(ValueError):
        AdmissibilityRule(lam=1.5)
    assert AdmissibilityRule(mode="card").mode == "cardinality"


def test_single_edge_zero_duals():
    s = EdgeStream(2, [0], [1])
    r = greedy_oracle_pass(s.begin_pass(), np.zeros(2), CARD)
    assert list(zip(r.us, r.vs)) == [(0, 1)]
    assert r.loads == {0: 1, 1: 1} and r.max_load == 1


def test_p3_first_edge_wins():
    s = EdgeStream(3, [0, 1], [1, 2])
    r = greedy_oracle_pass(s.begin_pass(), np.zeros(3), CARD)
    assert list(zip(r.us.tolist(), r.vs.tolist())) == [(0, 1)]


def test_k3_with_blocking_duals():
    s = EdgeStream(3, [0, 1, 0], [1, 2, 2])
    y = [0.6, 0.6, 0.0]
    adm = [e for e in s.begin_pass() if admissible(e, y, CARD)]
    assert {(e.u, e.v) for e in adm} == {(1, 2), (0, 2)}
    r = greedy_oracle_pass(s.begin_pass(), y, CARD)
    assert list(zip(r.us.tolist(), r.vs.tolist())) == [(1, 2)]
    assert r.admissible_count == 2
    assert r.min_ratio == pytest.approx(0.6)


def test_surcharge_blocks_edges_inside_set():
    s = EdgeStream(4, [0, 1, 2], [1, 2, 3])
    r = greedy_oracle_pass(s.begin_pass(), np.zeros(4), CARD,
                           set_duals={frozenset({0, 1, 2}): 2.0})
    assert list(zip(r.us.tolist(), r.vs.tolist())) == [(2, 3)]
    assert r.set_loads == {frozenset({0, 1, 2}): 0}


def test_oracle_meter_accounting():
    s = EdgeStream(6, [0, 2, 4], [1, 3, 5])
    m = SpaceMeter(10_000)
    r = greedy_oracle_pass(s.begin_pass(), np.zeros(6), CARD, m)
    assert m.current_bytes == r.nbytes == 3 * 16
    r.release(m)
    assert m.current_bytes == 0
    with pytest.raises(BudgetExceeded):
        greedy_oracle_pass(s.begin_pass(), np.zeros(6), CARD, SpaceMeter(10))


def test_dual_length_checked():
    s = EdgeStream(3, [0], [1])
    with pytest.raises(ValueError):
        greedy_oracle_pass(s.begin_pass(), np.zeros(2), CARD)


def test_weight_class_examples():
    assert weight_class(1, 0.1) == 0
    for eps in (Fraction(1, 10), Fraction(1, 3), Fraction(1, 2)):
        assert weight_class(1 / (1 + eps), eps) == 1
        assert weight_class(1 / (1 + eps) + Fraction(1, 10**9), eps) == 0
    assert weight_class(0.5, 0.1) == math.floor(math.log(2) / math.log(1.1)) == 7
    assert weight_class(Fraction(1, 2), Fraction(1, 10)) == 7
    assert weight_class(1 / 1.1, 0.1) == 1
    with pytest.raises(ValueError):
        weight_class(0, 0.1)
    with pytest.raises(ValueError):
        weight_class(1.5, 0.1)


def test_weight_classes_table_and_cutoff():
    c = WeightClasses.for_graph(100, 0.1, scale=4.0)
    assert c.max_class == max_weight_class(100, 0.1) == math.ceil(math.log(1000) / math.log(1.1))
    assert c.lp_weight(4.0) == 1.0
    assert c.lp_weight(2.0) == pytest.approx(1.1 ** -7)
    assert c.lp_weight(4.0 * 1.1 ** -(c.max_class + 2)) == 0.0


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, 1.0), st.sampled_from([0.05, 0.1, 0.2, 0.5]))
def test_weight_class_float_agrees_with_kernel(w, eps):
    c = WeightClasses(eps, 10**6)
    i = weight_class(w, eps)
    assert c.lp_weight(w) == pytest.approx((1 + eps) ** -i, rel=1e-12)
    # the class weight lies in [w, (1+eps) w)
    assert (1 + eps) ** -i >= w * (1 - 1e-9)
    assert (1 + eps) ** -i < w * (1 + eps) * (1 + 1e-9)


def random_graph(rng, n, p, weighted):
    iu, iv = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    ws = np.round(rng.uniform(1e-4, 1.0, keep.sum()), 6) if weighted else None
    return EdgeStream(n, iu[keep], iv[keep], ws, order_seed=int(rng.integers(1 << 30)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 40), st.floats(0.05, 0.9), st.booleans(),
       st.sampled_from([1.0, 0.7]))
def test_oracle_maximal_admissible_and_width_one(seed, n, p, weighted, lam):
    rng = np.random.default_rng(seed)
    s = random_graph(rng, n, p, weighted)
    y = rng.uniform(0, 0.7, n)
    rule = AdmissibilityRule(lam=lam, mode="weighted" if weighted else "cardinality")
    classes = WeightClasses.for_graph(n, 0.1) if weighted else None
    r = greedy_oracle_pass(s.begin_pass(), y, rule, classes=classes)
    assert r.max_load <= 1
    chosen = set(zip(r.us.tolist(), r.vs.tolist()))
    matched = set(r.us.tolist()) | set(r.vs.tolist())
    for e in s.begin_pass():
        w = classes.lp_weight(e.w) if weighted else 1.0
        if w <= 0:
            assert (e.u, e.v) not in chosen
            continue
        ok = y[e.u] + y[e.v] <= lam * w
        if (e.u, e.v) in chosen:
            assert ok
        elif ok:
            assert e.u in matched or e.v in matched


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 30))
def test_raising_a_dual_never_admits_more_at_that_vertex(seed, n):
    rng = np.random.default_rng(seed)
    s = random_graph(rng, n, 0.4, False)
    y = rng.uniform(0, 0.8, n)
    v = int(rng.integers(n))
    y2 = y.copy()
    y2[v] += float(rng.uniform(0, 0.5))
    before = {(e.u, e.v) for e in s.begin_pass() if v in (e.u, e.v) and admissible(e, y, CARD)}
    after = {(e.u, e.v) for e in s.begin_pass() if v in (e.u, e.v) and admissible(e, y2, CARD)}
    assert after <= before


@pytest.mark.skipif(kernels.c_greedy_scan is None, reason="compiled kernel not built")
@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 60), st.booleans(), st.integers(1, 50))
def test_compiled_and_python_kernels_agree(seed, n, weighted, chunk):
    rng = np.random.default_rng(seed)
    s = random_graph(rng, n, 0.3, weighted)
    y = rng.uniform(0, 0.7, n) * (rng.random(n) < 0.7)
    classes = WeightClasses.for_graph(n, 0.1) if weighted else WeightClasses(0.1, 0)
    outs = []
    for scan in (kernels.py_greedy_scan, kernels.c_greedy_scan):
        matched = np.zeros(n, dtype=np.uint8)
        slots = n // 2 + 1
        ou, ov, ow = (np.empty(slots, np.int64), np.empty(slots, np.int64),
                      np.empty(slots, np.float64))
        count, best, adm = 0, math.inf, 0
        for bu, bv, bw in s.begin_pass().chunks(chunk):
            count, r, a = scan(bu, bv, bw, y, matched, ou, ov, ow, count, 1.0, weighted,
                               classes.scale, classes.log_base, classes.max_class, classes.table)
            best, adm = min(best, r), adm + a
        outs.append((ou[:count].tolist(), ov[:count].tolist(), ow[:count].tolist(), best, adm,
                     matched.tolist()))
    assert outs[0] == outs[1]


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.c_greedy_scan is not None:
        assert kernels.BACKEND == "cython" or kernels._force_py


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    code = ("from ssmatch import kernels, open_edge_stream, build_matching_lp, solve_fractional\n"
            "s = open_edge_stream('complete-bipartite:a=3,b=3')\n"
            "sol = solve_fractional(s, build_matching_lp(6, left=3))\n"
            "print(kernels.BACKEND, sol.stats.certificate_gap <= 0.1)")
    env = dict(os.environ, SSMATCH_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert r.stdout.split() == ["python", "True"]
