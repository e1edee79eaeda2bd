"""Rounding a small in-memory fractional matching to an integral one.

Bipartite route: threshold the support, cancel cycles until the support is a
forest, then take a maximum (weight) matching of the forest by tree DP; the
forest polytope is integral, so nothing is lost after thresholding.

General route: same, but odd cycles are broken by dropping their smallest
edge; odd-set feasibility of the input keeps that loss small.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Optional

from .lp import (CARDINALITY, FractionalMatching, Matching, MatchingLP, check_feasible,
                 edge_key)
from .stream import EDGE_RECORD_BYTES, SpaceMeter

log = logging.getLogger(__name__)

MODULE = "rounding"


class PreconditionFailed(ValueError):
    pass


class CyclicSupport(ValueError):
    pass


class RoundingInternalError(RuntimeError):
    pass


@dataclass
class SupportGraph:
    n: int
    x: dict = field(default_factory=dict)      # (u, v) -> value, u < v
    w: dict = field(default_factory=dict)      # (u, v) -> LP weight
    tau: float = 0.0
    loss: float = 0.0
    weighted: bool = False

    @property
    def value(self):
        return sum(self.w[k] * xv for k, xv in self.x.items())

    @property
    def vertices(self) -> set:
        return {a for k in self.x for a in k}

    def adjacency(self) -> dict:
        adj = defaultdict(dict)
        for (u, v), xv in self.x.items():
            adj[u][v] = xv
            adj[v][u] = xv
        return adj

    def loads(self) -> dict:
        out: dict = defaultdict(float)
        for (u, v), xv in self.x.items():
            out[u] += xv
            out[v] += xv
        return out

    def is_forest(self) -> bool:
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in self.x:
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def copy(self) -> "SupportGraph":
        return SupportGraph(self.n, dict(self.x), dict(self.w), self.tau, self.loss, self.weighted)


def extract_support(x: FractionalMatching, tau: float = 0.0,
                    meter: Optional[SpaceMeter] = None) -> SupportGraph:
    """Keep entries with ``x_e >= tau``; ``loss`` reports the dropped mass."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    s = SupportGraph(x.n, tau=tau, weighted=any(w != 1 for w in x.w.values()))
    loss = 0
    for k, xv in sorted(x.items()):
        if xv >= tau and xv > 0:
            if meter is not None:
                meter.charge(EDGE_RECORD_BYTES, MODULE)
            s.x[k] = xv
            s.w[k] = x.w[k]
        else:
            loss += xv
    s.loss = loss
    return s


# ---------------------------------------------------------------------------
# cycle cancelling on an incrementally grown forest


def _forest_path(adj: dict, src: int, dst: int) -> Optional[list]:
    if src not in adj or dst not in adj:
        return None
    prev = {src: None}
    q = deque([src])
    while q:
        a = q.popleft()
        if a == dst:
            break
        for b in adj[a]:
            if b not in prev:
                prev[b] = a
                q.append(b)
    if dst not in prev:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _link(adj, u, v):
    adj.setdefault(u, set()).add(v)
    adj.setdefault(v, set()).add(u)


def _cut(adj, u, v):
    adj[u].discard(v)
    adj[v].discard(u)


def _cancel(xs: dict, ws: dict, on_odd: str, stats: dict) -> None:
    """Turn the support of ``xs`` into a forest in place.

    Even cycles are cancelled by alternating +/- delta in the direction that
    does not lower the objective; every vertex on the cycle keeps its load.
    Odd cycles raise (``on_odd="error"``) or lose their smallest edge
    (``on_odd="drop"``, ties broken by the lexicographically smallest edge).
    """
    adj: dict = {}
    for key in sorted(xs):
        if key not in xs:
            continue
        u, v = key
        path = _forest_path(adj, u, v)
        if path is None:
            _link(adj, u, v)
            continue
        cyc = [edge_key(path[i], path[i + 1]) for i in range(len(path) - 1)] + [key]
        if len(cyc) % 2 == 1:
            if on_odd == "error":
                raise RoundingInternalError(
                    f"odd cycle of length {len(cyc)} in a support declared bipartite")
            victim = min(cyc, key=lambda k: (xs[k], k))
            stats["odd_drop_loss"] = stats.get("odd_drop_loss", 0) + ws[victim] * xs[victim]
            stats["odd_cycles"] = stats.get("odd_cycles", 0) + 1
            del xs[victim]
            if victim != key:
                _cut(adj, *victim)
                _link(adj, u, v)
            continue
        # cyc[-1] is the new edge; signs alternate around the cycle, new edge '+'
        signs = [1 if (len(cyc) - 1 - i) % 2 == 0 else -1 for i in range(len(cyc))]
        gain = sum(s * ws[k] for s, k in zip(signs, cyc))
        if gain < 0:
            signs = [-s for s in signs]
            gain = -gain
        before = sum(ws[k] * xs[k] for k in cyc)
        minus = [k for s, k in zip(signs, cyc) if s < 0]
        delta = min(xs[k] for k in minus)
        zeroed = [k for k in minus if xs[k] == delta]
        for s, k in zip(signs, cyc):
            xs[k] = xs[k] + delta if s > 0 else xs[k] - delta
        for k in zeroed:
            del xs[k]
            if k != key:
                _cut(adj, *k)
        after = sum(ws[k] * xs.get(k, 0) for k in cyc)
        if after < before - 1e-9 * max(1.0, abs(before)):
            raise RoundingInternalError("cycle cancellation decreased the objective")
        stats["cycles"] = stats.get("cycles", 0) + 1
        if key in xs:
            _link(adj, u, v)


def cancel_cycles_bipartite(s: SupportGraph, stats: Optional[dict] = None) -> SupportGraph:
    """Return a forest-supported copy of ``s`` with the same loads and a
    non-decreasing objective."""
    out = s.copy()
    st = stats if stats is not None else {}
    _cancel(out.x, out.w, "error", st)
    return out


def cancel_cycles_inplace(x: FractionalMatching, on_odd: str = "error") -> dict:
    """Cycle-cancel a metered :class:`FractionalMatching` in place (support compaction)."""
    before = len(x.x)
    st: dict = {}
    _cancel(x.x, x.w, on_odd, st)
    for k in [k for k in x.w if k not in x.x]:
        del x.w[k]
    if x._meter is not None:
        x._meter.release(EDGE_RECORD_BYTES * (before - len(x.x)), x._module)
    x.recompute_value()
    return st


# ---------------------------------------------------------------------------
# forest DP


def round_forest(s: SupportGraph, weighted: Optional[bool] = None) -> Matching:
    """Maximum-weight (or -cardinality) matching of an acyclic support.

    Raises :class:`CyclicSupport` if the support contains a cycle.
    """
    if not s.is_forest():
        raise CyclicSupport("round_forest needs an acyclic support")
    weighted = s.weighted if weighted is None else weighted
    adj = defaultdict(list)
    for (u, v) in sorted(s.x):
        wt = s.w[(u, v)] if weighted else 1
        adj[u].append((v, wt))
        adj[v].append((u, wt))
    free: dict = {}    # best value in subtree with the root left unmatched
    best: dict = {}    # best value in subtree
    pick: dict = {}    # child matched to the root in the `best` solution (or None)
    visited = set()
    chosen = []
    for r in sorted(adj):
        if r in visited:
            continue
        order = []
        parent = {r: None}
        stack = [r]
        visited.add(r)
        while stack:
            a = stack.pop()
            order.append(a)
            for b, _ in adj[a]:
                if b not in visited:
                    visited.add(b)
                    parent[b] = a
                    stack.append(b)
        for a in reversed(order):
            kids = [(b, wt) for b, wt in adj[a] if parent.get(b) == a]
            base = sum(best[b] for b, _ in kids)
            free[a] = base
            top, arg = base, None
            for b, wt in kids:
                cand = base - best[b] + free[b] + wt
                if cand > top:
                    top, arg = cand, b
            best[a] = top
            pick[a] = arg
        # top-down: a child matched to its parent must stay free below
        stack = [(r, False)]
        while stack:
            a, taken = stack.pop()
            mate = None if taken else pick[a]
            if mate is not None:
                chosen.append(edge_key(a, mate))
            for b, _ in adj[a]:
                if parent.get(b) == a:
                    stack.append((b, b == mate))
    edges = sorted(chosen)
    M = Matching(edges=edges, weights=[s.w[k] for k in edges])
    if not weighted:
        value = sum(s.x.values())
        if M.size < math.ceil(value - 1e-6) and _loads_ok(s):
            raise RoundingInternalError(f"forest rounding gave {M.size} < {value}")
    return M


def _loads_ok(s: SupportGraph, tol: float = 1e-9) -> bool:
    return all(l <= 1 + tol for l in s.loads().values())


# ---------------------------------------------------------------------------


@dataclass
class RoundingReport:
    input_value: float = 0.0
    threshold_loss: float = 0.0
    odd_drop_loss: float = 0.0
    forest_value: float = 0.0
    matching_value: float = 0.0
    cycles_cancelled: int = 0
    odd_cycles: int = 0
    greedy_extension: int = 0

    @property
    def total_loss(self) -> float:
        return max(0.0, self.input_value - self.matching_value)


def default_tau(lp: MatchingLP) -> float:
    return lp.eps / (4 * lp.n)


def round_general(x: FractionalMatching, lp: MatchingLP, tau: Optional[float] = None,
                  meter: Optional[SpaceMeter] = None, report: Optional[RoundingReport] = None,
                  tol: float = 1e-9) -> Matching:
    """Round an odd-set-feasible fractional matching of a general graph."""
    violations = check_feasible(x, lp, tol=tol)
    if violations:
        v = violations[0]
        raise PreconditionFailed(
            f"input violates {len(violations)} constraint(s), e.g. {v.kind} {sorted(v.where) if isinstance(v.where, frozenset) else v.where}: "
            f"{float(v.load):.6g} > {v.capacity}")
    rep = report if report is not None else RoundingReport()
    tau = default_tau(lp) if tau is None else tau
    s = extract_support(x, tau, meter)
    rep.input_value = float(x.recompute_value())
    rep.threshold_loss = float(sum(x.w[k] * xv for k, xv in x.items() if k not in s.x))
    st: dict = {}
    forest = s.copy()
    _cancel(forest.x, forest.w, "drop", st)
    rep.cycles_cancelled = st.get("cycles", 0)
    rep.odd_cycles = st.get("odd_cycles", 0)
    rep.odd_drop_loss = float(st.get("odd_drop_loss", 0))
    rep.forest_value = float(forest.value)
    M = round_forest(forest, weighted=lp.weighted)
    # support edges lost to thresholds or odd cycles can still be added greedily
    used = {a for e in M.edges for a in e}
    rest = sorted((k for k in s.x if k not in set(M.edges)), key=lambda k: (-s.w[k], -s.x[k], k))
    for u, v in rest:
        if u not in used and v not in used:
            M.edges.append((u, v))
            M.weights.append(s.w[(u, v)])
            used.update((u, v))
            rep.greedy_extension += 1
    rep.matching_value = float(M.weight if lp.weighted else M.size)
    if meter is not None:
        meter.release(EDGE_RECORD_BYTES * len(s.x), MODULE)
    _log_chain(rep)
    return M


def round_bipartite(x: FractionalMatching, lp: MatchingLP, tau: Optional[float] = None,
                    meter: Optional[SpaceMeter] = None,
                    report: Optional[RoundingReport] = None) -> Matching:
    rep = report if report is not None else RoundingReport()
    tau = default_tau(lp) if tau is None else tau
    s = extract_support(x, tau, meter)
    rep.input_value = float(x.recompute_value())
    rep.threshold_loss = float(sum(x.w[k] * xv for k, xv in x.items() if k not in s.x))
    st: dict = {}
    forest = cancel_cycles_bipartite(s, st)
    rep.cycles_cancelled = st.get("cycles", 0)
    rep.forest_value = float(forest.value)
    M = round_forest(forest, weighted=lp.weighted)
    rep.matching_value = float(M.weight if lp.weighted else M.size)
    if meter is not None:
        meter.release(EDGE_RECORD_BYTES * len(s.x), MODULE)
    _log_chain(rep)
    return M


def round_matching(x: FractionalMatching, lp: MatchingLP, tau: Optional[float] = None,
                   meter: Optional[SpaceMeter] = None) -> tuple[Matching, RoundingReport]:
    rep = RoundingReport()
    if lp.general:
        M = round_general(x, lp, tau, meter, rep)
    else:
        M = round_bipartite(x, lp, tau, meter, rep)
    return M, rep


def _log_chain(rep: RoundingReport) -> None:
    log.debug("rounding: in=%.6g threshold_loss=%.3g odd_drop=%.3g forest=%.6g out=%.6g",
              rep.input_value, rep.threshold_loss, rep.odd_drop_loss, rep.forest_value,
              rep.matching_value)
