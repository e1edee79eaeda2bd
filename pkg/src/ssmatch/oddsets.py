"""Odd-set separation on an in-memory support graph.

Only vertex sets that are connected in the support can be maximally violated
(a disconnected violated odd set always contains a violated odd component
when degree constraints hold), so the search enumerates connected subsets
with the ESU scheme: every connected set is produced exactly once, rooted at
its smallest vertex.
"""

from __future__ import annotations

from collections import defaultdict


class OddSetSearchError(RuntimeError):
    """Raised when the candidate count exceeds the configured cap."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


def _support_adjacency(x) -> dict[int, dict[int, float]]:
    adj: dict[int, dict[int, float]] = defaultdict(dict)
    items = x.items() if hasattr(x, "items") else x
    for (u, v), xv in items:
        if xv == 0:
            continue
        adj[u][v] = adj[u].get(v, 0) + xv
        adj[v][u] = adj[v].get(u, 0) + xv
    return adj


def _sort_sets(sets):
    return sorted(sets, key=lambda U: (len(U), sorted(U)))


def enumerate_violated_odd_sets(x, k_max: int, tol: float = 1e-9,
                                cap: int = 2_000_000) -> list[frozenset]:
    """All odd ``U`` with ``3 <= |U| <= k_max``, connected in the support of
    ``x``, and ``x(E(U)) > (|U| - 1)/2 + tol``.

    ``x`` is a :class:`~ssmatch.lp.FractionalMatching` or any mapping
    ``(u, v) -> value``.  Raises :class:`OddSetSearchError` once more than
    ``cap`` connected subsets have been examined.

    Pruning: ``x(E(U)) = (sum_U load - x(delta(U))) / 2``, so a violated set
    has ``sum_U (1 - load) + x(delta(U)) < 1``.  For a partial set ``S`` that
    quantity is bounded below by its own deficiency plus the part of its cut
    that the at most ``k_max - |S|`` vertices still to be added cannot absorb;
    branches whose bound reaches 1 hold no violated set.
    """
    if k_max < 3 or k_max % 2 == 0:
        raise ValueError(f"k_max={k_max} must be odd and >= 3")
    adj = _support_adjacency(x)
    deficit = {v: 1.0 - sum(nb.values()) for v, nb in adj.items()}
    # overloaded vertices (infeasible x) could lower the bound when added later
    neg = sorted(d for d in deficit.values() if d < 0)
    neg_prefix = [0.0]
    for d in neg[:k_max]:
        neg_prefix.append(neg_prefix[-1] + d)
    neg_prefix += [neg_prefix[-1]] * (k_max + 1 - len(neg_prefix))
    found: list[frozenset] = []
    examined = 0

    def hopeless(k: int, deficit_sum: float, attach: dict[int, float]) -> bool:
        room = k_max - k
        cut = sum(attach.values())
        if room:
            cut -= sum(sorted(attach.values(), reverse=True)[:room])
        return deficit_sum + cut + neg_prefix[room] >= 1.0 - tol

    def extend(sub: list[int], closed: set[int], ext: list[int], load: float,
               deficit_sum: float, attach: dict[int, float], root: int) -> None:
        nonlocal examined
        examined += 1
        if examined > cap:
            raise OddSetSearchError(
                f"odd-set search exceeded {cap} candidate sets", _sort_sets(found))
        k = len(sub)
        if k >= 3 and k % 2 == 1 and load > (k - 1) / 2 + tol:
            found.append(frozenset(sub))
        if k == k_max or hopeless(k, deficit_sum, attach):
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            nw = adj[w]
            new_ext = ext + [u for u in nw if u > root and u not in closed]
            add = attach.get(w, 0.0)
            nxt = dict(attach)
            nxt.pop(w, None)
            for u, xv in nw.items():
                if u not in sub_set:
                    nxt[u] = nxt.get(u, 0.0) + xv
            sub.append(w)
            sub_set.add(w)
            extend(sub, closed | nw.keys(), new_ext, load + add, deficit_sum + deficit[w],
                   nxt, root)
            sub_set.discard(w)
            sub.pop()

    sub_set: set[int] = set()
    for root in sorted(adj):
        nbrs = adj[root]
        closed = {root} | nbrs.keys()
        sub_set.add(root)
        extend([root], closed, [u for u in nbrs if u > root], 0.0, deficit[root],
               dict(nbrs), root)
        sub_set.discard(root)
    return _sort_sets(found)


def brute_force_violated_odd_sets(x, n: int, k_max: int, tol: float = 1e-9,
                                  connected_only: bool = True) -> list[frozenset]:
    """Reference separation over all ``2**n`` vertex subsets (test oracle)."""
    edges = [((u, v), xv) for (u, v), xv in (x.items() if hasattr(x, "items") else x) if xv != 0]
    out = []
    for mask in range(1, 1 << n):
        k = bin(mask).count("1")
        if k < 3 or k % 2 == 0 or k > k_max:
            continue
        load = 0
        for (u, v), xv in edges:
            if mask >> u & 1 and mask >> v & 1:
                load += xv
        if load <= (k - 1) / 2 + tol:
            continue
        U = frozenset(i for i in range(n) if mask >> i & 1)
        if connected_only and not _connected(U, edges):
            continue
        out.append(U)
    return _sort_sets(out)


def _connected(U: frozenset, edges) -> bool:
    nb = defaultdict(set)
    for (u, v), _ in edges:
        if u in U and v in U:
            nb[u].add(v)
            nb[v].add(u)
    start = next(iter(U))
    seen = {start}
    stack = [start]
    while stack:
        a = stack.pop()
        for b in nb[a]:
            if b not in seen:
                seen.add(b)
                stack.append(b)
    return len(seen) == len(U)
