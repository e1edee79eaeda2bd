"""Exact offline matching baselines.

These are test oracles only: they load the whole graph into memory and are
never charged to a space meter.  Nothing under the streaming pipeline
(``stream``, ``lp``, ``oracles``, ``mwu``, ``rounding``) imports this module.
"""

from __future__ import annotations

import heapq
from collections import defaultdict, deque
from fractions import Fraction
from typing import Optional, Sequence

from .lp import CARDINALITY, Matching, canonical_mode, edge_key


class NotBipartite(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


def _split(edges) -> tuple[list, list]:
    pairs, ws = [], []
    for e in edges:
        pairs.append((int(e[0]), int(e[1])))
        ws.append(e[2] if len(e) > 2 else 1)
    return pairs, ws


def two_coloring(n: int, pairs: Sequence[tuple[int, int]]) -> list[int]:
    """Side (0/1) per vertex; raises :class:`NotBipartite` on an odd cycle."""
    adj = defaultdict(list)
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    side = [-1] * n
    for s in range(n):
        if side[s] != -1:
            continue
        side[s] = 0
        q = deque([s])
        while q:
            a = q.popleft()
            for b in adj[a]:
                if side[b] == -1:
                    side[b] = 1 - side[a]
                    q.append(b)
                elif side[b] == side[a]:
                    raise NotBipartite(f"odd cycle through edge ({a}, {b})")
    return side


def _sides(n: int, pairs, left: Optional[int]) -> list[int]:
    if left is None:
        return two_coloring(n, pairs)
    side = [0 if v < left else 1 for v in range(n)]
    for u, v in pairs:
        if side[u] == side[v]:
            raise NotBipartite(f"edge ({u}, {v}) inside one side of the declared bipartition")
    return side


def hopcroft_karp(n: int, edges, left: Optional[int] = None) -> Matching:
    """Maximum-cardinality matching of a bipartite graph, O(m sqrt(n))."""
    pairs, _ = _split(edges)
    side = _sides(n, pairs, left)
    adj = defaultdict(list)
    for u, v in pairs:
        a, b = (u, v) if side[u] == 0 else (v, u)
        adj[a].append(b)
    lefts = [v for v in range(n) if side[v] == 0]
    mate = [-1] * n
    INF = n + 1
    dist = [INF] * n

    def bfs() -> bool:
        q = deque()
        for a in lefts:
            if mate[a] == -1:
                dist[a] = 0
                q.append(a)
            else:
                dist[a] = INF
        found = False
        while q:
            a = q.popleft()
            for b in adj[a]:
                c = mate[b]
                if c == -1:
                    found = True
                elif dist[c] == INF:
                    dist[c] = dist[a] + 1
                    q.append(c)
        return found

    def dfs(root: int) -> bool:
        # iterative layered DFS; stack holds (left vertex, next neighbour index)
        stack = [[root, 0]]
        path = []
        while stack:
            top = stack[-1]
            a, i = top
            if i >= len(adj[a]):
                dist[a] = INF
                stack.pop()
                if path:
                    path.pop()
                continue
            top[1] += 1
            b = adj[a][i]
            c = mate[b]
            if c == -1:
                path.append((a, b))
                for x, y in path:
                    mate[x] = y
                    mate[y] = x
                return True
            if dist[c] == dist[a] + 1:
                path.append((a, b))
                stack.append([c, 0])
        return False

    while bfs():
        for a in lefts:
            if mate[a] == -1:
                dfs(a)
    out = sorted(edge_key(a, mate[a]) for a in lefts if mate[a] != -1)
    return Matching(edges=out, weights=[1] * len(out))


def max_weight_bipartite(n: int, edges, left: Optional[int] = None) -> Matching:
    """Maximum-weight (not necessarily perfect) bipartite matching by
    successive shortest augmenting paths with node potentials.

    Arithmetic follows the weight type, so ``Fraction`` weights give exact results.
    """
    pairs, ws = _split(edges)
    for w in ws:
        if w < 0:
            raise ValueError(f"negative weight {w}")
    side = _sides(n, pairs, left)
    best: dict = {}
    for (u, v), w in zip(pairs, ws):
        a, b = (u, v) if side[u] == 0 else (v, u)
        if (a, b) not in best or w > best[(a, b)]:
            best[(a, b)] = w
    out_arcs = defaultdict(list)
    for (a, b), w in best.items():
        out_arcs[a].append((b, w))
    lefts = [v for v in range(n) if side[v] == 0]
    rights = [v for v in range(n) if side[v] == 1]
    mate = [-1] * n
    zero = 0 * (ws[0] if ws else 0)
    S, T = n, n + 1
    pot = [zero] * (n + 2)
    for (a, b), w in best.items():
        if -w < pot[b]:
            pot[b] = -w
    pot[T] = min((pot[b] for b in rights), default=zero)

    def arcs(node):
        if node == S:
            for a in lefts:
                if mate[a] == -1:
                    yield a, zero
        elif side[node] == 0:
            for b, w in out_arcs[node]:
                if mate[node] != b:
                    yield b, -w
        elif mate[node] == -1:
            yield T, zero
        else:
            a = mate[node]
            yield a, best[(a, node)]

    while True:
        dist: dict = {S: zero}
        prev: dict = {}
        heap = [(zero, 0, S)]
        tick = 1
        done = set()
        while heap:
            d, _, node = heapq.heappop(heap)
            if node in done:
                continue
            done.add(node)
            if node == T:
                continue
            for nxt, c in arcs(node):
                nd = d + c + pot[node] - pot[nxt]
                if nxt not in dist or nd < dist[nxt]:
                    dist[nxt] = nd
                    prev[nxt] = node
                    heapq.heappush(heap, (nd, tick, nxt))
                    tick += 1
        if T not in dist:
            break
        true_cost = dist[T] + pot[T] - pot[S]
        if true_cost >= 0:
            break
        dT = dist[T]
        for node in range(n + 2):
            pot[node] += min(dist[node], dT) if node in dist else dT
        # augment along prev pointers: S -> a -> b -> a' -> ... -> b_last -> T
        node = prev[T]
        while node != S:
            p = prev[node]
            if side[node] == 1 and p != S:
                mate[node] = p
                mate[p] = node
            node = p
    chosen = sorted((edge_key(a, mate[a]), best[(a, mate[a])]) for a in lefts if mate[a] != -1)
    return Matching(edges=[k for k, _ in chosen], weights=[w for _, w in chosen])


def brute_force_max_matching(n: int, edges, mode: str = CARDINALITY) -> Matching:
    """Exhaustive optimum: DP over vertex subsets (n <= 22) or edge branching (m <= 24)."""
    mode = canonical_mode(mode)
    pairs, ws = _split(edges)
    wt: dict = {}
    for (u, v), w in zip(pairs, ws):
        k = edge_key(u, v)
        w = 1 if mode == CARDINALITY else w
        if k not in wt or w > wt[k]:
            wt[k] = w
    if n <= 22:
        return _mask_dp(n, wt)
    if len(wt) <= 24:
        return _edge_branch(wt)
    raise InstanceTooLarge(f"brute force needs n <= 22 or m <= 24 (n={n}, m={len(wt)})")


def _mask_dp(n: int, wt: dict) -> Matching:
    nbr = defaultdict(list)
    for (u, v), w in wt.items():
        nbr[u].append((v, w))
        nbr[v].append((u, w))
    memo: dict = {}
    active = 0
    for u, v in wt:
        active |= 1 << u | 1 << v

    def best(mask: int):
        if mask == 0:
            return 0, ()
        if mask in memo:
            return memo[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        top = best(rest)
        for j, w in nbr[i]:
            if rest >> j & 1:
                val, chosen = best(rest & ~(1 << j))
                if val + w > top[0]:
                    top = (val + w, chosen + (edge_key(i, j),))
        memo[mask] = top
        return top

    _, chosen = best(active)
    edges = sorted(chosen)
    return Matching(edges=edges, weights=[wt[k] for k in edges])


def _edge_branch(wt: dict) -> Matching:
    keys = sorted(wt)
    best_val = [0]
    best_set: list = [()]

    def go(i: int, used: frozenset, val, chosen: tuple):
        if val > best_val[0]:
            best_val[0] = val
            best_set[0] = chosen
        for j in range(i, len(keys)):
            u, v = keys[j]
            if u not in used and v not in used:
                go(j + 1, used | {u, v}, val + wt[keys[j]], chosen + (keys[j],))

    go(0, frozenset(), 0, ())
    edges = sorted(best_set[0])
    return Matching(edges=edges, weights=[wt[k] for k in edges])


def fractional_lp_opt(n: int, edges, degree_only: bool = True) -> Fraction:
    """Exact optimum of the cardinality matching LP.

    ``degree_only``: half the maximum matching of the bipartite double cover.
    Otherwise the graph must be bipartite and the LP is integral.
    """
    pairs, _ = _split(edges)
    if degree_only:
        cover = []
        for u, v in pairs:
            cover.append((u, n + v))
            cover.append((v, n + u))
        return Fraction(hopcroft_karp(2 * n, cover, left=n).size, 2)
    try:
        two_coloring(n, pairs)
    except NotBipartite:
        raise ValueError("full matching LP optimum is only computed for bipartite graphs") from None
    return Fraction(hopcroft_karp(n, pairs).size)


def load_graph(stream) -> tuple[int, list, Optional[int]]:
    """Materialize a stream (or path) as ``(n, [(u, v, w)], left)``; test use only."""
    from .stream import open_edge_stream

    if not hasattr(stream, "begin_pass"):
        stream = open_edge_stream(stream)
    edges = [(e.u, e.v, e.w) for e in stream.begin_pass()]
    return stream.n, edges, stream.left
