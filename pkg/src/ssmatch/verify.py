"""Checking an output matching against the stream it came from."""

from __future__ import annotations

from typing import Optional

from .lp import Matching, edge_key
from .stream import EDGE_RECORD_BYTES, EdgeStream, RunStats, SpaceMeter


class DisjointnessError(ValueError):
    def __init__(self, vertex: int):
        super().__init__(f"matching uses vertex {vertex} more than once")
        self.vertex = vertex


def verify_matching_stream(stream: EdgeStream, M: Matching, meter: Optional[SpaceMeter] = None,
                           stats: Optional[RunStats] = None) -> bool:
    """True iff every edge of ``M`` occurs in ``stream`` (one pass, O(|M|) space).

    Vertex-disjointness is checked first, in memory, and raises
    :class:`DisjointnessError`.
    """
    bad = M.shared_vertex()
    if bad is not None:
        raise DisjointnessError(bad)
    for u, v in M.edges:
        if u == v:
            raise DisjointnessError(u)
    want = {edge_key(u, v) for u, v in M.edges}
    if meter is not None:
        meter.charge(EDGE_RECORD_BYTES * len(want), "verify")
    try:
        found = set()
        for e in stream.begin_pass(stats):
            k = edge_key(e.u, e.v)
            if k in want:
                found.add(k)
        return found == want
    finally:
        if meter is not None:
            meter.release(EDGE_RECORD_BYTES * len(want), "verify")


def stream_matching_weight(stream: EdgeStream, M: Matching, stats: Optional[RunStats] = None) -> float:
    """True weight of ``M``: the heaviest stream copy of each matched pair (one pass)."""
    want = {edge_key(u, v): None for u, v in M.edges}
    for bu, bv, bw in stream.begin_pass(stats).chunks():
        for u, v, w in zip(bu.tolist(), bv.tolist(), bw.tolist()):
            k = (u, v) if u < v else (v, u)
            if k in want and (want[k] is None or w > want[k]):
                want[k] = w
    missing = [k for k, w in want.items() if w is None]
    if missing:
        raise ValueError(f"matching edge {missing[0]} not in stream")
    return float(sum(want.values()))
