"""One-pass streaming oracles for the multiplicative-weights solver.

An oracle call consumes exactly one pass and returns a matching that is
maximal among the dual-admissible edges, in stream order.  Because the
answer is a matching, every vertex load is 0 or 1 (width 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import kernels
from .lp import CARDINALITY, WEIGHTED, FractionalMatching, canonical_mode
from .oddsets import OddSetSearchError, enumerate_violated_odd_sets  # noqa: F401  (re-export)
from .stream import EDGE_RECORD_BYTES, FLAG_BYTES, Edge, PassCursor, SpaceMeter

MODULE = "stream_oracles"


class WidthViolation(RuntimeError):
    def __init__(self, oracle: str, load: float, rho: float):
        super().__init__(f"oracle {oracle!r} produced load {load} > width bound {rho}")
        self.oracle = oracle
        self.load = load
        self.rho = rho


@dataclass(frozen=True)
class AdmissibilityRule:
    lam: float = 1.0
    mode: str = CARDINALITY
    eps: float = 0.1

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError(f"admissibility threshold {self.lam} not in (0, 1]")
        object.__setattr__(self, "mode", canonical_mode(self.mode))

    @property
    def class_base(self) -> float:
        return 1 + self.eps


def admissible(e: Edge, y, rule: AdmissibilityRule, surcharge: float = 0.0) -> bool:
    """``y_u + y_v (+ odd-set surcharge) <= lam`` (times ``w_e`` when weighted)."""
    cost = y[e.u] + y[e.v] + surcharge
    if rule.mode == WEIGHTED:
        return cost <= rule.lam * e.w
    return cost <= rule.lam


# ---------------------------------------------------------------------------
# weight classes


def weight_class(w, eps) -> int:
    """``floor(log_{1+eps}(1/w))`` for ``w`` in ``(0, 1]``.

    Rational inputs are classified exactly; floats use the same slack as the
    scan kernels so both agree on every edge.
    """
    if w <= 0:
        raise ValueError(f"weight class undefined for w={w}")
    if w > 1:
        raise ValueError(f"weight {w} not normalized to (0, 1]")
    if isinstance(w, (Fraction, int)) and isinstance(eps, (Fraction, int)):
        base = 1 + Fraction(eps)
        inv = 1 / Fraction(w)
        i = 0
        p = base
        while p <= inv:
            i += 1
            p *= base
        return i
    return max(0, int(math.floor(math.log(1.0 / float(w)) / math.log1p(float(eps))
                                 + kernels._pykernel.CLASS_SLACK)))


def max_weight_class(n: int, eps: float) -> int:
    """Classes above ``ceil(log_{1+eps}(n/eps))`` carry negligible weight."""
    return int(math.ceil(math.log(max(n, 1) / eps) / math.log1p(eps)))


@dataclass(frozen=True)
class WeightClasses:
    eps: float
    max_class: int
    scale: float = 1.0

    @classmethod
    def for_graph(cls, n: int, eps: float, scale: float = 1.0) -> "WeightClasses":
        return cls(eps, max_weight_class(n, eps), scale)

    @property
    def log_base(self) -> float:
        return math.log1p(self.eps)

    @property
    def table(self) -> np.ndarray:
        return (1.0 + self.eps) ** -np.arange(self.max_class + 1, dtype=np.float64)

    def lp_weight(self, w: float) -> float:
        """Rounded, normalized LP weight of a raw stream weight (0 = dropped)."""
        return float(kernels.lp_weights(np.array([w]), self.scale, self.log_base,
                                        self.max_class, self.table)[0])


# ---------------------------------------------------------------------------


@dataclass
class OracleResult:
    n: int
    us: np.ndarray
    vs: np.ndarray
    ws: np.ndarray
    threshold: float
    min_ratio: float
    edges_seen: int = 0
    admissible_count: int = 0
    oracle: str = "greedy"
    set_loads: dict = field(default_factory=dict)
    nbytes: int = 0

    @property
    def size(self) -> int:
        return len(self.us)

    @property
    def weight(self) -> float:
        return float(self.ws.sum())

    @property
    def loads(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for a in (self.us, self.vs):
            for v in a.tolist():
                out[v] = out.get(v, 0) + 1
        return out

    @property
    def max_load(self) -> int:
        return max(self.loads.values(), default=0)

    @property
    def candidate(self) -> FractionalMatching:
        fm = FractionalMatching(self.n)
        for u, v, w in zip(self.us.tolist(), self.vs.tolist(), self.ws.tolist()):
            fm.add(u, v, 1, w)
        return fm

    def release(self, meter: Optional[SpaceMeter]) -> None:
        if meter is not None and self.nbytes:
            meter.release(self.nbytes, MODULE)
        self.nbytes = 0


def _as_dual_vector(duals, scale: float) -> np.ndarray:
    w = duals.weights if hasattr(duals, "weights") else duals
    return np.ascontiguousarray(np.asarray(w, dtype=np.float64) * scale)


def greedy_oracle_pass(cursor: PassCursor, duals, rule: AdmissibilityRule,
                       meter: Optional[SpaceMeter] = None, *, scale: float = 1.0,
                       classes: Optional[WeightClasses] = None,
                       set_duals: Optional[dict] = None,
                       oracle: str = "greedy") -> OracleResult:
    """Greedy maximal admissible matching over one full pass.

    ``duals`` is a :class:`~ssmatch.lp.DualState` or a raw vector; the
    admissibility test uses ``y = duals * scale``.  ``set_duals`` maps odd
    vertex sets to raw weights, folded into each edge's reduced cost (scaled
    the same way).  In weighted mode ``classes`` supplies the normalization
    and class rounding applied to stream weights.
    """
    n = cursor.n
    y = _as_dual_vector(duals, scale)
    if len(y) != n:
        raise ValueError(f"dual vector has length {len(y)}, stream has n={n}")
    weighted = rule.mode == WEIGHTED
    if weighted and classes is None:
        classes = WeightClasses.for_graph(n, rule.eps)
    if classes is None:
        classes = WeightClasses(rule.eps, 0)
    slots = n // 2 + 1
    flag_bytes = FLAG_BYTES * n
    buf_bytes = EDGE_RECORD_BYTES * slots
    if meter is not None:
        meter.charge(flag_bytes + buf_bytes, MODULE)
    matched = np.zeros(n, dtype=np.uint8)
    out_u = np.empty(slots, dtype=np.int64)
    out_v = np.empty(slots, dtype=np.int64)
    out_w = np.empty(slots, dtype=np.float64)
    count = 0
    min_ratio = math.inf
    n_adm = 0
    seen = 0
    table = classes.table
    active_sets = {U: z for U, z in (set_duals or {}).items() if z > 0}
    try:
        if not active_sets:
            scan = kernels.greedy_scan
            for bu, bv, bw in cursor.chunks():
                seen += len(bu)
                count, r, a = scan(bu, bv, bw, y, matched, out_u, out_v, out_w, count,
                                   rule.lam, weighted, classes.scale, classes.log_base,
                                   classes.max_class, table)
                n_adm += a
                if r < min_ratio:
                    min_ratio = r
        else:
            count, min_ratio, n_adm, seen = _surcharged_scan(
                cursor, y, scale, active_sets, matched, out_u, out_v, out_w,
                rule, weighted, classes, table)
    except BaseException:
        if meter is not None:
            meter.release(flag_bytes + buf_bytes, MODULE)
        raise
    if meter is not None:
        meter.release(flag_bytes + EDGE_RECORD_BYTES * (slots - count), MODULE)
    res = OracleResult(n, out_u[:count].copy(), out_v[:count].copy(), out_w[:count].copy(),
                       threshold=rule.lam, min_ratio=float(min_ratio), edges_seen=seen,
                       admissible_count=int(n_adm), oracle=oracle,
                       nbytes=EDGE_RECORD_BYTES * count)
    if set_duals:
        res.set_loads = matching_set_loads(res.us, res.vs, set_duals)
    return res


def _surcharged_scan(cursor, y, scale, sets, matched, out_u, out_v, out_w, rule,
                     weighted, classes, table):
    # vertex -> bitmask over tracked sets; surcharge of (u, v) sums sets containing both
    set_list = list(sets.items())
    member = [0] * cursor.n
    for j, (U, _) in enumerate(set_list):
        for a in U:
            member[a] |= 1 << j
    zs = [z * scale for _, z in set_list]
    count = 0
    min_ratio = math.inf
    n_adm = 0
    seen = 0
    lam = rule.lam
    for bu, bv, bw in cursor.chunks():
        seen += len(bu)
        if weighted:
            wts = kernels.lp_weights(bw, classes.scale, classes.log_base, classes.max_class, table)
        else:
            wts = np.ones(len(bu))
        for u, v, wt in zip(bu.tolist(), bv.tolist(), wts.tolist()):
            if wt <= 0:
                continue
            c = y[u] + y[v]
            common = member[u] & member[v]
            while common:
                low = common & -common
                c += zs[low.bit_length() - 1]
                common ^= low
            c /= wt
            if c < min_ratio:
                min_ratio = c
            if c <= lam:
                n_adm += 1
                if not matched[u] and not matched[v]:
                    matched[u] = matched[v] = 1
                    out_u[count] = u
                    out_v[count] = v
                    out_w[count] = wt
                    count += 1
    return count, min_ratio, n_adm, seen


def matching_set_loads(us, vs, sets) -> dict:
    out = {}
    for U in sets:
        k = 0
        for u, v in zip(us.tolist(), vs.tolist()):
            if u in U and v in U:
                k += 1
        out[U] = k
    return out
