"""The matching LP family: descriptors, primal/dual value types and the
feasibility arithmetic shared by solver, rounding and verification.

Primal:  max  sum_e w_e x_e
         s.t. sum_{e ∋ v} x_e <= 1                   for every vertex v
              x(E(U)) <= (|U| - 1) / 2               odd U, |U| <= k_max (general only)
              x >= 0
Dual:    min  sum_v y_v + sum_U z_U (|U| - 1) / 2
         s.t. y_u + y_v + sum_{U ∋ u,v} z_U >= w_e   for every edge e
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .stream import EDGE_RECORD_BYTES, VERTEX_RECORD_BYTES, SpaceMeter

CARDINALITY = "cardinality"
WEIGHTED = "weighted"
BIPARTITE = "bipartite"
GENERAL = "general"

_MODE_ALIASES = {"card": CARDINALITY, CARDINALITY: CARDINALITY,
                 "weighted": WEIGHTED, "weight": WEIGHTED}


def canonical_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}") from None


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def default_k_max(eps) -> int:
    return 2 * math.ceil(Fraction(str(eps)) ** -1) + 1


@dataclass(frozen=True)
class MatchingLP:
    n: int
    graph_class: str = BIPARTITE
    mode: str = CARDINALITY
    eps: float = 0.1
    left: Optional[int] = None
    k_max: Optional[int] = None

    @property
    def general(self) -> bool:
        return self.graph_class == GENERAL

    @property
    def weighted(self) -> bool:
        return self.mode == WEIGHTED


def build_matching_lp(n: int, graph_class: str = BIPARTITE, mode: str = CARDINALITY,
                      eps: float = 0.1, k_max: Optional[int] = None,
                      left: Optional[int] = None) -> MatchingLP:
    """Validate parameters and return an LP descriptor.

    ``left`` is the size of the declared left side for bipartite input; it may be
    omitted when the graph is bipartite but sides are not numbered as a prefix.
    For general graphs ``k_max`` defaults to ``2*ceil(1/eps) + 1``.
    """
    mode = canonical_mode(mode)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps={eps} outside (0, 1/2]")
    if graph_class == BIPARTITE:
        if left is not None and not 0 < left < n:
            raise ValueError(f"bipartite side L={left} not in (0, {n})")
        if k_max is not None:
            raise ValueError("k_max only applies to general graphs")
    elif graph_class == GENERAL:
        if k_max is None:
            k_max = default_k_max(eps)
        if k_max < 3 or k_max % 2 == 0:
            raise ValueError(f"k_max={k_max} must be odd and >= 3")
    else:
        raise ValueError(f"unknown graph class {graph_class!r}")
    return MatchingLP(n=n, graph_class=graph_class, mode=mode, eps=eps, left=left, k_max=k_max)


class FractionalMatching:
    """Sparse primal vector ``x`` keyed by ``(min(u,v), max(u,v))``.

    Each entry stores its value and the LP weight of the edge it came from.
    When a meter is attached every support entry is charged one edge record.
    Arithmetic is generic so exact ``Fraction`` inputs stay exact.
    """

    def __init__(self, n: int, meter: Optional[SpaceMeter] = None, module: str = "lp_model"):
        self.n = n
        self.x: dict[tuple[int, int], float] = {}
        self.w: dict[tuple[int, int], float] = {}
        self.value = 0
        self._meter = meter
        self._module = module

    @classmethod
    def from_entries(cls, n: int, entries: Iterable, meter: Optional[SpaceMeter] = None):
        """``entries`` are ``(u, v, x)`` or ``(u, v, x, w)``."""
        fm = cls(n, meter)
        for e in entries:
            w = e[3] if len(e) > 3 else 1
            fm.add(e[0], e[1], e[2], w)
        return fm

    def __len__(self) -> int:
        return len(self.x)

    def __contains__(self, key) -> bool:
        return edge_key(*key) in self.x

    def __getitem__(self, key):
        return self.x[edge_key(*key)]

    def items(self):
        return self.x.items()

    def entries(self):
        """``(u, v, x, w)`` tuples in sorted key order."""
        return [(u, v, self.x[(u, v)], self.w[(u, v)]) for (u, v) in sorted(self.x)]

    def add(self, u: int, v: int, amount, w=1) -> None:
        if u == v:
            raise ValueError("self-loop")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise ValueError(f"vertex out of range in ({u}, {v})")
        if amount < 0:
            raise ValueError("negative x")
        k = edge_key(u, v)
        if k not in self.x:
            if self._meter is not None:
                self._meter.charge(EDGE_RECORD_BYTES, self._module)
            self.x[k] = amount
            self.w[k] = w
            self.value += w * amount
            return
        old_w = self.w[k]
        if w > old_w:
            # parallel copy with larger weight: the heavier copy is also a stream edge
            self.value += (w - old_w) * self.x[k]
            self.w[k] = w
        self.x[k] += amount
        self.value += self.w[k] * amount

    def set(self, u: int, v: int, amount) -> None:
        """Overwrite an existing entry; zero removes it."""
        k = edge_key(u, v)
        if amount == 0:
            self.remove(u, v)
            return
        self.value += self.w[k] * (amount - self.x[k])
        self.x[k] = amount

    def remove(self, u: int, v: int) -> None:
        k = edge_key(u, v)
        self.value -= self.w.pop(k) * self.x.pop(k)
        if self._meter is not None:
            self._meter.release(EDGE_RECORD_BYTES, self._module)

    def recompute_value(self):
        self.value = sum(self.w[k] * xv for k, xv in self.x.items())
        return self.value

    def scaled(self, c, meter: Optional[SpaceMeter] = None) -> "FractionalMatching":
        out = FractionalMatching(self.n, meter)
        for (u, v), xv in sorted(self.x.items()):
            out.add(u, v, xv * c, self.w[(u, v)])
        return out

    def loads(self) -> np.ndarray:
        out = np.zeros(self.n)
        for (u, v), xv in self.x.items():
            out[u] += xv
            out[v] += xv
        return out

    def detach(self) -> None:
        """Stop metering (the caller takes ownership of the memory)."""
        if self._meter is not None:
            self._meter.release(EDGE_RECORD_BYTES * len(self.x), self._module)
            self._meter = None

    def to_lines(self, tau: float = 0.0) -> list[str]:
        lines = []
        for u, v, xv, w in self.entries():
            if xv < tau:
                continue
            if w == 1:
                lines.append(f"{u} {v} {float(xv)!r}")
            else:
                lines.append(f"{u} {v} {float(xv)!r} {float(w)!r}")
        return lines

    def __repr__(self) -> str:
        return f"FractionalMatching(n={self.n}, support={len(self.x)}, value={float(self.value):.6g})"


def write_fractional(path, x: FractionalMatching, tau: float = 0.0, header: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        meta = {"n": x.n}
        meta.update(header or {})
        fh.write("# fractional " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        for line in x.to_lines(tau):
            fh.write(line + "\n")


def read_fractional(path, n: Optional[int] = None) -> tuple[FractionalMatching, dict]:
    """Read ``u v x [w]`` lines.  ``#`` lines of the form ``key=value`` are metadata."""
    meta: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                for tok in s[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            t = s.split()
            if len(t) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: expected 'u v x [w]'")
            rows.append((int(t[0]), int(t[1]), float(t[2]), float(t[3]) if len(t) == 4 else 1.0))
    if n is None:
        if "n" in meta:
            n = int(meta["n"])
        else:
            n = 1 + max((max(r[0], r[1]) for r in rows), default=-1)
    return FractionalMatching.from_entries(n, rows), meta


class DualState:
    """Per-vertex multiplicative weights (raw, positive) plus tracked odd-set
    weights for general graphs."""

    def __init__(self, weights: np.ndarray, round: int = 0,
                 meter: Optional[SpaceMeter] = None, module: str = "mwu_engine"):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.round = round
        self.set_weights: dict[frozenset, float] = {}
        self._meter = meter
        self._module = module

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def normalizer(self) -> float:
        return float(self.weights.sum())

    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def potential(self) -> float:
        """Capacity-weighted total of all weights (vertex capacity 1)."""
        return self.normalizer + sum(w * (len(U) - 1) / 2 for U, w in self.set_weights.items())

    def add_set(self, U: frozenset, weight: float) -> None:
        if U in self.set_weights:
            return
        if self._meter is not None:
            self._meter.charge(VERTEX_RECORD_BYTES * (len(U) + 1), self._module)
        self.set_weights[U] = float(weight)

    def release(self) -> None:
        if self._meter is not None:
            self._meter.release(VERTEX_RECORD_BYTES * self.n, self._module)
            for U in self.set_weights:
                self._meter.release(VERTEX_RECORD_BYTES * (len(U) + 1), self._module)
            self._meter = None


@dataclass
class Matching:
    edges: list = field(default_factory=list)   # (u, v) pairs
    weights: list = field(default_factory=list)
    declared_weight: Optional[float] = None    # header total when read from a file

    @property
    def size(self) -> int:
        return len(self.edges)

    @property
    def weight(self):
        if self.weights:
            return sum(self.weights)
        return self.declared_weight if self.declared_weight is not None else 0

    def is_vertex_disjoint(self) -> bool:
        seen = set()
        for u, v in self.edges:
            if u in seen or v in seen or u == v:
                return False
            seen.add(u)
            seen.add(v)
        return True

    def shared_vertex(self) -> Optional[int]:
        seen = set()
        for u, v in self.edges:
            for a in (u, v):
                if a in seen:
                    return a
                seen.add(a)
        return None

    def to_lines(self) -> list[str]:
        out = [f"matching {self.size} {float(self.weight)!r}"]
        out.extend(f"{u} {v}" for u, v in self.edges)
        return out


def write_matching(path, M: Matching) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(M.to_lines()) + "\n")


def read_matching(path) -> Matching:
    with open(path) as fh:
        lines = [s.strip() for s in fh if s.strip() and not s.startswith("#")]
    if not lines or not lines[0].startswith("matching"):
        raise ValueError(f"{path}: missing 'matching k weight' header")
    _, k, weight = lines[0].split()
    edges = [tuple(int(t) for t in s.split()[:2]) for s in lines[1:]]
    if len(edges) != int(k):
        raise ValueError(f"{path}: header says {k} edges, found {len(edges)}")
    # per-edge weights are not serialized; keep the header total
    return Matching(edges=edges, declared_weight=float(weight))


# ---------------------------------------------------------------------------
# arithmetic


def objective_value(x: FractionalMatching, mode: str = CARDINALITY):
    """Exact sum over the support (unit weights in cardinality mode)."""
    if canonical_mode(mode) == CARDINALITY:
        return sum(x.x.values())
    return sum(x.w[k] * xv for k, xv in x.x.items())


def degree_load(x: FractionalMatching, v: int):
    if not 0 <= v < x.n:
        raise ValueError(f"vertex {v} out of range [0, {x.n})")
    return sum(xv for (a, b), xv in x.x.items() if a == v or b == v)


def set_load(x: FractionalMatching, U) -> float:
    U = set(U)
    return sum(xv for (a, b), xv in x.x.items() if a in U and b in U)


class Violation(NamedTuple):
    kind: str          # "degree" | "odd-set"
    where: object      # vertex id or frozenset
    load: float
    capacity: float


def check_feasible(x: FractionalMatching, lp: MatchingLP, tol: float = 1e-9,
                   meter: Optional[SpaceMeter] = None, candidate_cap: int = 2_000_000) -> list:
    """All violated constraints; odd sets are searched only up to ``lp.k_max``
    and only on the in-memory support."""
    from .oddsets import enumerate_violated_odd_sets

    if tol < 0:
        raise ValueError("tol must be >= 0")
    if meter is not None and meter.current_bytes + EDGE_RECORD_BYTES * len(x) > meter.budget_bytes:
        from .stream import BudgetExceeded
        raise BudgetExceeded("lp_model.check_feasible", EDGE_RECORD_BYTES * len(x),
                             meter.current_bytes, meter.budget_bytes)
    out = []
    loads: dict[int, float] = {}
    for (u, v), xv in x.x.items():
        loads[u] = loads.get(u, 0) + xv
        loads[v] = loads.get(v, 0) + xv
    for v in sorted(loads):
        if loads[v] > 1 + tol:
            out.append(Violation("degree", v, loads[v], 1))
    if lp.general:
        for U in enumerate_violated_odd_sets(x, lp.k_max, tol=tol, cap=candidate_cap):
            out.append(Violation("odd-set", U, set_load(x, U), (len(U) - 1) // 2))
    return out


def dual_objective(y, set_duals: Optional[Mapping] = None):
    """``sum_v y_v + sum_U z_U (|U|-1)/2``; accepts arrays, sequences or DualExport."""
    if hasattr(y, "y") and hasattr(y, "set_duals"):
        set_duals = y.set_duals
        y = y.y
    vals = list(y.values()) if isinstance(y, Mapping) else list(y)
    for a in vals:
        if a < 0:
            raise ValueError(f"negative dual entry {a}")
    total = sum(vals) if vals else 0
    for U, z in (set_duals or {}).items():
        if z < 0:
            raise ValueError(f"negative odd-set dual {z}")
        total += z * Fraction(len(U) - 1, 2) if isinstance(z, Fraction) else z * (len(U) - 1) / 2
    return total
