"""Semi-streaming access model: replayable edge streams, pass cursors and a
logical space meter.

An :class:`EdgeStream` is the only way algorithm code sees the graph.  Each
pass is opened with :meth:`EdgeStream.begin_pass` and consumed strictly in
order, either one edge at a time (:meth:`PassCursor.next_edge`) or in
contiguous blocks (:meth:`PassCursor.chunks`) for the compiled kernels.
"""

from __future__ import annotations

import io
import math
import os
import time
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

# Logical record sizes (bytes).  An edge record is (u:int32, v:int32, x:float64);
# a per-vertex dense entry is one float64.
EDGE_RECORD_BYTES = 16
VERTEX_RECORD_BYTES = 8
FLAG_BYTES = 1

DEFAULT_BUDGET_CONSTANT = 64
DEFAULT_CHUNK = 1 << 16

NAMED_ORDERS = ("identity", "sorted", "block", "interleaved", "reversed")


class StreamFormatError(ValueError):
    """Malformed edge-list input.  ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class StreamIOError(IOError):
    """The underlying source failed in the middle of a pass."""


class BudgetExceeded(RuntimeError):
    def __init__(self, module: str, requested: int, current: int, budget: int):
        super().__init__(
            f"space budget exceeded by {module}: {current} + {requested} > {budget} bytes")
        self.module = module
        self.requested = requested
        self.current = current
        self.budget = budget


class Edge(NamedTuple):
    u: int
    v: int
    w: float = 1.0


def default_budget_bytes(n: int, eps: float, constant: int = DEFAULT_BUDGET_CONSTANT) -> int:
    """``constant * n * ceil(eps**-3)`` edge records, in bytes."""
    inv = Fraction(str(eps)) ** -3
    return int(constant * max(n, 1) * math.ceil(inv) * EDGE_RECORD_BYTES)


class SpaceMeter:
    """Tracks logical working memory of a streaming run against a hard budget."""

    def __init__(self, budget_bytes: Optional[int] = None):
        self.budget_bytes = budget_bytes if budget_bytes is not None else math.inf
        self.current_bytes = 0
        self.peak_bytes = 0
        self.by_module: dict[str, int] = {}

    def charge(self, delta_bytes: int, module: str = "unknown") -> "SpaceMeter":
        delta_bytes = int(delta_bytes)
        if self.current_bytes + delta_bytes > self.budget_bytes:
            raise BudgetExceeded(module, delta_bytes, self.current_bytes, self.budget_bytes)
        if self.current_bytes + delta_bytes < 0:
            raise ValueError(f"{module} freed more than it charged")
        self.current_bytes += delta_bytes
        self.by_module[module] = self.by_module.get(module, 0) + delta_bytes
        if self.current_bytes > self.peak_bytes:
            self.peak_bytes = self.current_bytes
        return self

    def release(self, delta_bytes: int, module: str = "unknown") -> "SpaceMeter":
        return self.charge(-int(delta_bytes), module)

    def peak_records(self) -> float:
        return self.peak_bytes / EDGE_RECORD_BYTES

    def __repr__(self) -> str:
        return (f"SpaceMeter(current={self.current_bytes}, peak={self.peak_bytes}, "
                f"budget={self.budget_bytes})")


def meter_charge(meter: SpaceMeter, delta_bytes: int, module: str = "unknown") -> SpaceMeter:
    return meter.charge(delta_bytes, module)


@dataclass
class RunStats:
    passes: int = 0
    iterations: int = 0
    preliminary_passes: int = 0
    certificate_passes: int = 0
    peak_bytes: int = 0
    budget_bytes: float = math.inf
    wall_time: float = 0.0
    certificate_gap: float = math.nan
    primal_value: float = math.nan
    dual_value: float = math.nan
    best_iterate_value: float = 0.0
    best_iterate_round: int = 0
    converged: bool = False
    t_max: int = 0
    separation_rounds: int = 0
    odd_sets_tracked: int = 0
    compactions: int = 0
    extra: dict = field(default_factory=dict)

    CSV_FIELDS = ("passes", "iterations", "preliminary_passes", "certificate_passes",
                  "peak_bytes", "budget_bytes", "wall_time", "certificate_gap",
                  "primal_value", "dual_value", "best_iterate_value", "converged", "t_max")

    def as_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.CSV_FIELDS}


# ---------------------------------------------------------------------------
# edge-list text format


@dataclass
class Header:
    n: int
    m: Optional[int] = None
    left: Optional[int] = None


def _parse_header(tokens: list[str], lineno: int) -> Header:
    if len(tokens) not in (2, 3, 5) or tokens[0] != "p":
        raise StreamFormatError(lineno, "expected header 'p n m [bipartite L]'")
    try:
        n = int(tokens[1])
        m = int(tokens[2]) if len(tokens) >= 3 else None
        left = None
        if len(tokens) == 5:
            if tokens[3] != "bipartite":
                raise StreamFormatError(lineno, f"unknown header flag {tokens[3]!r}")
            left = int(tokens[4])
    except ValueError:
        raise StreamFormatError(lineno, "non-integer value in header") from None
    if n < 0 or (m is not None and m < 0):
        raise StreamFormatError(lineno, "negative size in header")
    if left is not None and not 0 < left < n:
        raise StreamFormatError(lineno, f"bipartite side {left} not in (0, {n})")
    return Header(n, m, left)


def _parse_edge(tokens: list[str], n: int, lineno: int) -> tuple[int, int, float, bool]:
    if len(tokens) not in (2, 3):
        raise StreamFormatError(lineno, "expected 'u v' or 'u v w'")
    try:
        u = int(tokens[0])
        v = int(tokens[1])
    except ValueError:
        raise StreamFormatError(lineno, "non-integer vertex id") from None
    if not (0 <= u < n and 0 <= v < n):
        raise StreamFormatError(lineno, f"vertex id out of range [0, {n})")
    if u == v:
        raise StreamFormatError(lineno, f"self-loop at vertex {u}")
    w = 1.0
    if len(tokens) == 3:
        try:
            w = float(tokens[2])
        except ValueError:
            raise StreamFormatError(lineno, "non-numeric weight") from None
        if not w >= 0 or math.isinf(w):
            raise StreamFormatError(lineno, f"invalid weight {tokens[2]}")
    return u, v, w, len(tokens) == 3


def _iter_records(fh: io.TextIOBase) -> Iterator[tuple[int, list[str]]]:
    for lineno, line in enumerate(fh, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        yield lineno, s.split()


def read_edge_list(path: Union[str, os.PathLike]):
    """Parse an edge-list file fully.  Returns ``(header, u, v, w, weighted)``."""
    us: list[int] = []
    vs: list[int] = []
    ws: list[float] = []
    header = None
    weighted = False
    with open(path) as fh:
        for lineno, tokens in _iter_records(fh):
            if header is None:
                header = _parse_header(tokens, lineno)
                continue
            u, v, w, has_w = _parse_edge(tokens, header.n, lineno)
            us.append(u)
            vs.append(v)
            ws.append(w)
            weighted |= has_w
    if header is None:
        raise StreamFormatError(1, "missing header line")
    if header.m is not None and header.m != len(us):
        raise StreamFormatError(0, f"header declares m={header.m} but file has {len(us)} edges")
    return (header, np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64),
            np.asarray(ws, dtype=np.float64), weighted)


def format_weight(w: float) -> str:
    return repr(float(w))


def write_edge_list(path, n: int, edges, left: Optional[int] = None,
                    weighted: bool = False, comment: Optional[str] = None) -> None:
    edges = list(edges)
    with open(path, "w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        head = f"p {n} {len(edges)}"
        if left is not None:
            head += f" bipartite {left}"
        fh.write(head + "\n")
        for e in edges:
            if weighted:
                fh.write(f"{e[0]} {e[1]} {format_weight(e[2])}\n")
            else:
                fh.write(f"{e[0]} {e[1]}\n")


# ---------------------------------------------------------------------------
# streams


def _named_permutation(order: str, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    m = len(us)
    if order == "identity":
        return np.arange(m)
    lo = np.minimum(us, vs)
    hi = np.maximum(us, vs)
    if order == "sorted":
        return np.lexsort((hi, lo))
    if order == "block":
        # grouped by the larger endpoint (the right side for bipartite input)
        return np.lexsort((lo, hi))
    if order == "reversed":
        return np.arange(m)[::-1].copy()
    if order == "interleaved":
        base = np.lexsort((hi, lo))
        out = np.empty(m, dtype=np.int64)
        out[0::2] = base[: (m + 1) // 2]
        out[1::2] = base[(m + 1) // 2:][::-1]
        return out
    raise ValueError(f"unknown order {order!r}; expected one of {NAMED_ORDERS}")


class EdgeStream:
    """A replayable sequential edge source.

    The edge tape is held by the stream (it models external storage and is not
    charged to any :class:`SpaceMeter`).  Algorithms may only traverse it
    front-to-back through a :class:`PassCursor`.
    """

    def __init__(self, n: int, us, vs, ws=None, *, left: Optional[int] = None,
                 weighted: Optional[bool] = None, order_seed: Optional[int] = None,
                 order: str = "identity", name: str = "<memory>",
                 chunk_size: int = DEFAULT_CHUNK):
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        ws = np.ones(len(us)) if ws is None else np.asarray(ws, dtype=np.float64)
        if not (len(us) == len(vs) == len(ws)):
            raise ValueError("edge arrays differ in length")
        if len(us):
            bad = np.flatnonzero((us < 0) | (us >= n) | (vs < 0) | (vs >= n) | (us == vs) | ~(ws >= 0))
            if len(bad):
                i = int(bad[0])
                raise StreamFormatError(i + 1, f"invalid edge ({us[i]}, {vs[i]}, {ws[i]})")
        perm = _named_permutation(order, us, vs)
        if order_seed is not None:
            perm = perm[np.random.default_rng(order_seed).permutation(len(perm))]
        self.n = int(n)
        self.left = left
        self.weighted = bool(weighted) if weighted is not None else bool(np.any(ws != 1.0))
        self.order_seed = order_seed
        self.order = order
        self.name = name
        self.chunk_size = int(chunk_size)
        self._u = np.ascontiguousarray(us[perm])
        self._v = np.ascontiguousarray(vs[perm])
        self._w = np.ascontiguousarray(ws[perm])
        for a in (self._u, self._v, self._w):
            a.setflags(write=False)
        self.passes_completed = 0
        self._fail_at: Optional[int] = None

    @property
    def m(self) -> int:
        return len(self._u)

    @property
    def is_bipartite_declared(self) -> bool:
        return self.left is not None

    def begin_pass(self, stats: Optional[RunStats] = None) -> "PassCursor":
        return PassCursor(self, stats)

    def reorder(self, order_seed: Optional[int] = None, order: str = "identity") -> "EdgeStream":
        """Same multiset of edges under another order."""
        return EdgeStream(self.n, self._u, self._v, self._w, left=self.left,
                          weighted=self.weighted, order_seed=order_seed, order=order,
                          name=self.name, chunk_size=self.chunk_size)

    def _inject_failure(self, position: Optional[int]) -> None:
        # test hook: the next passes raise StreamIOError once `position` edges were read
        self._fail_at = position

    def __repr__(self) -> str:
        return (f"EdgeStream(name={self.name!r}, n={self.n}, m={self.m}, order={self.order!r}, "
                f"seed={self.order_seed})")


class PassCursor:
    """One sequential pass over an :class:`EdgeStream`.  Not restartable."""

    def __init__(self, stream: EdgeStream, stats: Optional[RunStats] = None):
        self._stream = stream
        self._stats = stats
        self._pos = 0
        self._done = False

    @property
    def n(self) -> int:
        return self._stream.n

    @property
    def position(self) -> int:
        return self._pos

    def _finish(self) -> None:
        if not self._done:
            self._done = True
            self._stream.passes_completed += 1
            if self._stats is not None:
                self._stats.passes += 1

    def _check_io(self, upto: int) -> None:
        fail = self._stream._fail_at
        if fail is not None and upto > fail:
            raise StreamIOError(f"source {self._stream.name} failed at edge {fail}")

    def next_edge(self) -> Optional[Edge]:
        """Next edge, or ``None`` at end of pass (which is counted once)."""
        if self._done:
            return None
        s = self._stream
        if self._pos >= s.m:
            self._finish()
            return None
        self._check_io(self._pos + 1)
        i = self._pos
        self._pos += 1
        return Edge(int(s._u[i]), int(s._v[i]), float(s._w[i]))

    def __iter__(self) -> Iterator[Edge]:
        while True:
            e = self.next_edge()
            if e is None:
                return
            yield e

    def chunks(self, size: Optional[int] = None):
        """Yield read-only ``(u, v, w)`` array blocks in stream order."""
        s = self._stream
        size = size or s.chunk_size
        while not self._done and self._pos < s.m:
            end = min(self._pos + size, s.m)
            self._check_io(end)
            lo = self._pos
            self._pos = end
            yield s._u[lo:end], s._v[lo:end], s._w[lo:end]
        self._finish()


def next_edge(cursor: PassCursor) -> Optional[Edge]:
    return cursor.next_edge()


# ---------------------------------------------------------------------------


def open_edge_stream(source, order_seed: Optional[int] = None, order: str = "identity",
                     chunk_size: int = DEFAULT_CHUNK) -> EdgeStream:
    """Open a stream from an edge-list path or a generator spec string.

    Generator specs look like ``"random-bipartite:n=100,L=50,p=0.1,seed=1"``
    (see :mod:`ssmatch.generators`).
    """
    from . import generators

    if isinstance(source, EdgeStream):
        return source.reorder(order_seed, order)
    src = os.fspath(source)
    if not os.path.exists(src) and generators.looks_like_spec(src):
        g = generators.generate_from_spec(src)
        return EdgeStream(g.n, g.us, g.vs, g.ws, left=g.left, weighted=g.weighted,
                          order_seed=order_seed, order=order, name=src, chunk_size=chunk_size)
    header, us, vs, ws, weighted = read_edge_list(src)
    return EdgeStream(header.n, us, vs, ws, left=header.left, weighted=weighted,
                      order_seed=order_seed, order=order, name=src, chunk_size=chunk_size)


class Stopwatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0
