"""Deterministic graph generators writing the edge-list interchange format."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .stream import write_edge_list

MODELS = ("random-bipartite", "random-general", "complete-bipartite", "path", "cycle",
          "hard-layered", "petersen")

_SPEC_RE = re.compile(r"^([a-z][a-z-]*)(?::(.*))?$")


@dataclass
class GeneratedGraph:
    n: int
    us: np.ndarray
    vs: np.ndarray
    ws: np.ndarray
    left: Optional[int]
    weighted: bool
    model: str

    @property
    def m(self) -> int:
        return len(self.us)

    def edges(self):
        if self.weighted:
            return [(int(u), int(v), float(w)) for u, v, w in zip(self.us, self.vs, self.ws)]
        return [(int(u), int(v)) for u, v in zip(self.us, self.vs)]

    def write(self, path) -> None:
        write_edge_list(path, self.n, self.edges(), left=self.left, weighted=self.weighted,
                        comment=f"generated by ssmatch: {self.model}")


def _bernoulli_pairs(rng, rows, cols, p, skip_diag=False):
    mask = rng.random((len(rows), len(cols))) < p
    if skip_diag:
        mask = np.triu(mask, k=1)
    i, j = np.nonzero(mask)
    return rows[i], cols[j]


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability p={p} not in [0, 1]")


def _check_positive(**kw) -> None:
    for k, val in kw.items():
        if val < 1:
            raise ValueError(f"{k} must be >= 1, got {val}")


def generate_graph(model: str, params: Optional[dict] = None, seed: int = 0) -> GeneratedGraph:
    """Build one instance of a named family.

    ``params`` may contain ``weighted=1`` for i.i.d. weights uniform on (0, 1].
    """
    params = dict(params or {})
    weighted = bool(int(params.pop("weighted", 0)))
    rng = np.random.default_rng(seed)
    left: Optional[int] = None

    if model == "random-bipartite":
        n = int(params.pop("n"))
        left = int(params.pop("L", n // 2))
        p = float(params.pop("p"))
        _check_p(p)
        if not 0 < left < n:
            raise ValueError(f"L={left} not in (0, {n})")
        us, vs = _bernoulli_pairs(rng, np.arange(left), np.arange(left, n), p)
    elif model == "random-general":
        n = int(params.pop("n"))
        p = float(params.pop("p"))
        _check_p(p)
        _check_positive(n=n)
        idx = np.arange(n)
        us, vs = _bernoulli_pairs(rng, idx, idx, p, skip_diag=True)
    elif model == "complete-bipartite":
        a = int(params.pop("a"))
        b = int(params.pop("b"))
        _check_positive(a=a, b=b)
        n, left = a + b, a
        grid_u, grid_v = np.meshgrid(np.arange(a), np.arange(a, a + b), indexing="ij")
        us, vs = grid_u.ravel(), grid_v.ravel()
    elif model == "path":
        n = int(params.pop("n"))
        _check_positive(n=n)
        us, vs = np.arange(n - 1), np.arange(1, n)
    elif model == "cycle":
        n = int(params.pop("n"))
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        us, vs = np.arange(n), (np.arange(n) + 1) % n
    elif model == "hard-layered":
        # k disjoint P4 gadgets a-b-c-d; every middle edge b-c precedes all outer
        # edges, so in-order greedy matching keeps exactly k of the 2k optimum.
        k = int(params.pop("k"))
        _check_positive(k=k)
        n, left = 4 * k, 2 * k
        g = np.arange(k)
        a, c = g, k + g              # left side
        b, d = 2 * k + g, 3 * k + g  # right side
        # middle edge is c-b (c left, b right)
        us = np.concatenate([c, a, c])
        vs = np.concatenate([b, b, d])
    elif model == "petersen":
        n = 10
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        pairs = np.array(outer + spokes + inner)
        us, vs = pairs[:, 0], pairs[:, 1]
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if params:
        raise ValueError(f"unused parameters for {model}: {sorted(params)}")

    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    if weighted:
        # uniform on (0, 1], rounded so the text format round-trips exactly
        ws = np.round(1.0 - rng.random(len(us)), 6)
        ws[ws == 0] = 1e-6
    else:
        ws = np.ones(len(us))
    return GeneratedGraph(n, us, vs, ws, left, weighted, model)


def parse_params(text: str) -> dict:
    out = {}
    for part in filter(None, re.split(r"[,\s]+", (text or "").strip())):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k] = v
    return out


def looks_like_spec(text: str) -> bool:
    m = _SPEC_RE.match(text)
    return bool(m) and m.group(1) in MODELS


def generate_from_spec(spec: str) -> GeneratedGraph:
    """``"model:k=v,k=v"``; an optional ``seed`` key selects the RNG seed."""
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise ValueError(f"bad generator spec {spec!r}")
    params = parse_params(m.group(2))
    seed = int(params.pop("seed", 0))
    return generate_graph(m.group(1), params, seed)
