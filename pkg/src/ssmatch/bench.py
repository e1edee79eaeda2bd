"""Benchmark harness: end-to-end runs (solve -> round -> verify -> certify)
and their CSV report.

A config file is flat ``key = value`` text.  Blank lines separate ``run``
stanzas; a stanza may also start with a ``[run]`` line.  List-valued keys
(``epsilon``, ``order_seed``, ``oracle``) take comma-separated values and
the stanza expands to their cross product::

    # small suite
    instance = random-bipartite:n=400,L=200,p=0.05,seed=1
    epsilon = 0.1
    order_seed = 0, 1, 2

    instance = graphs/k33.txt
    class = bipartite
    epsilon = 0.1, 0.2

Recognized keys: instance, epsilon, order_seed, oracle, mode, class, stop,
tmax_scale, budget_bytes, jobs (global).  ``instance`` is a file path or a
generator spec (see :mod:`ssmatch.generators`).
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .lp import BIPARTITE, CARDINALITY, GENERAL, WEIGHTED, build_matching_lp, canonical_mode
from .mwu import MWUConfig, solve_fractional
from .rounding import round_matching
from .stream import EdgeStream, SpaceMeter, default_budget_bytes, open_edge_stream
from .verify import stream_matching_weight, verify_matching_stream

log = logging.getLogger(__name__)

CSV_COLUMNS = ("instance", "epsilon", "order_seed", "lp_value_fractional", "matching_size",
               "baseline_opt", "ratio", "passes", "iterations", "peak_bytes", "gap", "wall_ms",
               "error")

# exact oracles are only run below these sizes
BASELINE_LIMITS = {"hopcroft_karp": 200_000, "max_weight_bipartite": 3_000, "brute_force": 22}

_LIST_KEYS = ("epsilon", "order_seed", "oracle")
_KNOWN_KEYS = {"instance", "epsilon", "order_seed", "oracle", "mode", "class", "stop",
               "tmax_scale", "budget_bytes", "jobs"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    instance: str
    epsilon: float = 0.1
    order_seed: Optional[int] = None
    oracle: Optional[str] = None
    mode: str = CARDINALITY
    graph_class: Optional[str] = None      # None: bipartite iff the header declares a left side
    stop: str = "gap"
    tmax_scale: float = 4.0
    budget_bytes: Optional[int] = None


@dataclass
class BenchConfig:
    runs: list = field(default_factory=list)
    jobs: int = 1


def _split_list(value: str) -> list[str]:
    return [t for t in (s.strip() for s in value.split(",")) if t]


def parse_config_text(text: str) -> BenchConfig:
    cfg = BenchConfig()
    stanzas: list[dict] = []
    cur: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#"):
            continue  # comments never end a stanza
        line = line.split(" #", 1)[0].strip()
        if not line or line.lower() == "[run]":
            if cur:
                stanzas.append(cur)
                cur = {}
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "jobs":
            cfg.jobs = int(value)
            continue
        if key in cur:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in stanza")
        cur[key] = value
    if cur:
        stanzas.append(cur)
    for st in stanzas:
        cfg.runs.extend(_expand(st))
    return cfg


def _expand(st: dict) -> list[RunSpec]:
    if "instance" not in st:
        raise ConfigError(f"stanza without instance: {st}")
    lists = {k: _split_list(st.get(k, "")) or [None] for k in _LIST_KEYS}
    mode = canonical_mode(st.get("mode", CARDINALITY))
    graph_class = st.get("class")
    if graph_class not in (None, BIPARTITE, GENERAL):
        raise ConfigError(f"unknown class {graph_class!r}")
    out = []
    for eps, seed, oracle in itertools.product(lists["epsilon"], lists["order_seed"],
                                               lists["oracle"]):
        out.append(RunSpec(
            instance=st["instance"],
            epsilon=float(eps) if eps is not None else 0.1,
            order_seed=int(seed) if seed not in (None, "none") else None,
            oracle=oracle,
            mode=mode,
            graph_class=graph_class,
            stop=st.get("stop", "gap"),
            tmax_scale=float(st.get("tmax_scale", 4.0)),
            budget_bytes=int(st["budget_bytes"]) if "budget_bytes" in st else None,
        ))
    return out


def parse_config(path) -> BenchConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------


def baseline_optimum(stream: EdgeStream, mode: str, graph_class: str) -> Optional[float]:
    """Exact optimum when the instance is small enough for the offline oracles."""
    from . import baselines

    n, edges, left = baselines.load_graph(stream)
    if graph_class == BIPARTITE:
        if mode == WEIGHTED:
            if n > BASELINE_LIMITS["max_weight_bipartite"]:
                return None
            return float(baselines.max_weight_bipartite(n, edges, left).weight)
        if len(edges) > BASELINE_LIMITS["hopcroft_karp"]:
            return None
        return float(baselines.hopcroft_karp(n, edges, left).size)
    if n > BASELINE_LIMITS["brute_force"]:
        return None
    M = baselines.brute_force_max_matching(n, edges, mode)
    return float(M.weight if mode == WEIGHTED else M.size)


def run_one(spec: RunSpec) -> dict:
    """One end-to-end run; failures become a row with the ``error`` column set."""
    row = {c: "" for c in CSV_COLUMNS}
    row.update(instance=spec.instance, epsilon=spec.epsilon,
               order_seed="" if spec.order_seed is None else spec.order_seed)
    stats = None
    try:
        stream = open_edge_stream(spec.instance, order_seed=spec.order_seed)
        graph_class = spec.graph_class or (BIPARTITE if stream.left is not None else GENERAL)
        lp = build_matching_lp(stream.n, graph_class, spec.mode, spec.epsilon, left=stream.left)
        budget = spec.budget_bytes or default_budget_bytes(stream.n, spec.epsilon)
        meter = SpaceMeter(budget)
        cfg = MWUConfig(eps=spec.epsilon, stop_rule=spec.stop, tmax_scale=spec.tmax_scale)
        try:
            sol = solve_fractional(stream, lp, cfg, oracle=spec.oracle, meter=meter)
        except Exception as err:
            stats = getattr(err, "stats", None)
            raise
        stats = sol.stats
        M, _ = round_matching(sol.x, lp, meter=meter)
        if not verify_matching_stream(stream, M, meter=meter):
            raise RuntimeError("rounded matching contains an edge absent from the stream")
        value = stream_matching_weight(stream, M) if lp.weighted else float(M.size)
        row.update(lp_value_fractional=sol.stats.primal_value, matching_size=value,
                   gap=sol.stats.certificate_gap, peak_bytes=meter.peak_bytes)
        opt = baseline_optimum(stream, lp.mode, graph_class)
        if opt is not None:
            row["baseline_opt"] = opt
            row["ratio"] = value / opt if opt > 0 else 1.0
    except Exception as err:  # noqa: BLE001 - recorded per row
        row["error"] = f"{type(err).__name__}: {err}"
        log.warning("run %s failed: %s", spec, row["error"])
    if stats is not None:
        row.update(passes=stats.passes, iterations=stats.iterations,
                   wall_ms=round(stats.wall_time * 1000, 3))
        if row["peak_bytes"] == "":
            row["peak_bytes"] = stats.peak_bytes
    return row


def run_benchmark(config, jobs: Optional[int] = None) -> list[dict]:
    """Run every stanza of ``config`` (a path, config text object, or
    :class:`BenchConfig`); rows come back in config order."""
    if isinstance(config, (str, os.PathLike)):
        config = parse_config(config)
    jobs = jobs or config.jobs
    if jobs > 1 and len(config.runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_one, config.runs))
    return [run_one(r) for r in config.runs]


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return f"{v:.10g}"
    return str(v)


def write_csv(rows: Iterable[dict], path_or_file) -> None:
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in CSV_COLUMNS})
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: list[dict]) -> str:
    """Plain-text table: one line per (instance, epsilon) group."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["instance"], str(r["epsilon"])), []).append(r)
    head = f"{'instance':<48} {'eps':>5} {'runs':>4} {'err':>3} {'min_ratio':>9} " \
           f"{'max_pass':>8} {'max_peak':>9} {'max_gap':>8} {'ms':>9}"
    lines = [head, "-" * len(head)]
    for (inst, eps), rs in groups.items():
        ok = [r for r in rs if not r.get("error")]

        def col(name, fn):
            vals = [float(r[name]) for r in ok if r.get(name) not in ("", None)]
            return fn(vals) if vals else math.nan

        lines.append(f"{inst[:48]:<48} {float(eps):>5.3g} {len(rs):>4} {len(rs) - len(ok):>3} "
                     f"{col('ratio', min):>9.4f} {col('passes', max):>8.0f} "
                     f"{col('peak_bytes', max):>9.0f} {col('gap', max):>8.4f} "
                     f"{col('wall_ms', sum):>9.1f}")
    return "\n".join(lines)
