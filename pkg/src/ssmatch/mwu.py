"""Multiplicative-weights solver for the matching LP, one stream pass per
iteration.

Each iteration asks a one-pass oracle for a matching that is maximal among
edges whose reduced cost ``(l_u + l_v + surcharge) / w_e`` is within a
``(1 + eta)`` factor of the smallest reduced cost known so far, then raises
the weight of every matched vertex (and loaded odd set) by ``1 + eta*load``.

Both sides of the duality certificate are maintained as the run goes:

* primal: the sum of all oracle matchings, divided by its largest
  normalized constraint load, is a feasible fractional matching;
* dual: the pre-update weights divided by the smallest reduced cost seen in
  the same pass form a feasible fractional vertex cover.

The run stops when ``(dual - primal) / dual <= gap_target`` or after
``t_max`` iterations.  A final dedicated pass re-verifies the exported duals
against every stream edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .lp import (CARDINALITY, WEIGHTED, DualState, FractionalMatching, MatchingLP,
                 dual_objective, objective_value)
from .oddsets import OddSetSearchError, enumerate_violated_odd_sets
from .oracles import (AdmissibilityRule, OracleResult, WeightClasses, WidthViolation,
                      greedy_oracle_pass, matching_set_loads)
from .rounding import cancel_cycles_inplace
from .stream import (VERTEX_RECORD_BYTES, EdgeStream, RunStats, SpaceMeter, Stopwatch,
                     default_budget_bytes)

log = logging.getLogger(__name__)

MODULE = "mwu_engine"


class CertificateInvalid(RuntimeError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class MWUConfig:
    eps: float = 0.1
    eta: Optional[float] = None            # default eps / 4
    rho: float = 1.0
    tmax_scale: float = 4.0
    t_max: Optional[int] = None            # default ceil(c * rho * ln(n) / eps^2)
    stop_rule: str = "gap"                 # "gap" | "fixed"
    gap_target: Optional[float] = None     # default eps
    lam: float = 1.0
    support_cap: float = 1.5               # compaction trigger, in multiples of n
    separation_interval: int = 10
    odd_set_cap: int = 2_000_000
    set_init: Optional[float] = None       # new odd-set weight, relative to the min reduced cost
    phase_schedule: Optional[tuple] = None  # eps per phase; one phase by default

    def __post_init__(self):
        if not 0 < self.eps <= 0.5:
            raise ValueError(f"eps={self.eps} outside (0, 1/2]")
        if self.eta is None:
            self.eta = self.eps / 4
        if not 0 < self.eta <= 0.5:
            raise ValueError(f"eta={self.eta} outside (0, 1/2]")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.stop_rule not in ("gap", "fixed"):
            raise ValueError(f"unknown stop rule {self.stop_rule!r}")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be >= 1")

    def resolve_t_max(self, n: int) -> int:
        if self.t_max is not None:
            return self.t_max
        return max(1, math.ceil(self.tmax_scale * self.rho * math.log(max(n, 1)) / self.eps ** 2))

    def phases(self) -> list[tuple[float, float, float]]:
        """``(eps, eta, gap_target)`` per phase."""
        if not self.phase_schedule:
            return [(self.eps, self.eta, self.gap_target if self.gap_target is not None else self.eps)]
        return [(e, e / 4, e) for e in self.phase_schedule]


@dataclass
class DualExport:
    """Feasible dual in the LP's weight units: ``y_u + y_v + sum z_U >= w~_e``."""

    y: np.ndarray
    set_duals: dict = field(default_factory=dict)
    mode: str = CARDINALITY
    eps: float = 0.1
    weight_scale: float = 1.0
    max_class: int = 0

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def value(self) -> float:
        return float(dual_objective(self.y, self.set_duals))

    def classes(self) -> Optional[WeightClasses]:
        if self.mode != WEIGHTED:
            return None
        return WeightClasses(self.eps, self.max_class, self.weight_scale)

    def to_lines(self, tau: float = 0.0) -> list[str]:
        lines = [f"# duals n={self.n} mode={self.mode} eps={self.eps!r} "
                 f"weight_scale={self.weight_scale!r} max_class={self.max_class}"]
        lines += [f"{v} {yv!r}" for v, yv in enumerate(self.y.tolist()) if yv > tau]
        for U, z in sorted(self.set_duals.items(), key=lambda t: sorted(t[0])):
            lines.append("s " + " ".join(map(str, sorted(U))) + f" {z!r}")
        return lines

    def write(self, path, tau: float = 0.0) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines(tau)) + "\n")

    @classmethod
    def read(cls, path) -> "DualExport":
        meta: dict = {}
        ys: dict = {}
        sets: dict = {}
        with open(path) as fh:
            for line in fh:
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
                if t[0] == "s":
                    sets[frozenset(int(a) for a in t[1:-1])] = float(t[-1])
                else:
                    ys[int(t[0])] = float(t[1])
        n = int(meta.get("n", 1 + max(ys, default=-1)))
        y = np.zeros(n)
        for v, yv in ys.items():
            y[v] = yv
        return cls(y, sets, meta.get("mode", CARDINALITY), float(meta.get("eps", 0.1)),
                   float(meta.get("weight_scale", 1.0)), int(meta.get("max_class", 0)))


@dataclass
class Solution:
    x: FractionalMatching
    duals: DualExport
    stats: RunStats
    best_iterate_value: float = 0.0
    converged: bool = False

    def __iter__(self):
        return iter((self.x, self.duals, self.stats))


# ---------------------------------------------------------------------------


def init_duals(n: int, meter: Optional[SpaceMeter] = None) -> DualState:
    """Uniform unit weights; charges one dense vertex array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if meter is not None:
        meter.charge(VERTEX_RECORD_BYTES * n, MODULE)
    return DualState(np.ones(n), 0, meter=meter)


def mwu_step(duals: DualState, result: OracleResult, cfg: MWUConfig,
             eta: Optional[float] = None) -> DualState:
    """``w_v <- w_v * (1 + eta * load_v / rho)``, also for tracked odd sets
    (load measured relative to the set capacity).  Updates in place."""
    eta = cfg.eta if eta is None else eta
    rho = cfg.rho
    if result.size:
        idx = np.concatenate([result.us, result.vs])
        load = np.bincount(idx, minlength=duals.n)
        top = int(load.max())
        if top > rho:
            raise WidthViolation(result.oracle, top, rho)
        hit = np.flatnonzero(load)
        duals.weights[hit] *= 1.0 + eta * load[hit] / rho
    for U, k in result.set_loads.items():
        if not k or U not in duals.set_weights:
            continue
        rel = k / ((len(U) - 1) / 2)
        if rel > rho:
            raise WidthViolation(result.oracle, rel, rho)
        duals.set_weights[U] *= 1.0 + eta * rel / rho
    duals.round += 1
    return duals


def _resolve_oracle(oracle, lp: MatchingLP) -> tuple[Callable, str]:
    if callable(oracle):
        return oracle, getattr(oracle, "__name__", "custom")
    name = oracle or ("general" if lp.general else "weighted" if lp.weighted else "greedy")
    if name == "weighted" and not lp.weighted:
        raise ValueError("weighted oracle needs a weighted LP")
    if name == "general" and not lp.general:
        raise ValueError("general oracle needs a general-graph LP")
    if name not in ("greedy", "weighted", "general"):
        raise ValueError(f"unknown oracle {name!r}")
    return greedy_oracle_pass, name


def _max_weight_pass(stream: EdgeStream, stats: RunStats) -> float:
    wmax = 0.0
    for _, _, bw in stream.begin_pass(stats).chunks():
        if len(bw):
            wmax = max(wmax, float(bw.max()))
    return wmax


class _Primal:
    """Running sum of oracle matchings plus its constraint loads."""

    def __init__(self, n: int, meter: Optional[SpaceMeter]):
        self.sum = FractionalMatching(n, meter, module=MODULE)
        self.vload = np.zeros(n)
        self.set_load: dict = {}
        if meter is not None:
            meter.charge(VERTEX_RECORD_BYTES * n, MODULE)

    def absorb(self, res: OracleResult) -> None:
        for u, v, w in zip(res.us.tolist(), res.vs.tolist(), res.ws.tolist()):
            self.sum.add(u, v, 1.0, w)
        if res.size:
            np.add.at(self.vload, res.us, 1.0)
            np.add.at(self.vload, res.vs, 1.0)
        for U, k in res.set_loads.items():
            self.set_load[U] = self.set_load.get(U, 0.0) + k

    def track(self, U: frozenset) -> None:
        if U not in self.set_load:
            self.set_load[U] = sum(xv for (a, b), xv in self.sum.items() if a in U and b in U)

    def scale(self) -> float:
        s = float(self.vload.max()) if len(self.vload) else 0.0
        for U, load in self.set_load.items():
            s = max(s, load / ((len(U) - 1) / 2))
        return s

    def value(self) -> float:
        s = self.scale()
        return float(self.sum.value) / s if s > 0 else 0.0


def solve_fractional(stream: EdgeStream, lp: MatchingLP, cfg: Optional[MWUConfig] = None,
                     oracle: Union[str, Callable, None] = None,
                     meter: Optional[SpaceMeter] = None,
                     stats: Optional[RunStats] = None) -> Solution:
    """Run the MWU loop over ``stream`` and return ``(x, duals, stats)``.

    ``x`` is reported in the LP's weight units (class-rounded weights times the
    normalizing maximum in weighted mode).  Errors raised mid-run carry the
    partially filled :class:`RunStats` as ``err.stats``.
    """
    cfg = cfg or MWUConfig(eps=lp.eps)
    if stream.n != lp.n:
        raise ValueError(f"stream has n={stream.n}, LP has n={lp.n}")
    n = lp.n
    stats = stats if stats is not None else RunStats()
    meter = meter if meter is not None else SpaceMeter(default_budget_bytes(n, lp.eps))
    stats.budget_bytes = meter.budget_bytes
    t_max = cfg.resolve_t_max(n)
    stats.t_max = t_max
    oracle_fn, oracle_name = _resolve_oracle(oracle, lp)
    watch = Stopwatch()
    try:
        return _solve(stream, lp, cfg, oracle_fn, oracle_name, meter, stats, t_max, watch)
    except Exception as err:
        stats.peak_bytes = meter.peak_bytes
        stats.wall_time = watch.elapsed()
        err.stats = stats
        raise


def _solve(stream, lp, cfg, oracle_fn, oracle_name, meter, stats, t_max, watch) -> Solution:
    n = lp.n
    classes = None
    wscale = 1.0
    if lp.weighted:
        wscale = _max_weight_pass(stream, stats) or 1.0
        stats.preliminary_passes += 1
        classes = WeightClasses.for_graph(n, lp.eps, wscale)

    duals = init_duals(n, meter)
    primal = _Primal(n, meter)
    best_w = np.ones(n)
    meter.charge(VERTEX_RECORD_BYTES * n, MODULE)
    best_sets: dict = {}
    best_alpha = 2.0
    best_dual = math.inf
    # weights start at 1 and LP weights are <= 1, so every reduced cost is >= 2
    alpha = 2.0
    best_iter = 0.0
    gap = math.inf
    it = 0
    converged = False
    set_init = cfg.set_init if cfg.set_init is not None else lp.eps
    rule = AdmissibilityRule(cfg.lam, lp.mode, lp.eps)

    for phase_eps, eta, target in cfg.phases():
        while it < t_max:
            it += 1
            scale = 1.0 / ((1.0 + eta) * alpha)
            cursor = stream.begin_pass(stats)
            res = oracle_fn(cursor, duals, rule, meter, scale=scale, classes=classes,
                            set_duals=duals.set_weights if lp.general else None,
                            oracle=oracle_name)
            stats.iterations = it
            raw_min = res.min_ratio / scale
            if math.isfinite(raw_min) and raw_min > 0:
                dual_t = duals.potential() / raw_min
                if dual_t < best_dual:
                    best_dual = dual_t
                    best_w[:] = duals.weights
                    best_sets = dict(duals.set_weights)
                    best_alpha = raw_min
                alpha = raw_min
            elif not math.isfinite(raw_min):
                # no live edge at all: the zero vector is a feasible dual
                best_dual = 0.0
                best_alpha = math.inf
            primal.absorb(res)
            best_iter = max(best_iter, res.weight)
            mwu_step(duals, res, cfg, eta)
            res.release(meter)

            if not lp.general and len(primal.sum) > cfg.support_cap * n:
                cancel_cycles_inplace(primal.sum, on_odd="error")
                stats.compactions += 1

            pval = primal.value()
            gap = _gap(best_dual, pval)
            if lp.general and (gap <= target or it % cfg.separation_interval == 0):
                added = _separate(primal, duals, lp, cfg, alpha * set_init, stats)
                if added:
                    pval = primal.value()
                    gap = _gap(best_dual, pval)
                    if gap <= target:
                        continue
            if cfg.stop_rule == "gap" and gap <= target:
                converged = True
                break
        if it >= t_max:
            break

    if lp.general:
        # make sure nothing violated remains even if the loop ran out of iterations
        _separate(primal, duals, lp, cfg, alpha * set_init, stats, add_to_duals=False)

    s = primal.scale()
    x = FractionalMatching(n)
    for (u, v), xv in sorted(primal.sum.items()):
        x.add(u, v, xv / s, primal.sum.w[(u, v)] * wscale)

    export = DualExport(best_w / best_alpha * wscale,
                        {U: z / best_alpha * wscale for U, z in best_sets.items()},
                        lp.mode, lp.eps, wscale, classes.max_class if classes else 0)
    export = verify_dual_feasibility(stream, export, stats, repair=True)
    stats.certificate_passes += 1

    stats.primal_value = float(objective_value(x, WEIGHTED))
    stats.dual_value = export.value
    stats.certificate_gap = _gap(stats.dual_value, stats.primal_value)
    stats.best_iterate_value = best_iter * wscale
    stats.converged = converged if cfg.stop_rule == "gap" else stats.certificate_gap <= cfg.eps
    stats.odd_sets_tracked = len(duals.set_weights)
    stats.peak_bytes = meter.peak_bytes
    stats.wall_time = watch.elapsed()

    duals.release()
    primal.sum.detach()
    meter.release(2 * VERTEX_RECORD_BYTES * n, MODULE)
    if stats.passes != stats.iterations + stats.preliminary_passes + stats.certificate_passes:
        log.warning("pass accounting mismatch: %s", stats)
    if not converged and cfg.stop_rule == "gap":
        log.info("t_max=%d reached with gap %.4g > %.4g", t_max, stats.certificate_gap, cfg.eps)
    return Solution(x, export, stats, stats.best_iterate_value, stats.converged)


def _gap(dual: float, primal: float) -> float:
    if dual <= 0:
        return 0.0 if primal <= 0 else math.inf
    return max(0.0, (dual - primal) / dual)


def _separate(primal: _Primal, duals: DualState, lp: MatchingLP, cfg: MWUConfig,
              init_weight: float, stats: RunStats, add_to_duals: bool = True) -> int:
    s = primal.scale()
    if s <= 0:
        return 0
    scaled = {k: xv / s for k, xv in primal.sum.items()}
    try:
        sets = enumerate_violated_odd_sets(scaled, lp.k_max, tol=1e-9, cap=cfg.odd_set_cap)
    except OddSetSearchError as err:
        sets = err.partial
        log.warning("odd-set search capped at %d candidates; using %d sets found so far",
                    cfg.odd_set_cap, len(sets))
    stats.separation_rounds += 1
    new = [U for U in sets if U not in primal.set_load]
    for U in new:
        primal.track(U)
        if add_to_duals:
            duals.add_set(U, init_weight)
    return len(new)


# ---------------------------------------------------------------------------
# certificate


def verify_dual_feasibility(stream: EdgeStream, duals: DualExport,
                            stats: Optional[RunStats] = None, slack: Optional[float] = None,
                            repair: bool = False) -> DualExport:
    """One pass checking ``y_u + y_v + sum z_U >= (1 - slack) * w~_e`` on every edge.

    Raises :class:`CertificateInvalid` naming a witness edge.  With
    ``repair=True`` the duals are additionally rescaled by the smallest
    coverage ratio found, making them exactly feasible.
    """
    slack = duals.eps if slack is None else slack
    classes = duals.classes()
    y = duals.y
    member: dict = {}
    for j, U in enumerate(duals.set_duals):
        for a in U:
            member.setdefault(a, []).append(j)
    zs = list(duals.set_duals.values())
    sets = list(duals.set_duals)
    worst = math.inf
    witness = None
    from . import kernels

    for bu, bv, bw in stream.begin_pass(stats).chunks():
        if classes is not None:
            wt = kernels.lp_weights(bw, classes.scale, classes.log_base, classes.max_class,
                                    classes.table) * classes.scale
        else:
            wt = np.ones(len(bu))
        cover = y[bu] + y[bv]
        if sets:
            extra = np.zeros(len(bu))
            for i, (u, v) in enumerate(zip(bu.tolist(), bv.tolist())):
                common = set(member.get(u, ())) & set(member.get(v, ()))
                extra[i] = sum(zs[j] for j in common)
            cover = cover + extra
        live = wt > 0
        if not live.any():
            continue
        ratio = cover[live] / wt[live]
        j = int(np.argmin(ratio))
        if ratio[j] < worst:
            worst = float(ratio[j])
            li = np.flatnonzero(live)[j]
            witness = (int(bu[li]), int(bv[li]), float(wt[li]))
    if worst < 1 - slack:
        raise CertificateInvalid(
            f"dual infeasible on edge {witness}: coverage ratio {worst:.6g} < {1 - slack}", witness)
    if repair and math.isfinite(worst) and worst < 1:
        duals = DualExport(y / worst, {U: z / worst for U, z in duals.set_duals.items()},
                           duals.mode, duals.eps, duals.weight_scale, duals.max_class)
    return duals


def duality_gap_certificate(x: FractionalMatching, duals: DualExport, lp: MatchingLP,
                            stream: Optional[EdgeStream] = None,
                            stats: Optional[RunStats] = None) -> float:
    """``(dual - primal) / dual``; with a stream, the duals are re-verified first."""
    if stream is not None:
        verify_dual_feasibility(stream, duals, stats)
    primal = float(objective_value(x, lp.mode))
    return _gap(duals.value, primal)
