"""``ssmatch`` command line.

Verbs (each reads/writes the plain-text formats of the library)::

    ssmatch gen random-bipartite n=400 L=200 p=0.05 --seed 1 --output g.txt
    ssmatch solve --input g.txt --output x.txt --epsilon 0.1      # also writes x.txt.duals
    ssmatch round --input x.txt --output m.txt
    ssmatch verify --input g.txt --matching m.txt [--fractional x.txt --duals x.txt.duals]
    ssmatch bench --input suite.cfg --output runs.csv
    ssmatch report --input runs.csv

Exit codes: 0 success, 1 usage/input errors, 2 space budget or width
violation, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench
from .generators import generate_graph, parse_params
from .lp import (BIPARTITE, CARDINALITY, GENERAL, WEIGHTED, build_matching_lp, read_fractional,
                 read_matching, write_fractional, write_matching)
from .mwu import CertificateInvalid, DualExport, MWUConfig, duality_gap_certificate, solve_fractional
from .oracles import WidthViolation
from .rounding import PreconditionFailed, round_matching
from .stream import (BudgetExceeded, SpaceMeter, StreamFormatError, default_budget_bytes,
                     open_edge_stream)
from .verify import DisjointnessError, stream_matching_weight, verify_matching_stream

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_VERIFY = 3

log = logging.getLogger("ssmatch")


def _mode(text: str) -> str:
    return WEIGHTED if text == "weighted" else CARDINALITY


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--mode", choices=("card", "weighted"), default="card")
    p.add_argument("--class", dest="graph_class", choices=(BIPARTITE, GENERAL), default=None,
                   help="default: bipartite iff the edge list declares a left side")
    p.add_argument("--order-seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssmatch", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen", help="write a generated graph as an edge list")
    g.add_argument("model")
    g.add_argument("params", nargs="*", help="key=value model parameters")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", required=True)

    s = sub.add_parser("solve", help="fractional matching + dual certificate")
    s.add_argument("--input", required=True, help="edge-list file or generator spec")
    s.add_argument("--output", required=True, help="fractional matching file")
    s.add_argument("--duals", default=None, help="dual file (default: OUTPUT.duals)")
    _add_run_flags(s)
    s.add_argument("--budget-bytes", type=int, default=None)
    s.add_argument("--oracle", choices=("greedy", "weighted", "general"), default=None)
    s.add_argument("--stop", choices=("fixed", "gap"), default="gap")
    s.add_argument("--tmax-scale", type=float, default=4.0)

    r = sub.add_parser("round", help="round a fractional matching to an integral one")
    r.add_argument("--input", required=True, help="fractional matching file")
    r.add_argument("--output", required=True, help="matching file")
    r.add_argument("--epsilon", type=float, default=None, help="default: value recorded by solve")
    r.add_argument("--mode", choices=("card", "weighted"), default=None)
    r.add_argument("--class", dest="graph_class", choices=(BIPARTITE, GENERAL), default=None)
    r.add_argument("--budget-bytes", type=int, default=None)

    v = sub.add_parser("verify", help="check a matching (and optionally a certificate) against a stream")
    v.add_argument("--input", required=True, help="edge-list file or generator spec")
    v.add_argument("--matching", required=True)
    v.add_argument("--fractional", default=None)
    v.add_argument("--duals", default=None)
    v.add_argument("--epsilon", type=float, default=None,
                   help="fail if the certificate gap exceeds this")
    v.add_argument("--order-seed", type=int, default=None)
    v.add_argument("--budget-bytes", type=int, default=None)

    b = sub.add_parser("bench", help="run a benchmark config, write CSV")
    b.add_argument("--input", required=True, help="config file")
    b.add_argument("--output", default="-", help="CSV path (default stdout)")
    b.add_argument("--jobs", type=int, default=None)

    rp = sub.add_parser("report", help="summarize a benchmark CSV")
    rp.add_argument("--input", required=True)
    rp.add_argument("--output", default="-")
    return ap


# ---------------------------------------------------------------------------


def cmd_gen(a) -> int:
    g = generate_graph(a.model, parse_params(" ".join(a.params)), a.seed)
    g.write(a.output)
    print(f"wrote {a.output}: n={g.n} m={len(g.us)}")
    return EXIT_OK


def cmd_solve(a) -> int:
    stream = open_edge_stream(a.input, order_seed=a.order_seed)
    graph_class = a.graph_class or (BIPARTITE if stream.left is not None else GENERAL)
    lp = build_matching_lp(stream.n, graph_class, _mode(a.mode), a.epsilon, left=stream.left)
    meter = SpaceMeter(a.budget_bytes or default_budget_bytes(stream.n, a.epsilon))
    cfg = MWUConfig(eps=a.epsilon, stop_rule=a.stop, tmax_scale=a.tmax_scale)
    sol = solve_fractional(stream, lp, cfg, oracle=a.oracle, meter=meter)
    write_fractional(a.output, sol.x, header={"mode": lp.mode, "class": lp.graph_class,
                                              "eps": lp.eps})
    dual_path = a.duals or a.output + ".duals"
    sol.duals.write(dual_path)
    st = sol.stats
    print(json.dumps({"primal": st.primal_value, "dual": st.dual_value,
                      "gap": st.certificate_gap, "passes": st.passes,
                      "iterations": st.iterations, "t_max": st.t_max,
                      "peak_bytes": st.peak_bytes, "budget_bytes": st.budget_bytes,
                      "converged": st.converged, "duals": dual_path}))
    return EXIT_OK


def cmd_round(a) -> int:
    x, meta = read_fractional(a.input)
    eps = a.epsilon if a.epsilon is not None else float(meta.get("eps", 0.1))
    mode = _mode(a.mode) if a.mode else meta.get("mode", CARDINALITY)
    graph_class = a.graph_class or meta.get("class", BIPARTITE)
    lp = build_matching_lp(x.n, graph_class, mode, eps)
    meter = SpaceMeter(a.budget_bytes) if a.budget_bytes else None
    M, rep = round_matching(x, lp, meter=meter)
    write_matching(a.output, M)
    print(json.dumps({"size": M.size, "weight": float(M.weight),
                      "fractional_value": rep.input_value, "forest_value": rep.forest_value}))
    return EXIT_OK


def cmd_verify(a) -> int:
    stream = open_edge_stream(a.input, order_seed=a.order_seed)
    meter = SpaceMeter(a.budget_bytes) if a.budget_bytes else None
    M = read_matching(a.matching)
    try:
        ok = verify_matching_stream(stream, M, meter=meter)
    except DisjointnessError as err:
        print(f"FAIL: {err}")
        return EXIT_VERIFY
    if not ok:
        print("FAIL: matching uses an edge that is not in the stream")
        return EXIT_VERIFY
    out = {"matching_size": M.size}
    if stream.weighted:
        out["matching_weight"] = stream_matching_weight(stream, M)
    if a.duals:
        duals = DualExport.read(a.duals)
        if a.fractional is None:
            print("FAIL: --duals needs --fractional to recompute the gap")
            return EXIT_USAGE
        x, meta = read_fractional(a.fractional)
        lp = build_matching_lp(x.n, meta.get("class", BIPARTITE), duals.mode, duals.eps)
        try:
            gap = duality_gap_certificate(x, duals, lp, stream=stream)
        except CertificateInvalid as err:
            print(f"FAIL: {err}")
            return EXIT_VERIFY
        out["gap"] = gap
        limit = a.epsilon if a.epsilon is not None else duals.eps
        if gap > limit + 1e-9:
            print(json.dumps(out))
            print(f"FAIL: certificate gap {gap:.6g} exceeds {limit}")
            return EXIT_VERIFY
    print(json.dumps(out))
    print("OK")
    return EXIT_OK


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def cmd_bench(a) -> int:
    rows = bench.run_benchmark(a.input, jobs=a.jobs)
    fh = _open_out(a.output)
    try:
        bench.write_csv(rows, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    failed = [r for r in rows if r["error"]]
    if a.output != "-":
        print(f"wrote {len(rows)} rows to {a.output} ({len(failed)} failed)")
    if any(r["error"].startswith(("BudgetExceeded", "WidthViolation")) for r in failed):
        return EXIT_BUDGET
    return EXIT_OK


def cmd_report(a) -> int:
    text = bench.summarize(bench.read_csv(a.input))
    fh = _open_out(a.output)
    try:
        fh.write(text + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "round": cmd_round, "verify": cmd_verify,
            "bench": cmd_bench, "report": cmd_report}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.verb](a)
    except (BudgetExceeded, WidthViolation) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except (CertificateInvalid, PreconditionFailed) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VERIFY
    except (StreamFormatError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
