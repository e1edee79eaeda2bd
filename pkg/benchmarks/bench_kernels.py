"""Compiled vs pure-Python oracle scan: timing and output equivalence.

    python benchmarks/bench_kernels.py [--n 20000] [--m 400000] [--repeat 5]

Both backends scan the same edge tape with the same duals; the script checks
that they pick the same matching and reports edges/second for each.
"""

import argparse
import time

import numpy as np

from ssmatch import kernels
from ssmatch.oracles import WeightClasses


def run(scan, us, vs, ws, y, n, weighted, classes, chunk):
    matched = np.zeros(n, dtype=np.uint8)
    slots = n // 2 + 1
    out_u = np.empty(slots, dtype=np.int64)
    out_v = np.empty(slots, dtype=np.int64)
    out_w = np.empty(slots, dtype=np.float64)
    count, best, adm = 0, np.inf, 0
    table = classes.table
    for s in range(0, len(us), chunk):
        count, r, a = scan(us[s:s + chunk], vs[s:s + chunk], ws[s:s + chunk], y, matched,
                           out_u, out_v, out_w, count, 1.0, weighted, classes.scale,
                           classes.log_base, classes.max_class, table)
        best = min(best, r)
        adm += a
    return out_u[:count].copy(), out_v[:count].copy(), best, adm


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--m", type=int, default=400_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--chunk", type=int, default=65_536)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    us = rng.integers(0, args.n, args.m, dtype=np.int64)
    vs = (us + 1 + rng.integers(0, args.n - 1, args.m, dtype=np.int64)) % args.n
    ws = np.round(rng.uniform(1e-6, 1.0, args.m), 6)
    y = rng.uniform(0.0, 0.6, args.n)

    backends = [("python", kernels.py_greedy_scan)]
    if kernels.c_greedy_scan is not None:
        backends.append(("cython", kernels.c_greedy_scan))
    else:
        print("compiled kernel not available; timing the Python backend only")

    for weighted in (False, True):
        classes = WeightClasses.for_graph(args.n, 0.1) if weighted else WeightClasses(0.1, 0)
        outs, times = {}, {}
        for name, scan in backends:
            best = np.inf
            for _ in range(args.repeat):
                t = time.perf_counter()
                outs[name] = run(scan, us, vs, ws, y, args.n, weighted, classes, args.chunk)
                best = min(best, time.perf_counter() - t)
            times[name] = best
        label = "weighted" if weighted else "cardinality"
        for name in times:
            print(f"{label:<12} {name:<7} {times[name] * 1e3:9.2f} ms  "
                  f"{args.m / times[name] / 1e6:7.2f} M edges/s  matched={len(outs[name][0])}")
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            same = (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                    and a[2] == b[2] and a[3] == b[3])
            print(f"{label:<12} outputs identical: {same}; "
                  f"speedup {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
