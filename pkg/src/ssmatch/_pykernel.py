"""Pure-Python/numpy implementation of the oracle scan kernel.

Same contract as the compiled ``_ckernel.greedy_scan``; selected by
:mod:`ssmatch.kernels` when the extension is missing.
"""

from __future__ import annotations

import math

import numpy as np

CLASS_SLACK = 1e-9


def lp_weights(ws, wscale, log_base, max_class, class_weights):
    """Class-rounded LP weights for a block of raw weights; 0 marks dropped edges."""
    wn = np.asarray(ws, dtype=np.float64) / wscale
    out = np.zeros(len(wn))
    pos = wn > 0
    with np.errstate(divide="ignore"):
        idx = np.floor(np.log(1.0 / wn[pos]) / log_base + CLASS_SLACK).astype(np.int64)
    idx = np.maximum(idx, 0)
    keep = idx <= max_class
    vals = np.zeros(len(idx))
    vals[keep] = np.asarray(class_weights)[idx[keep]]
    out[pos] = vals
    return out


def greedy_scan(us, vs, ws, y, matched, out_u, out_v, out_w, count,
                lam, weighted, wscale, log_base, max_class, class_weights):
    """Scan one block of the stream.

    Appends to ``out_*`` every edge whose reduced cost ``(y_u + y_v)/w~`` is at
    most ``lam`` and whose endpoints are both still free, in stream order.
    Returns ``(count, min_ratio, n_admissible)`` where ``min_ratio`` is the
    smallest reduced cost seen in the block.
    """
    if len(us) == 0:
        return count, math.inf, 0
    if weighted:
        wt = lp_weights(ws, wscale, log_base, max_class, class_weights)
    else:
        wt = np.ones(len(us))
    live = wt > 0
    cost = np.full(len(us), math.inf)
    cost[live] = (y[us[live]] + y[vs[live]]) / wt[live]
    min_ratio = float(cost.min())
    cand = np.flatnonzero(cost <= lam)
    cu = us[cand].tolist()
    cv = vs[cand].tolist()
    cw = wt[cand].tolist()
    for u, v, w in zip(cu, cv, cw):
        if matched[u] or matched[v]:
            continue
        matched[u] = 1
        matched[v] = 1
        out_u[count] = u
        out_v[count] = v
        out_w[count] = w
        count += 1
    return count, min_ratio, len(cand)
