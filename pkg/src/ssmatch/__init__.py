"""Semi-streaming maximum matching via multiplicative-weights LP solving.

Typical pipeline::

    stream = open_edge_stream("graph.txt", order_seed=7)
    lp = build_matching_lp(stream.n, "bipartite", "cardinality", eps=0.1)
    sol = solve_fractional(stream, lp)
    M, report = round_matching(sol.x, lp)
    assert verify_matching_stream(stream, M)
"""

from .kernels import BACKEND
from .lp import (DualState, FractionalMatching, Matching, MatchingLP, build_matching_lp,
                 check_feasible, degree_load, dual_objective, objective_value)
from .mwu import (CertificateInvalid, DualExport, MWUConfig, Solution, duality_gap_certificate,
                  init_duals, mwu_step, solve_fractional, verify_dual_feasibility)
from .oddsets import enumerate_violated_odd_sets
from .oracles import (AdmissibilityRule, OracleResult, WidthViolation, admissible,
                      greedy_oracle_pass, weight_class)
from .rounding import (cancel_cycles_bipartite, extract_support, round_forest, round_general,
                       round_matching)
from .stream import (BudgetExceeded, Edge, EdgeStream, RunStats, SpaceMeter, StreamFormatError,
                     meter_charge, next_edge, open_edge_stream)
from .verify import stream_matching_weight, verify_matching_stream

__version__ = "0.1.0"
