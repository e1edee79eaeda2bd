"""Backend selection for the hot oracle scan.

The compiled extension is used when importable, unless ``SSMATCH_PURE_PYTHON``
is set to a non-empty value other than ``0``.
"""

import os

from . import _pykernel

_force_py = os.environ.get("SSMATCH_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-python backend requested")
    from ._ckernel import greedy_scan
    BACKEND = "cython"
except ImportError:
    greedy_scan = _pykernel.greedy_scan
    BACKEND = "python"

lp_weights = _pykernel.lp_weights
py_greedy_scan = _pykernel.greedy_scan

try:
    from ._ckernel import greedy_scan as c_greedy_scan
except ImportError:
    c_greedy_scan = None
