"""Kernel backend selection.

The compiled extension is preferred when importable; set RECURROUTE_PURE=1
to force the pure-python fallback.  Both backends expose the same four
functions with identical semantics (see ``_kernels_py`` for the contract).
"""
from __future__ import annotations

import os

from . import _kernels_py as pure

try:
    from . import _speedups as compiled
except ImportError:  # extension not built; fall back silently
    compiled = None

if compiled is not None and os.environ.get("RECURROUTE_PURE") != "1":
    _active = compiled
    BACKEND = "compiled"
else:
    _active = pure
    BACKEND = "pure"

fp_forward = _active.fp_forward
fp_backward = _active.fp_backward
sample_walk = _active.sample_walk
best_cycle_scan = _active.best_cycle_scan


def backends() -> dict:
    """Available backend modules keyed by name (for tests and benchmarks)."""
    out = {"pure": pure}
    if compiled is not None:
        out["compiled"] = compiled
    return out
