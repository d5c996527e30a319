"""recurroute: schedules for recurrent service routing.

Synthesizes randomized finite-memory strategies by gradient ascent on an
exact ergodic evaluation, extracts deterministic periodic schedules from
them by sampling, and verifies both against exact oracles on small
instances.
"""
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
