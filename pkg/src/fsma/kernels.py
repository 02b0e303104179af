"""Backend selection for the hot SNN loop.

The compiled extension is used when it was built; setting FSMA_PURE_PYTHON=1
forces the numpy fallback.  Both give bit-identical results.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
simulate = _fallback.simulate

if os.environ.get("FSMA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        simulate = _kernels.simulate
        BACKEND = "cython"


def get_simulate(backend: str | None = None):
    """Kernel for ``backend`` ('cython', 'python' or None for the default)."""
    if backend is None:
        return simulate
    if backend == "python":
        return _fallback.simulate
    if backend == "cython":
        from . import _kernels as k
        return k.simulate
    raise ValueError(f"unknown backend {backend!r}")
