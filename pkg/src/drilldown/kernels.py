"""Kernel dispatch: numba-compiled loops by default, numpy fallback.

Set DRILLDOWN_FORCE_NUMPY=1 to force the pure-numpy path (also taken
automatically when numba is not importable).  benchmarks/bench_kernels.py
compares the two.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

FORCE_NUMPY = os.environ.get("DRILLDOWN_FORCE_NUMPY", "") not in ("", "0")

if not FORCE_NUMPY:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = _kernels_numpy
        BACKEND = "numpy"
else:
    _impl = _kernels_numpy
    BACKEND = "numpy"

count_marginals = _impl.count_marginals
sample_pool_pass = _impl.sample_pool_pass
