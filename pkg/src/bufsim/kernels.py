"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over.  Set ``BUFSIM_PURE_PYTHON=1`` to force the
fallback.  Both backends produce identical traces, so the choice only
affects speed.
"""

import os

from . import _kernels_py

if os.environ.get("BUFSIM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
run_block = _impl.run_block
minimal_prefix = _impl.minimal_prefix
appendix_c_violations = _impl.appendix_c_violations

SYNC_MINIMAL = _kernels_py.SYNC_MINIMAL
SYNC_SQRT_EXTRA = _kernels_py.SYNC_SQRT_EXTRA
SYNC_FULL = _kernels_py.SYNC_FULL
SYNC_BERNOULLI = _kernels_py.SYNC_BERNOULLI
SYNC_LARGEST_FIRST = _kernels_py.SYNC_LARGEST_FIRST
SYNC_ECN = _kernels_py.SYNC_ECN


def available_backends():
    """Map of backend name to kernel module, for benchmarks and tests."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
