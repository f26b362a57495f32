"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
module is used. Set ``SMCMDP_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from smcmdp import _pykernels as python_backend

if os.environ.get("SMCMDP_PURE_PYTHON", "") in ("", "0"):
    try:
        from smcmdp import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = python_backend
else:
    _impl = python_backend

BACKEND: str = _impl.BACKEND

betainc = _impl.betainc
betaincinv = _impl.betaincinv
ndtri = _impl.ndtri
log_beta_power = _impl.log_beta_power
mix64 = _impl.mix64
stream_key = _impl.stream_key
draw_u64 = _impl.draw_u64
draw_uniform = _impl.draw_uniform
simulate_paths = _impl.simulate_paths
interval_iterate = _impl.interval_iterate


def compiled_backend():
    """The compiled module, or None if it is not available."""
    try:
        from smcmdp import _ckernels
    except ImportError:
        return None
    return _ckernels
