"""Kernel backend selection.

The compiled extension is preferred when present; setting the environment
variable ``ONROUTE_PURE_KERNELS=1`` (or a failed build) selects the pure
Python twin. Both expose the same two callables with identical results.
"""

from __future__ import annotations

import os

from . import pure as _pure

if os.environ.get("ONROUTE_PURE_KERNELS", "0") not in ("", "0"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

MAX_DP_ITEMS = _pure.MAX_DP_ITEMS

hk_order = _impl.hk_order
bb_min_makespan = _impl.bb_min_makespan

__all__ = ["hk_order", "bb_min_makespan", "BACKEND", "MAX_DP_ITEMS"]
