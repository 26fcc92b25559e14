"""Kernel backend selection.

Imports the compiled extension when present, otherwise the numpy fallback.
Set ``TLSCOPE_PURE_PYTHON=1`` to force the fallback (used by tests and the
kernel benchmark).
"""

import os

if os.environ.get("TLSCOPE_PURE_PYTHON", "") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
lorentzian_rate_map = _impl.lorentzian_rate_map
sor_sweep = _impl.sor_sweep

__all__ = ["BACKEND", "lorentzian_rate_map", "sor_sweep"]
