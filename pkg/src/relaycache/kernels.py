"""Select the compiled kernels when available, else the NumPy fallback.

Set ``RELAYCACHE_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the equivalence tests).
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("RELAYCACHE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback

exclusion_integrals = _impl.exclusion_integrals
inverse_intensity = _impl.inverse_intensity
