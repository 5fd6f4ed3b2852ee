"""Select the tableau kernel implementation at import time.

The compiled extension is used when importable; setting
``DISENTANGLER_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

from __future__ import annotations

import os

if os.environ.get("DISENTANGLER_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

COMPILED: bool = kernels.COMPILED


def available_backends() -> dict:
    """Map backend name to kernel module for every importable implementation."""
    from . import _kernels_py

    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
