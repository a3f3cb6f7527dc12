"""Kernel selection: compiled Cython core when built, numpy fallback otherwise.

Set ``MIXPLAN_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = (_kernels_py.BASIC, _kernels_py.AT_LOWER,
                                          _kernels_py.AT_UPPER, _kernels_py.FREE,
                                          _kernels_py.FIXED)


def load(pure: bool | None = None):
    """Return the kernel module to use."""
    if pure is None:
        pure = os.environ.get("MIXPLAN_PURE_PYTHON", "") not in ("", "0")
    if not pure:
        try:
            from . import _kernels  # type: ignore[attr-defined]
            return _kernels
        except ImportError:
            pass
    return _kernels_py


active = load()
BACKEND = "compiled" if active is not _kernels_py else "python"
