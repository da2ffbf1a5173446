"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the NumPy
module is the always-available fallback. ``SSRPNET_BACKEND=numpy`` or
``=compiled`` forces a choice (the latter raises if the extension is
missing). Both backends expose the same functions and agree numerically;
cross-backend results can differ in the last bits for long reductions.
"""

from __future__ import annotations

import os

from . import _kernels_np

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:
    _kernels = None

_BY_NAME = {"numpy": _kernels_np}
if _kernels is not None:
    _BY_NAME["compiled"] = _kernels


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BY_NAME))


def get_kernels(name: str | None = None):
    """Kernel module by name; default honors SSRPNET_BACKEND then prefers compiled."""
    if name is None:
        name = os.environ.get("SSRPNET_BACKEND")
    if name is None:
        return _kernels if _kernels is not None else _kernels_np
    if name not in _BY_NAME:
        raise ValueError(
            f"backend {name!r} not available; choose from {available_backends()}"
        )
    return _BY_NAME[name]


kernels = get_kernels()
BACKEND = kernels.NAME
