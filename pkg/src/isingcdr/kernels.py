"""Kernel selection: compiled core when importable, numpy fallback otherwise.

Set ``ISINGCDR_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("ISINGCDR_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _pykernels, "python"
    return _kernels, "cython"


impl, BACKEND = _load()

KERNEL_NAMES = ("dm_apply_1q", "dm_apply_monomial", "dm_depolarize_1q", "dm_depolarize_2q")


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _pykernels}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
