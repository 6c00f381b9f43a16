"""Select the kernel backend at import time.

The compiled extension is preferred; the pure NumPy/Python module is the
fallback.  ``COPULARANK_BACKEND=py`` forces the fallback and
``COPULARANK_BACKEND=c`` insists on the extension (raising if it is missing);
anything else means "auto".
"""
from __future__ import annotations

import os

from . import _kernels_py

_choice = os.environ.get("COPULARANK_BACKEND", "auto").lower()

if _choice in ("py", "python"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice in ("c", "compiled", "ext"):
            raise
        kernels = _kernels_py

BACKEND = kernels.BACKEND_NAME


def available_backends():
    """Names of the backends importable in this environment."""
    names = []
    try:
        from . import _kernels  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names


def get_kernels(name: str | None = None):
    """Kernel module by name ('compiled' or 'python'); default is the active one."""
    if name is None:
        return kernels
    if name in ("python", "py"):
        return _kernels_py
    if name in ("compiled", "c", "ext"):
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
