"""Backend selection for the moment kernels.

The compiled extension is used when it imports; setting the environment
variable ``CASIMIR_BEM_BACKEND=python`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _fallback
from ._fallback import DERIV, FULL, NMOM, REMAINDER, STATIC  # noqa: F401

_impl = _fallback
NAME = "python"

if os.environ.get("CASIMIR_BEM_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
        NAME = "cython"
    except ImportError:
        _impl = _fallback


def use(name: str) -> None:
    """Switch backend at runtime ('python' or 'cython')."""
    global _impl, NAME
    if name == "python":
        _impl, NAME = _fallback, "python"
    elif name == "cython":
        from . import _core
        _impl, NAME = _core, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def regular_moments(*args, **kw):
    return _impl.regular_moments(*args, **kw)


def singular_moments(*args, **kw):
    return _impl.singular_moments(*args, **kw)
