"""Backend selection for the hot kernels.

The compiled FFTW extension is used when it imports; otherwise the numpy
fallback. ``NSFILTER_BACKEND=python`` (or ``compiled``) forces a choice.
"""
import importlib
import os
from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python")


def available() -> list[str]:
    return [name for name in BACKENDS if name == "python" or _compiled is not None]


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (default: env override, then compiled, then python)."""
    if name is None:
        name = os.environ.get("NSFILTER_BACKEND") or ("compiled" if _compiled is not None else "python")
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; reinstall with a C compiler and FFTW")
        return _compiled
    raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")


def default_name() -> str:
    return get_backend().NAME


def reload() -> None:
    """Re-import the compiled extension (after an in-place build)."""
    global _compiled
    try:
        _compiled = importlib.import_module(f"{__package__}._kernels")
    except ImportError:
        _compiled = None
