"""Backend selection for the numerical kernels.

The compiled extension (``uimvdr._kernels``) is used when it was built;
otherwise the numpy implementation in ``_kernels_py`` is used.  Setting
``UIMVDR_PURE_PYTHON=1`` forces the numpy path.

Kernels:

    scm(spec)                          (T, F, C) -> (F, C, C)
    scm_pair(mixture, xhat)            -> (scm(xhat), scm(mixture - xhat))
    mvdr_solve(phi_xx, phi_nn, ref, loading) -> (F, C) weights
"""
import logging
import os
from types import ModuleType

from . import _kernels_py

log = logging.getLogger(__name__)

__all__ = ["BACKEND", "available_backends", "get_backend", "scm", "scm_pair", "mvdr_solve"]


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("UIMVDR_PURE_PYTHON"):
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"
    if _compiled is None:
        log.debug("compiled kernels not built, using numpy fallback")


def available_backends() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name: str) -> ModuleType:
    """Kernel module by name, for tests and benchmarks."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built (pip install -e . --no-build-isolation)")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


scm = _impl.scm
scm_pair = _impl.scm_pair
mvdr_solve = _impl.mvdr_solve
