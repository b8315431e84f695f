"""Backend selection for the RK4 hot loops.

The compiled Cython core is used when importable; set RNPM_BACKEND=python
(or =cython) to force a choice.  Both backends expose make_pure_kernel /
make_mixed_kernel with identical semantics.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("RNPM_BACKEND", "").strip().lower()

_backend = None
if _requested in ("", "cython"):
    try:
        from . import _kernels_cy as _backend  # type: ignore[attr-defined]
    except ImportError:
        _backend = None
        if _requested == "cython":
            raise ImportError(
                "RNPM_BACKEND=cython requested but the compiled kernels are not built; "
                "reinstall with a working C toolchain or unset RNPM_BACKEND"
            )
if _backend is None:
    _backend = _kernels_py

BACKEND_NAME: str = _backend.BACKEND_NAME
STATUS_OK: int = _backend.STATUS_OK
STATUS_CROSSED: int = _backend.STATUS_CROSSED
STATUS_INCREASED: int = _backend.STATUS_INCREASED

make_pure_kernel = _backend.make_pure_kernel
make_mixed_kernel = _backend.make_mixed_kernel


def get_backend(name: str | None = None):
    """Return a kernels module by name ('python' or 'cython'); default = active."""
    if name in (None, "", BACKEND_NAME):
        return _backend
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels_cy  # noqa: F401

        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")
