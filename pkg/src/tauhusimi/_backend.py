"""Kernel selection.

The compiled kernel is used when it imports; set ``TAUHUSIMI_BACKEND=python``
to force the numpy fallback (the benchmark and the backend-equivalence tests
switch between both explicitly through :func:`get_kernel`).
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None


def get_kernel(name=None):
    """Return the module providing ``tridiag_traces`` for backend *name*.

    *name* is ``"compiled"``, ``"python"`` or ``None`` (process default).
    """
    if name is None:
        name = BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; build with `pip install -e .`")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")


_requested = os.environ.get("TAUHUSIMI_BACKEND", "").strip().lower()
if _requested in ("python", "py", "numpy"):
    BACKEND = "python"
elif _requested == "compiled" and not HAVE_COMPILED:
    raise ImportError("TAUHUSIMI_BACKEND=compiled but tauhusimi._kernels is not built")
else:
    BACKEND = "compiled" if HAVE_COMPILED else "python"
