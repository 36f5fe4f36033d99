"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports cleanly; otherwise the
numpy implementation in ``_kernels_py`` is used. Set ``SCVX_NLMESH_BACKEND``
to ``python`` to force the fallback (``compiled`` makes a missing extension an
error).
"""

import os

from . import _kernels_py

_requested = os.environ.get("SCVX_NLMESH_BACKEND", "auto").lower()

_compiled = None
if _requested != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _requested == "compiled":
            raise
        _compiled = None

HAVE_COMPILED = _compiled is not None


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None for the default)."""
    if name is None:
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; rebuild the package")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


BACKEND = "compiled" if HAVE_COMPILED else "python"

# layout constants shared by both backends
N_X = _kernels_py.N_X
N_DISC = _kernels_py.N_DISC
N_STT = _kernels_py.N_STT
OFF_PHI = _kernels_py.OFF_PHI
OFF_B = _kernels_py.OFF_B
OFF_C = _kernels_py.OFF_C
OFF_D = _kernels_py.OFF_D
OFF_E = _kernels_py.OFF_E
