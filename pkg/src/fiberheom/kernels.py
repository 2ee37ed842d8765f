"""Backend selection for the propagation kernel.

The compiled extension is used when it imports; set ``FIBERHEOM_PURE=1`` to
force the pure-Python fallback.
"""
import os

import numpy as np

from . import _rk4_py

if os.environ.get("FIBERHEOM_PURE", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _rk4 as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def get_rk4(backend=None):
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not built")
        return _compiled.rk4_csr
    if backend == "python":
        return _rk4_py.rk4_csr
    raise ValueError(f"unknown backend {backend!r}")


def rk4_propagate(mat, x, h, nsteps, backend=None, phase=None):
    """Run ``nsteps`` RK4 steps of ``x' = mat @ x`` in place on ``x``.

    ``mat`` is a scipy CSR matrix. An optional ``phase`` vector multiplies
    ``x`` after every step. Returns -1 or the completed-step count at
    which the state stopped being finite.
    """
    if nsteps <= 0:
        return -1
    indptr = np.ascontiguousarray(mat.indptr, dtype=np.int32)
    indices = np.ascontiguousarray(mat.indices, dtype=np.int32)
    data = np.ascontiguousarray(mat.data, dtype=np.complex128)
    if phase is not None:
        phase = np.ascontiguousarray(phase, dtype=np.complex128)
        if phase.shape != x.shape:
            raise ValueError("phase must match the state vector")
    return get_rk4(backend)(indptr, indices, data, x, float(h), int(nsteps), phase)
