"""Pure-Python RK4 propagation, used when the compiled kernel is unavailable."""
import numpy as np
import scipy.sparse as sp


def rk4_csr(indptr, indices, data, x, h, nsteps, phase=None):
    """Advance ``x`` in place; same contract as the compiled ``rk4_csr``."""
    n = x.shape[0]
    mat = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    matvec = mat._matvec if hasattr(mat, "_matvec") else mat.dot
    half = 0.5 * h
    sixth = h / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(nsteps):
            k1 = matvec(x)
            k2 = matvec(x + half * k1)
            k3 = matvec(x + half * k2)
            k4 = matvec(x + h * k3)
            k2 += k3
            k2 *= 2.0
            k2 += k1
            k2 += k4
            x += sixth * k2
            if phase is not None:
                x *= phase
            if not np.isfinite(x).all():
                return step
    return -1
