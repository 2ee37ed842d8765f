"""Small dense complex matrix helpers (2x2 and 4x4).

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
"""
import math

import numpy as np

HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-14
_MAX_SWEEPS = 64
# Column overlaps this far below the column norms count as zero.
_TINY = 1e-150

IDENTITY2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

for _m in (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z):
    _m.flags.writeable = False


class LinalgError(ValueError):
    """Raised when a matrix violates an operation's precondition."""


def as_cmatrix(a):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a, tol=1e-12):
    a = as_cmatrix(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def kron(a, b):
    """Kronecker product; entry ``(i*db + k, j*db + l)`` is ``a[i, j] * b[k, l]``."""
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    da, db = a.shape[0], b.shape[0]
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(da * db, da * db)


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise LinalgError(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a, b):
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b):
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    _check_same_dim(a, b)
    return a @ b + b @ a


def _offdiag_norm(a):
    off = a - np.diag(np.diag(a))
    return np.sqrt(np.sum(np.abs(off) ** 2))


def hermitian_eig(a, tol=HERMITIAN_TOL):
    """Eigen-decomposition of a small Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like
        Hermitian matrix (checked to ``tol``).

    Returns
    -------
    w : ndarray
        Real eigenvalues in ascending order.
    v : ndarray
        Unitary matrix whose columns are the matching eigenvectors.
    """
    a = as_cmatrix(a)
    if not is_hermitian(a, tol):
        raise LinalgError("hermitian_eig: matrix is not Hermitian")
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=np.complex128)
    scale = max(np.max(np.abs(a), initial=0.0), 1e-300)

    for _ in range(_MAX_SWEEPS):
        if _offdiag_norm(a) <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                # Phase-conjugated real rotation: diag(1, e^-i phi) R diag(1, e^i phi).
                phase = apq / mag
                theta = 0.5 * np.arctan2(2.0 * mag, a[q, q].real - a[p, p].real)
                c = np.cos(theta)
                s = np.sin(theta)
                rot = np.array([[c, s * phase], [-s * np.conj(phase), c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.conj().T @ a[[p, q], :]
                v[:, [p, q]] = v[:, [p, q]] @ rot
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    w = np.real(np.diag(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def singular_values(a, tol=1e-15):
    """Singular values (descending) by one-sided Jacobi rotations.

    Small singular values come out with absolute accuracy of order
    ``eps * ||a||``, unlike square roots of Gram-matrix eigenvalues.
    """
    a = np.array(a, dtype=np.complex128)
    if a.ndim != 2:
        raise LinalgError("singular_values expects a 2-D array")
    n = a.shape[1]
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, p].copy()
                aq = a[:, q]
                alpha = np.vdot(ap, ap).real
                beta = np.vdot(aq, aq).real
                g = np.vdot(ap, aq)
                mag = abs(g)
                if mag <= tol * math.sqrt(alpha * beta) or mag <= _TINY * (alpha + beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * mag)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                aq_ph = aq * np.conj(g / mag)
                a[:, p] = c * ap - s * aq_ph
                a[:, q] = s * ap + c * aq_ph
        if not rotated:
            break
    return np.sort(np.linalg.norm(a, axis=0))[::-1]


def psd_sqrt(a, tol=HERMITIAN_TOL):
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as zero; anything more negative
    raises :class:`LinalgError`.
    """
    w, v = hermitian_eig(a, tol)
    if w.size and w[0] < -tol:
        raise LinalgError(f"psd_sqrt: eigenvalue {w[0]:.3e} below -{tol:g}")
    root = np.sqrt(np.clip(w, 0.0, None))
    b = (v * root) @ v.conj().T
    return 0.5 * (b + b.conj().T)
