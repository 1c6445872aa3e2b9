"""Small dense linear algebra for the 5-dimensional belief space.

Every model operator is a real symmetric 5x5 matrix, so propagators are
built from an exact eigendecomposition rather than a generic ``expm``.
All functions accept stacks of matrices (leading batch axes) so that a
whole parameter grid can be propagated in one call.
"""

import numpy as np

DIM = 5

#: Convergence threshold on the off-diagonal Frobenius norm.
JACOBI_TOL = 1e-14
MAX_SWEEPS = 60

_PAIRS = [(p, q) for p in range(DIM - 1) for q in range(p + 1, DIM)]


class InvalidMatrixError(ValueError):
    """Raised for non-finite, non-square or non-symmetric operator input."""


def _check_symmetric(H):
    H = np.asarray(H, dtype=float)
    if H.shape[-2:] != (DIM, DIM):
        raise InvalidMatrixError(f"expected trailing shape ({DIM}, {DIM}), got {H.shape}")
    if not np.all(np.isfinite(H)):
        raise InvalidMatrixError("matrix has non-finite entries")
    if not np.array_equal(H, np.swapaxes(H, -1, -2)):
        raise InvalidMatrixError("matrix is not symmetric")
    return H


def _off_norm(A):
    off = A - np.einsum("...ii->...i", A)[..., None] * np.eye(DIM)
    return np.sqrt(np.sum(off * off, axis=(-1, -2)))


def eigendecompose(H):
    """Eigendecomposition of real symmetric 5x5 matrices by cyclic Jacobi.

    Parameters
    ----------
    H : array_like, shape (..., 5, 5)
        Real symmetric matrix or stack of matrices.

    Returns
    -------
    eigenvalues : ndarray, shape (..., 5)
        Sorted ascending.
    eigenvectors : ndarray, shape (..., 5, 5)
        Orthonormal columns, ``H = V @ diag(w) @ V.T``.

    Each matrix in a stack is rotated only while its own off-diagonal norm
    exceeds the threshold, so results do not depend on batch companions.
    """
    H = _check_symmetric(H)
    batch_shape = H.shape[:-2]
    A = H.reshape(-1, DIM, DIM).copy()
    V = np.broadcast_to(np.eye(DIM), A.shape).copy()

    for _ in range(MAX_SWEEPS):
        active = _off_norm(A) >= JACOBI_TOL
        if not active.any():
            break
        for p, q in _PAIRS:
            apq = A[:, p, q]
            rotate = active & (apq != 0.0)
            safe = np.where(rotate, apq, 1.0)
            # a subnormal pivot overflows tau to inf, which correctly yields t = 0
            with np.errstate(over="ignore"):
                tau = (A[:, q, q] - A[:, p, p]) / (2.0 * safe)
                sgn = np.where(tau >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = np.where(rotate, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(rotate, t * c, 0.0)

            # A <- J^T A J, V <- V J
            cc, ss = c[:, None], s[:, None]
            Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = cc * Ap - ss * Aq
            A[:, :, q] = ss * Ap + cc * Aq
            Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = cc * Ap - ss * Aq
            A[:, q, :] = ss * Ap + cc * Aq
            Vp, Vq = V[:, :, p].copy(), V[:, :, q].copy()
            V[:, :, p] = cc * Vp - ss * Vq
            V[:, :, q] = ss * Vp + cc * Vq

    w = np.einsum("...ii->...i", A).copy()
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    return w.reshape(batch_shape + (DIM,)), V.reshape(batch_shape + (DIM, DIM))


def propagator(H, t):
    """Unitary ``exp(-i H t)`` via the spectral decomposition of ``H``.

    ``t`` may be a scalar or an array broadcastable against the batch shape
    of ``H``.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidMatrixError("time must be finite")
    w, V = eigendecompose(H)
    phases = np.exp(-1j * w * t[..., None])
    return (V * phases[..., None, :]) @ np.swapaxes(V, -1, -2)


def taylor_propagator(H, t):
    """Scaled-and-squared power series for ``exp(-i H t)``.

    Independent of :func:`eigendecompose`; used to cross-check
    :func:`propagator`. Single matrix only.
    """
    H = _check_symmetric(H)
    if H.ndim != 2:
        raise InvalidMatrixError("taylor_propagator takes a single 5x5 matrix")
    if not np.isfinite(t):
        raise InvalidMatrixError("time must be finite")
    A = -1j * H * t
    norm = np.max(np.sum(np.abs(A), axis=1))
    s = 0
    while norm / 2.0**s > 0.5:
        s += 1
    A = A / 2.0**s

    result = np.eye(DIM, dtype=complex)
    term = np.eye(DIM, dtype=complex)
    k = 1
    while True:
        term = term @ A / k
        result = result + term
        if np.max(np.abs(term)) < 1e-16:
            break
        k += 1
    for _ in range(s):
        result = result @ result
    return result


def apply(U, v):
    """Apply a propagator (or stack of them) to state vector(s)."""
    return np.einsum("...ij,...j->...i", U, v)


def unitarity_error(U):
    """Max-norm of ``U^H U - I``."""
    U = np.asarray(U)
    G = np.conj(np.swapaxes(U, -1, -2)) @ U
    return float(np.max(np.abs(G - np.eye(U.shape[-1]))))
