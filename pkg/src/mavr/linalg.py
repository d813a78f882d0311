"""Dense symmetric eigendecomposition and Kronecker spectra.

The eigensolver is a cyclic Jacobi method using a round-robin ordering, so
that every round applies ``n // 2`` disjoint rotations at once with
vectorized row/column updates.
"""
from typing import NamedTuple

import numpy as np

__all__ = [
    "EigenSystem",
    "KronSpectrum",
    "as_symmetric",
    "sym_eig",
    "kron_spectrum",
    "kron_eigvec_apply",
]

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenSystem(NamedTuple):
    """Ascending eigenvalues and the matching orthonormal eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]


class KronSpectrum(NamedTuple):
    """Sorted eigenvalues of ``P kron Q``.

    ``index_map[k] = (j, i)`` (0-based) means ``values[k] = lamP[j] * lamQ[i]``.
    The matching position in a column-stacked ``vec`` of an ``n x c`` matrix
    is ``j * n + i``.
    """

    values: np.ndarray
    index_map: np.ndarray
    n: int
    c: int

    @property
    def flat_index(self):
        """Positions into ``vec(M)`` (column-major) for each sorted value."""
        return self.index_map[:, 0] * self.n + self.index_map[:, 1]


def as_symmetric(A, name="matrix"):
    """Return ``A`` as a float array, exactly symmetrized.

    Raises ``ValueError`` for non-square or non-finite input.
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        bad = np.argwhere(~np.isfinite(A))[0]
        raise ValueError(f"{name} has a non-finite entry at {tuple(int(b) for b in bad)}")
    return 0.5 * (A + A.T)


def _round_robin(n):
    """Pairings (p, q), p < q, covering every index pair once over n-1 rounds."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        return np.diag(A).copy(), V, 0

    rounds = _round_robin(n)
    offdiag = np.ones((n, n), dtype=bool)
    np.fill_diagonal(offdiag, False)

    for sweep in range(1, max_sweeps + 1):
        if np.sqrt(np.sum(A[offdiag] ** 2)) <= tol * scale:
            return np.diag(A).copy(), V, sweep - 1
        for p, q in rounds:
            apq = A[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore"):
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                big = np.abs(theta) > 1e150
                t = np.where(
                    big,
                    0.5 / np.where(big, theta, 1.0),
                    np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            rp, rq = A[p, :], A[q, :]
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = A[:, p], A[:, q]
            A[:, p] = cp * c - cq * s
            A[:, q] = cp * s + cq * c
            A[p, q] = 0.0
            A[q, p] = 0.0

            vp, vq = V[:, p], V[:, q]
            V[:, p] = vp * c - vq * s
            V[:, q] = vp * s + vq * c
        A = 0.5 * (A + A.T)

    if np.sqrt(np.sum(A[offdiag] ** 2)) <= tol * scale:
        return np.diag(A).copy(), V, max_sweeps
    raise np.linalg.LinAlgError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def sym_eig(A, method="jacobi"):
    """Eigendecomposition of a real symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix; it is symmetrized exactly before use.
    method : {"jacobi", "lapack"}
        ``"jacobi"`` runs the built-in cyclic Jacobi solver (off-diagonal
        Frobenius norm driven below ``1e-12 * ||A||_F``). ``"lapack"``
        delegates to :func:`numpy.linalg.eigh` for large matrices.

    Returns
    -------
    EigenSystem
        Values sorted ascending (stable), each eigenvector's largest-magnitude
        entry made positive.
    """
    A = as_symmetric(A)
    if method == "jacobi":
        w, V, _ = _jacobi(A)
    elif method == "lapack":
        w, V = np.linalg.eigh(A)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    order = np.argsort(w, kind="stable")
    return EigenSystem(w[order], _fix_signs(V[:, order]))


def kron_spectrum(eigP, eigQ):
    """Sorted eigenvalues of ``P kron Q`` from the factor spectra.

    Ties are resolved by ascending ``(j, i)``, with ``j`` indexing ``P``.
    """
    c, n = eigP.dim, eigQ.dim
    products = np.outer(eigP.values, eigQ.values).ravel()
    order = np.argsort(products, kind="stable")
    index_map = np.column_stack(np.divmod(order, n)).astype(np.intp)
    return KronSpectrum(products[order], index_map, n, c)


def kron_eigvec_apply(eigP, eigQ, M, transpose=False):
    """Apply ``V_P kron V_Q`` (or its transpose) to ``vec(M)`` in matrix form.

    With ``transpose=True`` this returns ``V_Q.T @ M @ V_P``; otherwise
    ``V_Q @ M @ V_P.T``. The ``nc x nc`` Kronecker matrix is never formed.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1 and eigP.dim == 1:
        M = M[:, None]
    if M.shape != (eigQ.dim, eigP.dim):
        raise ValueError(f"expected a {eigQ.dim}x{eigP.dim} matrix, got shape {M.shape}")
    if transpose:
        return eigQ.vectors.T @ M @ eigP.vectors
    return eigQ.vectors @ M @ eigP.vectors.T
