"""Exact solvers for multi-class approximate volume regularization.

The constrained problem is

    min_H  ||Y - H||_F^2 + gamma * tr(H' Q H P)   s.t.  ||H||_F = tau

and the unconstrained problem drops the norm constraint. Writing
``h = vec(H)``, the Hessian is ``gamma * (P kron Q)``, whose eigenpairs come
from the eigenpairs of ``P`` and ``Q`` separately. The Lagrange multiplier
``rho`` of the sphere constraint is the smallest root of the secular function

    g(rho) = sum_{k >= k0} z_k^2 / (gamma * lam_k - rho)^2 - tau^2

with ``z = vec(V_Q' Y V_P)`` rearranged to follow the sorted spectrum
``lam_k`` of ``P kron Q`` and ``k0`` the first index with ``z_k != 0``. The root
is bracketed by ``[gamma * lam_k0 - ||y|| / tau, gamma * lam_k0)`` and found
by bisection.
"""
import hashlib
import math
import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .linalg import as_symmetric, kron_eigvec_apply, kron_spectrum, sym_eig

__all__ = [
    "LabelMatrix",
    "SolverConfig",
    "Solution",
    "SolverError",
    "EigenCache",
    "volume_approx",
    "objective",
    "secular_g",
    "solve",
    "solve_constrained",
    "solve_unconstrained",
    "solve_identity_P",
    "solve_binary",
    "apply_class_balance",
    "lgc",
]

ZERO_TOL = 1e-12


class SolverError(RuntimeError):
    """Root isolation failed; ``bracket`` holds the last ``(lo, hi)``."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


@dataclass
class LabelMatrix:
    """Label indicator matrix with entries in {-1, 0, 1}.

    ``labeled_mask[i, j]`` marks positions whose value was revealed; it must
    cover every nonzero entry. When omitted it defaults to whole rows that
    contain a nonzero entry.
    """

    entries: np.ndarray
    labeled_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if not np.all(np.isin(Y, (-1.0, 0.0, 1.0))):
            raise ValueError("label matrix entries must be -1, 0 or 1")
        if self.labeled_mask is None:
            rows = np.any(Y != 0, axis=1)
            mask = np.repeat(rows[:, None], Y.shape[1], axis=1)
        else:
            mask = np.asarray(self.labeled_mask, dtype=bool)
            if mask.shape != Y.shape:
                raise ValueError(f"mask shape {mask.shape} differs from entries {Y.shape}")
            if np.any((Y != 0) & ~mask):
                raise ValueError("labeled_mask must cover every nonzero entry")
        self.entries = Y
        self.labeled_mask = mask

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def c(self):
        return self.entries.shape[1]

    @classmethod
    def from_classes(cls, n, c, indices, classes, negatives=False):
        """One-hot rows for ``indices`` with 1-based ``classes``; -1 elsewhere in
        labeled rows when ``negatives`` is set."""
        Y = np.zeros((n, c))
        indices = np.asarray(indices, dtype=np.intp)
        if negatives:
            Y[indices] = -1.0
        Y[indices, np.asarray(classes, dtype=np.intp) - 1] = 1.0
        mask = np.zeros((n, c), dtype=bool)
        mask[indices] = True
        return cls(Y, mask)


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 99.0
    tau: float = 1.0
    mode: str = "constrained"
    balance_gamma: float = 0.0
    root_tol: float = 1e-12
    max_bisect_iters: int = 300
    zero_tol: float = ZERO_TOL

    def __post_init__(self):
        if self.mode not in ("constrained", "unconstrained"):
            raise ValueError(f"mode must be 'constrained' or 'unconstrained', got {self.mode!r}")
        if self.mode == "constrained":
            if not self.gamma > 0:
                raise ValueError("gamma must be positive")
            if not self.tau > 0:
                raise ValueError("tau must be positive for constrained solves")
        elif not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.balance_gamma >= 0:
            raise ValueError("balance_gamma must be nonnegative")


@dataclass
class Solution:
    """Solver output.

    ``k0`` is 0-based into the sorted Kronecker spectrum. Unconstrained solves
    report ``rho = -1``, ``k0 = 0``, ``bracket = None`` and zero iterations.
    """

    H: np.ndarray
    rho: float
    g_residual: float
    k0: int
    bracket: Optional[Tuple[float, float]]
    iterations: int


class EigenCache:
    """Eigensystems keyed by matrix content.

    Lookups are lock-free; insertion takes a lock so concurrent writers
    never duplicate work on the same key.
    """

    def __init__(self, method="jacobi"):
        self.method = method
        self._eig = {}
        self._kron = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(A):
        A = np.ascontiguousarray(A, dtype=float)
        return (A.shape, hashlib.blake2b(A.tobytes(), digest_size=16).hexdigest())

    def eig(self, A):
        k = self.key(A)
        hit = self._eig.get(k)
        if hit is not None:
            return hit
        with self._lock:
            if k not in self._eig:
                self._eig[k] = sym_eig(A, method=self.method)
            return self._eig[k]

    def factors(self, P, Q):
        """``(eigP, eigQ, kron)`` for the pair, all cached."""
        kp, kq = self.key(P), self.key(Q)
        eigP, eigQ = self.eig(P), self.eig(Q)
        hit = self._kron.get((kp, kq))
        if hit is None:
            with self._lock:
                hit = self._kron.setdefault((kp, kq), kron_spectrum(eigP, eigQ))
        return eigP, eigQ, hit

    def clear(self):
        with self._lock:
            self._eig.clear()
            self._kron.clear()

    def __len__(self):
        return len(self._eig)


default_cache = EigenCache()


def _label_array(Y):
    Y = getattr(Y, "entries", Y)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if not np.all(np.isfinite(Y)):
        raise ValueError("label matrix has non-finite entries")
    return Y


def _check_dims(P, Q, Y):
    if Y.shape != (Q.shape[0], P.shape[0]):
        raise ValueError(
            f"Y has shape {Y.shape}; expected ({Q.shape[0]}, {P.shape[0]}) from Q and P"
        )


def volume_approx(H, P, Q):
    """``tr(H' Q H P) / ||H||_F^2``; scale invariant, undefined for ``H = 0``."""
    H = _label_array(H)
    P, Q = as_symmetric(P, "P"), as_symmetric(Q, "Q")
    _check_dims(P, Q, H)
    norm2 = float(np.sum(H * H))
    if norm2 == 0.0:
        raise ValueError("volume approximation is undefined for H = 0")
    return float(np.sum(H * (Q @ H @ P))) / norm2


def objective(H, Y, P, Q, gamma):
    """``||Y - H||_F^2 + gamma * tr(H' Q H P)``."""
    H, Y = _label_array(H), _label_array(Y)
    P, Q = np.asarray(P, dtype=float), np.asarray(Q, dtype=float)
    return float(np.sum((Y - H) ** 2) + gamma * np.sum(H * (Q @ H @ P)))


def _first_nonzero(z, zero_tol):
    """Index of the first coordinate that is nonzero relative to ``||z||``."""
    nz = np.flatnonzero(np.abs(z) > zero_tol * np.linalg.norm(z))
    if nz.size == 0:
        raise ValueError("no labeled information: Y is all zero")
    return int(nz[0])


def _g(rho, z2, shifted):
    return float(np.sum(z2 / (shifted - rho) ** 2))


def secular_g(rho, z, kron, gamma, tau, k0):
    """Secular function ``sum_{k>=k0} z_k^2 / (gamma*lam_k - rho)^2 - tau^2``.

    ``z`` follows the sorted order of ``kron`` (a :class:`KronSpectrum` or a
    plain array of sorted eigenvalues). Strictly increasing for ``rho`` below
    the pole ``gamma * lam_k0``; evaluating at or past the pole is an error.
    """
    lam = np.asarray(getattr(kron, "values", kron), dtype=float)
    z = np.asarray(z, dtype=float)
    pole = gamma * lam[k0]
    if not rho < pole:
        raise ValueError(f"rho={rho!r} is not below the pole gamma*lam_k0={pole!r}")
    return _g(rho, z[k0:] ** 2, gamma * lam[k0:]) - tau**2


def _find_root(z2, shifted, ynorm, tau, cfg):
    """Bisection for the root of g on ``[pole - ||y||/tau, pole)``.

    ``shifted`` holds ``gamma * lam_k`` for ``k >= k0`` (ascending), ``z2`` the
    matching squared coordinates. Keeps ``g(lo) <= 0 < g(hi)`` with
    ``g(pole) = +inf``. Returns ``(rho, g(rho), iterations, rho0)``.
    """
    pole = shifted[0]
    tau2 = tau * tau
    rho0 = pole - ynorm / tau
    lo, hi = rho0, pole
    g_lo, g_hi = _g(lo, z2, shifted) - tau2, math.inf
    if g_lo >= 0.0:
        # g(rho0) <= 0 holds exactly; equality means rho0 is the root
        return lo, g_lo, 0, rho0
    for it in range(1, cfg.max_bisect_iters + 1):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g_mid = _g(mid, z2, shifted) - tau2
        if abs(g_mid) <= cfg.root_tol * tau2:
            return mid, g_mid, it, rho0
        if g_mid > 0.0:
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
        if hi - lo <= cfg.root_tol * max(1.0, abs(mid)):
            break
    else:
        raise SolverError(
            f"bisection did not converge in {cfg.max_bisect_iters} iterations", bracket=(lo, hi)
        )
    if abs(g_hi) < abs(g_lo):
        return hi, g_hi, it, rho0
    return lo, g_lo, it, rho0


def solve_constrained(P, Q, Y, cfg, cache=None):
    """Global minimizer of the sphere-constrained problem ``||H||_F = tau``.

    Coordinates before ``k0`` (those with ``z_k = 0`` in the spectral basis)
    are set to zero.

    Parameters
    ----------
    P : array_like, shape (c, c)
        Symmetric class-relation matrix, positive definite.
    Q : array_like, shape (n, n)
        Symmetric positive semidefinite point-relation matrix (e.g. a graph
        Laplacian).
    Y : array_like or LabelMatrix, shape (n, c)
        Label indicator matrix; must not be all zero.
    cfg : SolverConfig
    cache : EigenCache, optional
        Defaults to the module-level cache.

    Returns
    -------
    Solution
    """
    cache = default_cache if cache is None else cache
    P, Q, Y = as_symmetric(P, "P"), as_symmetric(Q, "Q"), _label_array(Y)
    _check_dims(P, Q, Y)
    ynorm = float(np.linalg.norm(Y))
    if ynorm == 0.0:
        raise ValueError("no labeled information: Y is all zero")

    eigP, eigQ, kron = cache.factors(P, Q)
    Z = kron_eigvec_apply(eigP, eigQ, Y, transpose=True)
    flat = kron.flat_index
    z = Z.ravel(order="F")[flat]
    k0 = _first_nonzero(z, cfg.zero_tol)

    shifted = cfg.gamma * kron.values
    z2 = z[k0:] ** 2
    rho, g_rho, iters, rho0 = _find_root(z2, shifted[k0:], ynorm, cfg.tau, cfg)

    coef = np.zeros(z.size)
    coef[k0:] = z[k0:] / (shifted[k0:] - rho)
    C = np.empty(z.size)
    C[flat] = coef
    H = kron_eigvec_apply(eigP, eigQ, C.reshape(Z.shape, order="F"))
    return Solution(H, float(rho), float(g_rho), k0, (float(rho0), float(shifted[k0])), iters)


def solve_unconstrained(P, Q, Y, cfg, cache=None):
    """Minimizer of ``||Y - H||_F^2 + gamma tr(H' Q H P)``, i.e. the fixed
    multiplier ``rho = -1``: ``vec(H) = (gamma P kron Q + I)^-1 vec(Y)``."""
    cache = default_cache if cache is None else cache
    P, Q, Y = as_symmetric(P, "P"), as_symmetric(Q, "Q"), _label_array(Y)
    _check_dims(P, Q, Y)
    if cfg.gamma == 0:
        return Solution(Y.copy(), -1.0, 0.0, 0, None, 0)
    eigP, eigQ, _ = cache.factors(P, Q)
    Z = kron_eigvec_apply(eigP, eigQ, Y, transpose=True)
    denom = cfg.gamma * np.outer(eigQ.values, eigP.values) + 1.0
    H = kron_eigvec_apply(eigP, eigQ, Z / denom)
    return Solution(H, -1.0, 0.0, 0, None, 0)


def solve_identity_P(Q, Y, cfg, cache=None):
    """Fast path for ``P = I_c`` using only the eigensystem of ``Q``.

    With ``A = V_Q' Y`` the stationary solution is
    ``H = V_Q (gamma Lam_Q - rho I)^-1 A``, and its squared norm at ``rho`` is
    ``sum_i |A_i|^2 / (gamma lam_i - rho)^2`` where ``A_i`` is the i-th row.
    The secular coordinates are therefore the row norms of ``A``. Honors
    ``cfg.mode``.
    """
    cache = default_cache if cache is None else cache
    Q, Y = as_symmetric(Q, "Q"), _label_array(Y)
    if Y.shape[0] != Q.shape[0]:
        raise ValueError(f"Y has {Y.shape[0]} rows; Q is {Q.shape[0]}x{Q.shape[0]}")
    if cfg.mode == "unconstrained":
        if cfg.gamma == 0:
            return Solution(Y.copy(), -1.0, 0.0, 0, None, 0)
        eigQ = cache.eig(Q)
        A = eigQ.vectors.T @ Y
        H = eigQ.vectors @ (A / (cfg.gamma * eigQ.values + 1.0)[:, None])
        return Solution(H, -1.0, 0.0, 0, None, 0)

    ynorm = float(np.linalg.norm(Y))
    if ynorm == 0.0:
        raise ValueError("no labeled information: Y is all zero")
    eigQ = cache.eig(Q)
    A = eigQ.vectors.T @ Y
    z = np.sqrt(np.sum(A * A, axis=1))
    k0 = _first_nonzero(z, cfg.zero_tol)
    shifted = cfg.gamma * eigQ.values
    rho, g_rho, iters, rho0 = _find_root(z[k0:] ** 2, shifted[k0:], ynorm, cfg.tau, cfg)
    scale = np.zeros_like(shifted)
    scale[k0:] = 1.0 / (shifted[k0:] - rho)
    H = eigQ.vectors @ (A * scale[:, None])
    return Solution(H, float(rho), float(g_rho), k0, (float(rho0), float(shifted[k0])), iters)


def solve_binary(Q, y, cfg, cache=None):
    """Binary soft response vector for labels ``y`` in {-1, 0, 1}.

    This is the single-column case of :func:`solve_identity_P`; ``sign(h)``
    gives the predicted labels.
    """
    y = np.asarray(y, dtype=float).ravel()
    return solve_identity_P(Q, y[:, None], cfg, cache=cache).H[:, 0]


def apply_class_balance(Q, gamma, balance_gamma):
    """Fold a class-balance penalty into ``Q``.

    Returns ``(Q + (balance_gamma / gamma) * 11'/n, gamma)``. The regularizer
    then gains ``(balance_gamma / n) * s' P s`` with ``s = H' 1`` the per-class
    total responses, so large totals are discouraged while ``P kron Q``
    keeps its Kronecker structure.

    Note: this particular formula is our own choice; the published method only
    describes the goal of balancing the class totals.
    """
    Q = as_symmetric(Q, "Q")
    if balance_gamma < 0:
        raise ValueError("balance_gamma must be nonnegative")
    if balance_gamma == 0:
        return Q, gamma
    if not gamma > 0:
        raise ValueError("class balance needs gamma > 0")
    n = Q.shape[0]
    return Q + (balance_gamma / gamma) / n * np.ones((n, n)), gamma


def solve(P, Q, Y, cfg, cache=None):
    """Dispatch on ``cfg.mode`` after applying class balance.

    ``P=None`` selects the identity fast path.
    """
    if cfg.balance_gamma:
        Q, _ = apply_class_balance(Q, cfg.gamma, cfg.balance_gamma)
    if P is None:
        return solve_identity_P(Q, Y, cfg, cache=cache)
    if cfg.mode == "unconstrained":
        return solve_unconstrained(P, Q, Y, cfg, cache=cache)
    return solve_constrained(P, Q, Y, cfg, cache=cache)


def lgc(Q, Y, gamma):
    """Local and global consistency baseline: solve ``(I + gamma Q) H = Y``.

    Uses a direct linear solve, independent of the spectral path.
    """
    Q, Y = as_symmetric(Q, "Q"), _label_array(Y)
    return np.linalg.solve(np.eye(Q.shape[0]) + gamma * Q, Y)
