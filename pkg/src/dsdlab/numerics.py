"""Dense complex-matrix kernels used by the decoupler and the rate analytics.

All operations are pure functions over 2-D ``complex128`` arrays and are safe
to call concurrently on shared read-only inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionError,
    NotHermitianError,
    RankDeficientError,
    SingularMatrixError,
)

__all__ = [
    "RANK_RTOL",
    "qr_row_basis",
    "regularized_pseudo_inverse",
    "hermitian_eigenvalues",
    "left_null_space_basis",
]

#: Relative threshold below which a singular value counts as zero.
RANK_RTOL = 1e-10

#: Relative threshold below which a QR diagonal pivot flags rank deficiency.
PIVOT_RTOL = 1e-12


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def qr_row_basis(m, pivot_rtol: float = PIVOT_RTOL):
    """Factor a wide full-row-rank matrix as ``M = R @ Q`` with orthonormal rows in Q.

    Computed as the (Householder) QR decomposition of ``M^H`` transposed back,
    so ``R`` comes out lower triangular.  The rows of ``Q`` form an orthonormal
    basis of the row space of ``M``; that is the only property consumers rely
    on, the triangular shape of ``R`` is incidental.

    Parameters
    ----------
    m : array_like, shape (rows, cols) with rows <= cols
        Input matrix, full row rank.
    pivot_rtol : float
        A diagonal pivot of magnitude below ``pivot_rtol * ||M||_F`` raises
        :class:`RankDeficientError`.

    Returns
    -------
    (r, q) : ndarray pair
        ``r`` is (rows, rows) lower triangular, ``q`` is (rows, cols) with
        ``q @ q^H = I`` and ``r @ q = m``.
    """
    a = _as_matrix(m)
    rows, cols = a.shape
    if rows > cols:
        raise DimensionError(f"need rows <= cols, got {rows}x{cols}")
    q_t, r_t = np.linalg.qr(a.conj().T)
    fro = np.linalg.norm(a)
    if rows and np.min(np.abs(np.diag(r_t))) <= pivot_rtol * fro:
        raise RankDeficientError(
            f"pivot below {pivot_rtol:g} * ||M||_F: matrix is rank deficient"
        )
    return r_t.conj().T, q_t.conj().T


def regularized_pseudo_inverse(h, sigma2: float) -> np.ndarray:
    """MMSE-regularized channel inversion ``H^H (H H^H + sigma2 I)^{-1}``.

    Evaluated through the push-through identity as
    ``(H^H H + sigma2 I)^{-1} H^H`` so the solve stays at the (smaller)
    column dimension; both forms agree exactly in exact arithmetic.  For
    ``sigma2 = 0`` the result is the left inverse of a full-column-rank H.

    Parameters
    ----------
    h : array_like, shape (n_r, n_t) with n_t <= n_r
    sigma2 : float
        Nonnegative regularization, the noise-to-signal ratio.
    """
    a = _as_matrix(h)
    n_r, n_t = a.shape
    if n_t > n_r:
        raise DimensionError(f"need n_t <= n_r, got {n_r}x{n_t}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    gram = a.conj().T @ a
    gram[np.diag_indices(n_t)] += sigma2
    try:
        return np.linalg.solve(gram, a.conj().T)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"channel inversion failed: {exc}") from exc


def hermitian_eigenvalues(a, hermitian_rtol: float = 1e-8) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, sorted in descending order.

    The input is symmetrized as ``(A + A^H) / 2`` before factoring; inputs
    further than ``hermitian_rtol * ||A||_F`` from Hermitian are rejected.
    """
    m = _as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    fro = np.linalg.norm(m)
    if np.linalg.norm(m - m.conj().T) > hermitian_rtol * fro:
        raise NotHermitianError(
            f"||A - A^H|| exceeds {hermitian_rtol:g} * ||A||_F"
        )
    sym = (m + m.conj().T) / 2.0
    return np.linalg.eigvalsh(sym)[::-1]


def left_null_space_basis(m, rank_rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal rows spanning the left null space of a tall matrix.

    Returns ``U0^H`` from the SVD ``M = U S V^H``, shape (n_r - r, n_r) where
    ``r`` is the numerical rank (singular values above ``rank_rtol`` times the
    largest).  ``basis @ m`` vanishes to machine precision.
    """
    a = _as_matrix(m)
    n_r, c = a.shape
    if c >= n_r:
        raise DimensionError(f"need cols < rows, got {n_r}x{c}")
    u, s, _ = np.linalg.svd(a)
    rank = int(np.count_nonzero(s > rank_rtol * s[0])) if s.size else 0
    return u[:, rank:].conj().T
