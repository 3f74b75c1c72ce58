"""Pure-numpy kernel implementations.

These are the readable reference the numba twins are tested against; the
per-stage work is vectorized across the trial batch, so they stay usable
(if a few times slower) when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingularMatrixError


def nearest_indices(z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Closest-point index per entry; ties resolve to the lowest index."""
    dist = np.abs(z[..., None] - points)
    return np.argmin(dist, axis=-1).astype(np.int64)


def build_sic_filters(hp: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-stage filter rows for the column-permuted channel ``hp``.

    Stage i solves ``(Hr^H Hr + sigma2 I) x = e_0`` on the remaining columns
    ``Hr = hp[:, i:]`` and stores the row ``(Hr x)^H``, i.e. the first row of
    the stage's MMSE (or ZF when sigma2 = 0) filter.
    """
    m, t = hp.shape
    gram = hp.conj().T @ hp
    filters = np.empty((t, m), dtype=np.complex128)
    for i in range(t):
        u = t - i
        a = gram[i:, i:] + sigma2 * np.eye(u)
        e0 = np.zeros(u, dtype=np.complex128)
        e0[0] = 1.0
        try:
            x = np.linalg.solve(a, e0)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"SIC stage {i} filter solve failed") from exc
        filters[i] = (hp[:, i:] @ x).conj()
    return filters


def sic_apply(y, hp, filters, perm, points):
    n_trials, _ = y.shape
    t = hp.shape[1]
    out = np.empty((n_trials, t), dtype=np.int64)
    yc = y.copy()
    for i in range(t):
        z = yc @ filters[i]
        idx = nearest_indices(z, points)
        out[:, perm[i]] = idx
        yc -= points[idx][:, None] * hp[:, i][None, :]
    resid = np.sum(yc.real**2 + yc.imag**2, axis=1)
    return out, resid


def mb_sic_apply(y, hps, filters, perms, points):
    n_trials = y.shape[0]
    t = hps.shape[2]
    best = np.zeros((n_trials, t), dtype=np.int64)
    best_resid = np.full(n_trials, np.inf)
    for l in range(hps.shape[0]):
        cand, resid = sic_apply(y, hps[l], filters[l], perms[l], points)
        better = resid < best_resid
        best[better] = cand[better]
        best_resid[better] = resid[better]
    return best, best_resid
