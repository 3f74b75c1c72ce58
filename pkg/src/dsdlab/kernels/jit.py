"""Numba twins of the reference kernels.

Same stage arithmetic as :mod:`dsdlab.kernels.reference`, written as explicit
loops; the stage solve is Gaussian elimination with partial pivoting instead
of LAPACK so a singular stage reports through a flag instead of an exception.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _solve_in_place(a, x):
    """Solve ``a @ out = x`` in place; returns False on an exactly zero pivot."""
    n = a.shape[0]
    for k in range(n):
        p = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            mag = abs(a[i, k])
            if mag > best:
                best = mag
                p = i
        if best == 0.0:
            return False
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            for j in range(k + 1, n):
                a[i, j] -= f * a[k, j]
            x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        acc = x[k]
        for j in range(k + 1, n):
            acc -= a[k, j] * x[j]
        x[k] = acc / a[k, k]
    return True


@njit(cache=True)
def build_sic_filters(hp, sigma2):
    m, t = hp.shape
    filters = np.zeros((t, m), dtype=np.complex128)
    gram = np.empty((t, t), dtype=np.complex128)
    for a in range(t):
        for b in range(t):
            acc = 0j
            for j in range(m):
                acc += np.conj(hp[j, a]) * hp[j, b]
            gram[a, b] = acc
    for i in range(t):
        u = t - i
        mat = np.empty((u, u), dtype=np.complex128)
        for a in range(u):
            for b in range(u):
                mat[a, b] = gram[i + a, i + b]
            mat[a, a] += sigma2
        x = np.zeros(u, dtype=np.complex128)
        x[0] = 1.0
        if not _solve_in_place(mat, x):
            return filters, False
        for j in range(m):
            acc = 0j
            for a in range(u):
                acc += hp[j, i + a] * x[a]
            filters[i, j] = np.conj(acc)
    return filters, True


@njit(cache=True)
def _sic_single(y_row, yc, hp, filters, perm, points, out_row):
    m = y_row.shape[0]
    t = hp.shape[1]
    n_points = points.shape[0]
    for j in range(m):
        yc[j] = y_row[j]
    for i in range(t):
        z = 0j
        for j in range(m):
            z += filters[i, j] * yc[j]
        best = 0
        dz = z - points[0]
        best_d = dz.real * dz.real + dz.imag * dz.imag
        for p in range(1, n_points):
            dz = z - points[p]
            d = dz.real * dz.real + dz.imag * dz.imag
            if d < best_d:
                best_d = d
                best = p
        out_row[perm[i]] = best
        s = points[best]
        for j in range(m):
            yc[j] -= hp[j, i] * s
    resid = 0.0
    for j in range(m):
        resid += yc[j].real * yc[j].real + yc[j].imag * yc[j].imag
    return resid


@njit(cache=True)
def sic_apply(y, hp, filters, perm, points):
    n_trials, m = y.shape
    t = hp.shape[1]
    out = np.empty((n_trials, t), dtype=np.int64)
    resid = np.empty(n_trials, dtype=np.float64)
    yc = np.empty(m, dtype=np.complex128)
    for trial in range(n_trials):
        resid[trial] = _sic_single(y[trial], yc, hp, filters, perm, points, out[trial])
    return out, resid


@njit(cache=True)
def mb_sic_apply(y, hps, filters, perms, points):
    n_trials, m = y.shape
    n_branches = hps.shape[0]
    t = hps.shape[2]
    best = np.zeros((n_trials, t), dtype=np.int64)
    best_resid = np.full(n_trials, np.inf)
    cand = np.empty(t, dtype=np.int64)
    yc = np.empty(m, dtype=np.complex128)
    for trial in range(n_trials):
        for l in range(n_branches):
            r = _sic_single(y[trial], yc, hps[l], filters[l], perms[l], points, cand)
            if r < best_resid[trial]:
                best_resid[trial] = r
                for i in range(t):
                    best[trial, i] = cand[i]
    return best, best_resid
