"""Hot detection loops with two interchangeable backends.

The successive-cancellation detectors spend essentially all Monte Carlo time
in two places: building the per-stage filter bank of a channel (one bank per
realization and ordering) and applying that bank to a batch of received
vectors (slice, cancel, repeat).  Both live here twice: a pure-numpy
reference implementation and a numba ``@njit`` twin.

The backend is selected by the environment variable ``DSDLAB_BACKEND``
(``numba``, ``numpy`` or ``auto``); the default prefers numba when it is
importable.  The two backends agree to floating-point rounding, not bit for
bit.  ``benchmarks/bench_detectors.py`` compares their throughput.

Filter banks depend only on the channel, the regularization and the
ordering, never on the received vector, so precomputing them per realization
is numerically identical to recomputing the stage filter for every vector.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import SingularMatrixError
from . import reference

__all__ = [
    "active_backend",
    "available_backends",
    "set_backend",
    "nearest_indices",
    "build_sic_bank",
    "build_mb_banks",
    "sic_apply",
    "mb_sic_apply",
    "warmup",
]

_IMPLS = {"numpy": reference}

try:  # pragma: no cover - exercised implicitly on import
    from . import jit as _jit

    _IMPLS["numba"] = _jit
except ImportError:  # numba not installed; numpy fallback only
    _jit = None

_active = "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    """Select the kernel backend; ``auto`` picks numba when available."""
    global _active
    if name == "auto":
        name = "numba" if "numba" in _IMPLS else "numpy"
    if name not in _IMPLS:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {available_backends()}"
        )
    _active = name
    return _active


set_backend(os.environ.get("DSDLAB_BACKEND", "auto"))


def nearest_indices(z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the closest constellation point per entry (ties: lowest index)."""
    return reference.nearest_indices(np.asarray(z), np.asarray(points))


def build_sic_bank(h: np.ndarray, sigma2: float, perm: np.ndarray):
    """Stage filter rows for one cancellation ordering.

    Returns ``(hp, filters)`` where ``hp = h[:, perm]`` and ``filters[i]`` is
    the row of the stage-``i`` linear filter (MMSE for ``sigma2 > 0``, ZF for
    ``sigma2 = 0``) recomputed on the not-yet-cancelled columns
    ``hp[:, i:]`` and aimed at the first of them.
    """
    h = np.ascontiguousarray(h, dtype=np.complex128)
    perm = np.ascontiguousarray(perm, dtype=np.int64)
    hp = np.ascontiguousarray(h[:, perm])
    if _active == "numba":
        filters, ok = _jit.build_sic_filters(hp, float(sigma2))
        if not ok:
            raise SingularMatrixError("SIC stage filter solve failed")
        return hp, filters
    return hp, reference.build_sic_filters(hp, float(sigma2))


def build_mb_banks(h: np.ndarray, sigma2: float, perms: np.ndarray):
    """Filter banks for every branch ordering; failed branches are dropped.

    Returns stacked ``(hps, filters, kept_perms)``.  Raises
    :class:`SingularMatrixError` only when every branch fails.
    """
    kept_h, kept_f, kept_p = [], [], []
    for perm in perms:
        try:
            hp, filt = build_sic_bank(h, sigma2, perm)
        except SingularMatrixError:
            continue
        kept_h.append(hp)
        kept_f.append(filt)
        kept_p.append(np.asarray(perm, dtype=np.int64))
    if not kept_h:
        raise SingularMatrixError("every multi-branch ordering failed")
    return np.stack(kept_h), np.stack(kept_f), np.stack(kept_p)


def sic_apply(y: np.ndarray, hp: np.ndarray, filters: np.ndarray, perm: np.ndarray, points: np.ndarray):
    """Run successive cancellation over a batch of received vectors.

    ``y`` has one received vector per row.  Returns ``(indices, residuals)``:
    detected constellation indices in natural column order, and the squared
    norm of the fully cancelled vector ``||y - H s_hat||^2`` per row.
    """
    y = np.ascontiguousarray(np.atleast_2d(y), dtype=np.complex128)
    args = (
        y,
        np.ascontiguousarray(hp, dtype=np.complex128),
        np.ascontiguousarray(filters, dtype=np.complex128),
        np.ascontiguousarray(perm, dtype=np.int64),
        np.ascontiguousarray(points, dtype=np.complex128),
    )
    if _active == "numba":
        return _jit.sic_apply(*args)
    return reference.sic_apply(*args)


def mb_sic_apply(y: np.ndarray, hps: np.ndarray, filters: np.ndarray, perms: np.ndarray, points: np.ndarray):
    """Run every branch's SIC and keep the minimum-residual candidate per row.

    Ties keep the earliest branch.  Returns ``(indices, residuals)`` like
    :func:`sic_apply`.
    """
    y = np.ascontiguousarray(np.atleast_2d(y), dtype=np.complex128)
    args = (
        y,
        np.ascontiguousarray(hps, dtype=np.complex128),
        np.ascontiguousarray(filters, dtype=np.complex128),
        np.ascontiguousarray(perms, dtype=np.int64),
        np.ascontiguousarray(points, dtype=np.complex128),
    )
    if _active == "numba":
        return _jit.mb_sic_apply(*args)
    return reference.mb_sic_apply(*args)


def warmup() -> None:
    """Force JIT compilation of the active backend on a tiny problem.

    Called before forking worker processes so children inherit compiled
    kernels instead of each paying the compile cost.
    """
    h = np.array([[1.0 + 0j, 0.2j], [0.1, 1.0 + 0j]])
    points = np.array([1.0 + 0j, -1.0 + 0j])
    perm = np.array([0, 1], dtype=np.int64)
    hp, filt = build_sic_bank(h, 0.1, perm)
    y = np.array([[1.0 + 0j, -1.0 + 0j]])
    sic_apply(y, hp, filt, perm, points)
    hps, filts, perms = build_mb_banks(h, 0.1, np.stack([perm, perm[::-1]]))
    mb_sic_apply(y, hps, filts, perms, points)
