"""Per-class decoupling of the coupled uplink channel.

The decoupler inverts the composite channel with MMSE regularization,
partitions the rows of the inverse by user class, and orthonormalizes each
block with a QR factorization.  The resulting row-orthonormal projector
``Q_n`` (approximately) annihilates every other class's channel, turning the
joint system into N parallel square single-class systems with equivalent
channel ``Q_n @ H_n``.  An SVD variant that nulls interference exactly (at a
higher equivalent dimension) is provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import DimensionError
from .numerics import (
    PIVOT_RTOL,
    RANK_RTOL,
    left_null_space_basis,
    qr_row_basis,
    regularized_pseudo_inverse,
)

__all__ = [
    "DecoupledClass",
    "DecoupledClassSet",
    "interferer_matrix",
    "decouple_qr",
    "decouple_svd",
    "project_received",
    "residual_metric",
]


@dataclass(frozen=True)
class DecoupledClass:
    """Projector and equivalent square channel of one user class."""

    class_index: int
    projector: np.ndarray
    equivalent_channel: np.ndarray
    triangular_factor: np.ndarray


@dataclass(frozen=True)
class DecoupledClassSet:
    """All per-class decouplers of one realization, plus the regularization used."""

    classes: tuple[DecoupledClass, ...]
    sigma2: float

    def __len__(self) -> int:
        return len(self.classes)

    def __getitem__(self, index: int) -> DecoupledClass:
        return self.classes[index]


def interferer_matrix(realization: ChannelRealization, class_index: int) -> np.ndarray:
    """Channel of everyone except class ``class_index``: ``[H_1 .. H_{n-1} H_{n+1} .. H_N]``.

    Class order is preserved; a single-class system yields an empty
    (n_rx, 0) matrix.
    """
    start, stop = realization.topology.class_column_range(class_index)
    h = realization.h
    return np.hstack([h[:, :start], h[:, stop:]])


def decouple_qr(
    realization: ChannelRealization, sigma2: float, pivot_rtol: float = PIVOT_RTOL
) -> DecoupledClassSet:
    """Channel-inversion + QR decoupler.

    Computes ``H^+ = H^H (H H^H + sigma2 I)^{-1}``, splits its rows into
    per-class blocks and factors each block as ``R_n @ Q_n``; ``Q_n`` is the
    class projector and ``Q_n @ H_n`` its equivalent channel.  With
    ``sigma2 = 0`` and a full-column-rank H the rows of each block span the
    left null space of the interferer matrix, so the nulling is exact.
    """
    topo = realization.topology
    if topo.n_tx > topo.n_rx:
        raise DimensionError("transmit dimension exceeds receive dimension")
    h_pinv = regularized_pseudo_inverse(realization.h, sigma2)
    classes = []
    for n in range(topo.n_classes):
        start, stop = topo.class_column_range(n)
        r, q = qr_row_basis(h_pinv[start:stop, :], pivot_rtol)
        h_eq = q @ realization.class_channel(n)
        classes.append(DecoupledClass(n, q, h_eq, r))
    return DecoupledClassSet(tuple(classes), float(sigma2))


def decouple_svd(
    realization: ChannelRealization, rank_rtol: float = RANK_RTOL
) -> list[tuple[np.ndarray, np.ndarray]]:
    """SVD decoupler: exact left-null-space projectors.

    Returns one ``(A_n, A_n @ H_n)`` pair per class, where the rows of
    ``A_n`` span the left null space of the interferer matrix, so
    ``A_n @ interferer = 0`` regardless of any regularization.  The
    equivalent channel is (n_rx - rank) x n_t_class, taller than the square
    QR-variant one.
    """
    out = []
    for n in range(realization.topology.n_classes):
        basis = left_null_space_basis(interferer_matrix(realization, n), rank_rtol)
        if basis.shape[0] == 0:
            raise DimensionError(f"class {n}: interferer left null space is empty")
        out.append((basis, basis @ realization.class_channel(n)))
    return out


def project_received(y: np.ndarray, projector: np.ndarray) -> np.ndarray:
    """Equivalent received vector of one class: ``Q_n @ y``."""
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[-1] != projector.shape[1] and y.shape[0] != projector.shape[1]:
        raise DimensionError(
            f"received vector of length {y.shape} does not match projector {projector.shape}"
        )
    return projector @ y


def residual_metric(
    decoupled_set: DecoupledClassSet, realization: ChannelRealization
) -> np.ndarray:
    """Per-class residual interference ``||Q_n @ interferer||_F / ||interferer||_F``.

    Zero by convention when a class has no interferers.
    """
    metrics = np.zeros(len(decoupled_set))
    for n, cls in enumerate(decoupled_set.classes):
        tilde = interferer_matrix(realization, n)
        denom = np.linalg.norm(tilde)
        if denom > 0:
            metrics[n] = np.linalg.norm(cls.projector @ tilde) / denom
    return metrics
