"""Achievable-rate analytics for the decoupled and coupled systems.

Sum rates come from the eigenvalues of the per-class SINR matrix
``sigma_s^2 H_eq^H K_nn^{-1} H_eq`` where ``K_nn`` is the exact covariance of
the equivalent noise (residual inter-class interference plus thermal noise);
a log-determinant evaluation of the same quantity is computed alongside as a
consistency check.  Lower bounds per detector follow the filtered per-stream
SINR, averaged over channel realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelRealization
from .dsd import DecoupledClass, DecoupledClassSet, interferer_matrix
from .errors import SingularMatrixError

__all__ = [
    "RateReport",
    "BoundReport",
    "class_noise_covariance",
    "coupled_sum_rate",
    "dsd_sum_rate",
    "linear_bound_rates",
    "sic_bound_rates",
    "linear_rate_lower_bound",
    "sic_rate_lower_bound",
    "appendix_a_invariance",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateReport:
    """Sum-rate breakdown of one realization (bits/s/Hz)."""

    per_class: tuple[float, ...]
    total: float
    total_logdet: float
    coupled: float
    eigenvalues: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class BoundReport:
    """Averaged per-stream achievable-rate lower bounds (bits/s/Hz)."""

    per_stream: tuple[np.ndarray, ...]
    per_user: tuple[tuple[float, ...], ...]
    per_class: tuple[float, ...]
    total: float


def class_noise_covariance(
    projector: np.ndarray, interferer: np.ndarray, sigma_s2: float, sigma_n2: float
) -> np.ndarray:
    """Equivalent-noise covariance ``sigma_s2 Q (sum H_m H_m^H) Q^H + sigma_n2 I``.

    ``interferer`` is the stacked channel of every other class; an empty
    matrix (single-class system) leaves pure thermal noise.
    """
    t = projector.shape[0]
    k = sigma_n2 * np.eye(t, dtype=np.complex128)
    if interferer.shape[1]:
        qh = projector @ interferer
        k = k + sigma_s2 * (qh @ qh.conj().T)
    return (k + k.conj().T) / 2.0


def _psd_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    sym = (matrix + matrix.conj().T) / 2.0
    return np.clip(np.linalg.eigvalsh(sym)[::-1], 0.0, None)


def coupled_sum_rate(h: np.ndarray, sigma_s2: float, sigma_n2: float) -> float:
    """Joint-detection baseline ``sum log2(1 + eig((sigma_s2/sigma_n2) H^H H))``."""
    h = np.asarray(h, dtype=np.complex128)
    if sigma_s2 == 0.0:
        return 0.0
    vals = _psd_eigenvalues((sigma_s2 / sigma_n2) * (h.conj().T @ h))
    return float(np.sum(np.log2(1.0 + vals)))


def _logdet_hermitian(matrix: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet((matrix + matrix.conj().T) / 2.0)
    if sign.real <= 0:
        raise SingularMatrixError("covariance is not positive definite")
    return logdet.real


def dsd_sum_rate(
    realization: ChannelRealization,
    decoupled_set: DecoupledClassSet,
    sigma_s2: float,
    sigma_n2: float,
    check_rtol: float = 1e-8,
) -> RateReport:
    """Sum rate offered by the decoupled system, with its log-det cross-check.

    Per class the eigenvalues of
    ``(s/n) H_eq^H [(s/n) Q T Q^H + I]^{-1} H_eq`` (T = interferer Gram) give
    the rate; the same rate evaluated as
    ``log2 det(K_y) - log2 det(K_n)`` must agree within ``check_rtol`` or a
    FloatingPointError is raised.  The coupled baseline is included.
    """
    if sigma_s2 == 0.0:
        zeros = tuple(0.0 for _ in decoupled_set.classes)
        empty = tuple(np.zeros(0) for _ in decoupled_set.classes)
        return RateReport(zeros, 0.0, 0.0, 0.0, empty)
    ratio = sigma_s2 / sigma_n2
    per_class = []
    eigen_lists = []
    total_logdet = 0.0
    for cls in decoupled_set.classes:
        tilde = interferer_matrix(realization, cls.class_index)
        h_eq = cls.equivalent_channel
        k_nn = class_noise_covariance(cls.projector, tilde, sigma_s2, sigma_n2)
        try:
            solved = np.linalg.solve(k_nn, h_eq)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("equivalent-noise covariance solve failed") from exc
        b_gram = sigma_s2 * (h_eq.conj().T @ solved)
        vals = _psd_eigenvalues(b_gram)
        rate = float(np.sum(np.log2(1.0 + vals)))
        k_y = sigma_s2 * (h_eq @ h_eq.conj().T) + k_nn
        rate_det = (_logdet_hermitian(k_y) - _logdet_hermitian(k_nn)) / LN2
        if abs(rate - rate_det) > check_rtol * max(1.0, abs(rate)):
            raise FloatingPointError(
                f"class {cls.class_index}: eigenvalue rate {rate} and log-det rate "
                f"{rate_det} disagree beyond rtol {check_rtol:g}"
            )
        per_class.append(rate)
        eigen_lists.append(vals)
        total_logdet += rate_det
    coupled = coupled_sum_rate(realization.h, sigma_s2, sigma_n2)
    return RateReport(
        tuple(per_class), float(sum(per_class)), float(total_logdet), coupled, tuple(eigen_lists)
    )


def _stream_sinrs(
    w: np.ndarray, h_eq: np.ndarray, k_nn: np.ndarray, sigma_s2: float
) -> np.ndarray:
    """Eq.-style per-stream SINR: |w_k h_k|^2 over intra-stream + filtered noise."""
    a = w @ h_eq
    signal = sigma_s2 * np.abs(np.diag(a)) ** 2
    intra = sigma_s2 * (np.sum(np.abs(a) ** 2, axis=1) - np.abs(np.diag(a)) ** 2)
    noise = np.abs(np.einsum("km,mn,kn->k", w, k_nn, w.conj()))
    return signal / (intra + noise)


def linear_bound_rates(
    h_eq: np.ndarray, k_nn: np.ndarray, kind: str, sigma_s2: float, sigma_n2: float
) -> np.ndarray:
    """Per-stream ``log2(1 + SINR)`` of a ZF/MMSE filter on one channel draw."""
    from .detect import linear_receive_matrix

    w = linear_receive_matrix(h_eq, sigma_n2 / sigma_s2, kind)
    return np.log2(1.0 + _stream_sinrs(w, h_eq, k_nn, sigma_s2))


def sic_bound_rates(
    h_eq: np.ndarray, k_nn: np.ndarray, sigma_s2: float, sigma_n2: float
) -> np.ndarray:
    """Layered SIC-MMSE bound on one channel draw.

    Each layer recomputes the MMSE filter on the remaining columns, counts
    the rate of the SINR-maximizing stream and removes its column (perfect
    cancellation is assumed for the bound).
    """
    from .detect import linear_receive_matrix

    h_eq = np.asarray(h_eq, dtype=np.complex128)
    t = h_eq.shape[1]
    rates = np.zeros(t)
    active = list(range(t))
    while active:
        h_act = h_eq[:, active]
        w = linear_receive_matrix(h_act, sigma_n2 / sigma_s2, "MMSE")
        sinrs = _stream_sinrs(w, h_act, k_nn, sigma_s2)
        local = int(np.argmax(sinrs))
        rates[active[local]] = np.log2(1.0 + sinrs[local])
        del active[local]
    return rates


def _per_stream_to_users(
    per_stream: np.ndarray, tx_antennas: Sequence[int]
) -> tuple[float, ...]:
    out = []
    offset = 0
    for n_t in tx_antennas:
        out.append(float(np.sum(per_stream[offset : offset + n_t])))
        offset += n_t
    return tuple(out)


def _averaged_bound(
    draws: Iterable[tuple[ChannelRealization, DecoupledClassSet]],
    rate_fn,
) -> BoundReport:
    sums: list[np.ndarray] | None = None
    topology = None
    count = 0
    for realization, decoupled_set in draws:
        topology = realization.topology
        per_class = []
        for cls in decoupled_set.classes:
            k_nn = class_noise_covariance(
                cls.projector, interferer_matrix(realization, cls.class_index),
                rate_fn.sigma_s2, rate_fn.sigma_n2,
            )
            per_class.append(rate_fn(cls, k_nn))
        if sums is None:
            sums = [np.array(r) for r in per_class]
        else:
            for acc, r in zip(sums, per_class):
                acc += r
        count += 1
    if not count:
        raise ValueError("at least one channel draw is required")
    per_stream = tuple(acc / count for acc in sums)
    per_user = tuple(
        _per_stream_to_users(per_stream[n], topology.tx_antennas[n])
        for n in range(topology.n_classes)
    )
    per_class_totals = tuple(float(np.sum(s)) for s in per_stream)
    return BoundReport(per_stream, per_user, per_class_totals, float(sum(per_class_totals)))


class _LinearBound:
    def __init__(self, kind, sigma_s2, sigma_n2):
        self.kind = kind
        self.sigma_s2 = sigma_s2
        self.sigma_n2 = sigma_n2

    def __call__(self, cls: DecoupledClass, k_nn: np.ndarray) -> np.ndarray:
        return linear_bound_rates(
            cls.equivalent_channel, k_nn, self.kind, self.sigma_s2, self.sigma_n2
        )


class _SicBound:
    def __init__(self, sigma_s2, sigma_n2):
        self.sigma_s2 = sigma_s2
        self.sigma_n2 = sigma_n2

    def __call__(self, cls: DecoupledClass, k_nn: np.ndarray) -> np.ndarray:
        return sic_bound_rates(cls.equivalent_channel, k_nn, self.sigma_s2, self.sigma_n2)


def linear_rate_lower_bound(
    draws: Iterable[tuple[ChannelRealization, DecoupledClassSet]],
    kind: str,
    sigma_s2: float,
    sigma_n2: float,
) -> BoundReport:
    """Expectation of the per-stream linear-detector bound over channel draws.

    ``draws`` yields (realization, decoupled_set) pairs; the caller controls
    how many realizations approximate the expectation.
    """
    return _averaged_bound(draws, _LinearBound(kind, sigma_s2, sigma_n2))


def sic_rate_lower_bound(
    draws: Iterable[tuple[ChannelRealization, DecoupledClassSet]],
    sigma_s2: float,
    sigma_n2: float,
) -> BoundReport:
    """Expectation of the layered SIC-MMSE bound over channel draws."""
    return _averaged_bound(draws, _SicBound(sigma_s2, sigma_n2))


def appendix_a_invariance(
    realization: ChannelRealization,
    decoupled_class: DecoupledClass,
    w: np.ndarray,
    sigma_s2: float,
    sigma_n2: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Check that an invertible linear filter leaves the class sum rate alone.

    Compares the eigenvalues of ``sigma_s2 H_eq^H K_nn^{-1} H_eq`` with those
    of the post-filter matrix built from ``A = W H_eq`` and
    ``K = W K_nn W^H``.  Returns both descending eigenvalue lists and their
    maximum relative difference.  A singular ``W`` raises instead of being
    silently pseudo-inverted.
    """
    w = np.asarray(w, dtype=np.complex128)
    if w.shape[0] != w.shape[1]:
        raise SingularMatrixError("filter must be square and invertible")
    k_nn = class_noise_covariance(
        decoupled_class.projector,
        interferer_matrix(realization, decoupled_class.class_index),
        sigma_s2,
        sigma_n2,
    )
    h_eq = decoupled_class.equivalent_channel
    before = _psd_eigenvalues(sigma_s2 * (h_eq.conj().T @ np.linalg.solve(k_nn, h_eq)))
    a_bar = w @ h_eq
    k_bar = w @ k_nn @ w.conj().T
    try:
        solved = np.linalg.solve((k_bar + k_bar.conj().T) / 2.0, a_bar)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("filtered noise covariance is singular") from exc
    after = _psd_eigenvalues(sigma_s2 * (a_bar.conj().T @ solved))
    denom = np.maximum(np.maximum(np.abs(before), np.abs(after)), 1e-300)
    max_rel = float(np.max(np.abs(before - after) / denom)) if before.size else 0.0
    return before, after, max_rel
