"""Symbol mapping and the detector family.

Detectors work on an equivalent per-class channel after decoupling or on the
full coupled channel; both are just (m x t) complex matrices here.  Linear
detection is a filter-and-slice; SIC recomputes a linear filter on the
remaining columns at every stage, slices one symbol and cancels it; MB-SIC
runs SIC under several column orderings and keeps the candidate with the
smallest reconstruction residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, SingularMatrixError

__all__ = [
    "Constellation",
    "DetectorSpec",
    "FAMILIES",
    "slice_symbol",
    "linear_receive_matrix",
    "detect_linear",
    "detect_sic",
    "detect_mb_sic",
    "detect_coupled",
    "detect_indices_batch",
    "norm_descending_order",
    "branch_permutations",
]

FAMILIES = ("ZF", "MMSE", "SIC-ZF", "SIC-MMSE", "MB-SIC")
ORDERINGS = ("none", "norm-descending")
MODES = ("decoupled", "coupled")


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy complex constellation with index-encoded bit labels.

    Point ``i`` carries the bit pattern of ``i`` itself (``bits_per_symbol``
    bits, MSB first), so bit errors between two decisions are the popcount of
    the XOR of their indices.
    """

    name: str
    points: tuple[complex, ...]
    bits_per_symbol: int

    def __post_init__(self):
        if len(self.points) != 2**self.bits_per_symbol:
            raise ValueError("constellation size must be 2**bits_per_symbol")
        energy = sum(abs(p) ** 2 for p in self.points) / len(self.points)
        if abs(energy - 1.0) > 1e-9:
            raise ValueError(f"constellation must have unit average energy, got {energy}")

    @property
    def order(self) -> int:
        return len(self.points)

    def points_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.complex128)

    @staticmethod
    def qpsk() -> "Constellation":
        """Gray-labeled QPSK: bits (b1, b0) -> ((1-2*b1) + 1j*(1-2*b0)) / sqrt(2)."""
        scale = 1.0 / math.sqrt(2.0)
        points = tuple(
            complex((1 - 2 * b1) * scale, (1 - 2 * b0) * scale)
            for b1 in (0, 1)
            for b0 in (0, 1)
        )
        return Constellation("qpsk", points, 2)

    @staticmethod
    def bpsk() -> "Constellation":
        return Constellation("bpsk", (1.0 + 0j, -1.0 + 0j), 1)

    @staticmethod
    def from_name(name: str) -> "Constellation":
        try:
            return {"qpsk": Constellation.qpsk, "bpsk": Constellation.bpsk}[name.lower()]()
        except KeyError:
            raise ValueError(f"unknown constellation {name!r}") from None


@dataclass(frozen=True)
class DetectorSpec:
    """Configuration of one detector run.

    ``branches`` applies to MB-SIC only; ``None`` means one branch per
    transmit antenna of the processed channel.  MB-SIC always norm-orders its
    first branch; plain SIC defaults to norm ordering as well.
    """

    family: str
    mode: str = "decoupled"
    ordering: str = field(default="")
    branches: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown detector family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if self.ordering == "":
            default = "none" if self.family in ("ZF", "MMSE") else "norm-descending"
            object.__setattr__(self, "ordering", default)
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.family in ("ZF", "MMSE") and self.ordering != "none":
            raise ValueError(f"{self.family} does not take an ordering")
        if self.family == "MB-SIC" and self.ordering != "norm-descending":
            raise ValueError("MB-SIC requires norm-descending ordering on branch 1")
        if self.branches is not None:
            if self.family != "MB-SIC":
                raise ValueError("branches only applies to MB-SIC")
            if self.branches < 1:
                raise ValueError("branches must be at least 1")

    @property
    def label(self) -> str:
        if self.family == "MB-SIC" and self.branches is not None:
            return f"MB-SIC(L={self.branches})"
        return self.family

    @property
    def stage_sigma2_factor(self) -> float:
        """0 for ZF-style stage filters, 1 for MMSE-style ones."""
        return 0.0 if self.family in ("ZF", "SIC-ZF") else 1.0


def slice_symbol(z: complex, constellation: Constellation) -> complex:
    """Closest constellation point to ``z``; exact ties keep the lowest index."""
    points = constellation.points_array()
    return complex(points[kernels.nearest_indices(np.asarray(z), points)])


def norm_descending_order(h: np.ndarray) -> np.ndarray:
    """Column indices sorted by decreasing Euclidean norm (stable on ties)."""
    norms = np.sum(np.abs(np.asarray(h)) ** 2, axis=0)
    return np.argsort(-norms, kind="stable").astype(np.int64)


def branch_permutations(h: np.ndarray, branches: int) -> np.ndarray:
    """MB-SIC branch orderings: norm-descending first, then circular shifts.

    Branch l >= 2 rotates the natural column order left by l - 1 positions.
    """
    t = np.asarray(h).shape[1]
    if not 1 <= branches <= t:
        raise ValueError(f"branch count must lie in [1, {t}], got {branches}")
    perms = [norm_descending_order(h)]
    for shift in range(1, branches):
        perms.append(np.roll(np.arange(t, dtype=np.int64), -shift))
    return np.stack(perms)


def _resolve_ordering(h: np.ndarray, ordering) -> np.ndarray:
    t = h.shape[1]
    if isinstance(ordering, str):
        if ordering == "none":
            return np.arange(t, dtype=np.int64)
        if ordering == "norm-descending":
            return norm_descending_order(h)
        raise ValueError(f"unknown ordering {ordering!r}")
    perm = np.asarray(ordering, dtype=np.int64)
    if perm.shape != (t,) or not np.array_equal(np.sort(perm), np.arange(t)):
        raise ValueError("ordering must be a permutation of the column indices")
    return perm


def linear_receive_matrix(h_eq: np.ndarray, sigma2: float, kind: str) -> np.ndarray:
    """ZF or MMSE receive filter ``(H^H H [+ sigma2 I])^{-1} H^H``."""
    h_eq = np.asarray(h_eq, dtype=np.complex128)
    t = h_eq.shape[1]
    gram = h_eq.conj().T @ h_eq
    if kind == "MMSE":
        gram = gram + sigma2 * np.eye(t)
    elif kind != "ZF":
        raise ValueError(f"kind must be ZF or MMSE, got {kind!r}")
    try:
        return np.linalg.solve(gram, h_eq.conj().T)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{kind} filter is singular") from exc


def detect_linear(y: np.ndarray, w: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Component-wise slicing of the filtered vector ``w @ y``."""
    z = np.asarray(w) @ np.asarray(y, dtype=np.complex128)
    points = constellation.points_array()
    return points[kernels.nearest_indices(z, points)]


def detect_sic(
    y: np.ndarray,
    h_eq: np.ndarray,
    sigma2: float,
    constellation: Constellation,
    ordering="norm-descending",
    stage_filter: str = "MMSE",
) -> np.ndarray:
    """Successive interference cancellation on one received vector.

    At every stage the linear filter is recomputed on the not-yet-detected
    columns (MMSE by default, ZF when ``stage_filter='ZF'``), one symbol is
    sliced and its contribution subtracted.  The result is returned in
    natural antenna order regardless of the processing order.
    """
    h_eq = np.asarray(h_eq, dtype=np.complex128)
    perm = _resolve_ordering(h_eq, ordering)
    eff_sigma2 = 0.0 if stage_filter == "ZF" else float(sigma2)
    hp, filters = kernels.build_sic_bank(h_eq, eff_sigma2, perm)
    idx, _ = kernels.sic_apply(np.asarray(y, dtype=np.complex128), hp, filters, perm,
                               constellation.points_array())
    return constellation.points_array()[idx[0]]


def detect_mb_sic(
    y: np.ndarray,
    h_eq: np.ndarray,
    sigma2: float,
    constellation: Constellation,
    branches: int | None = None,
    stage_filter: str = "MMSE",
) -> np.ndarray:
    """Multi-branch SIC with minimum-residual candidate selection."""
    h_eq = np.asarray(h_eq, dtype=np.complex128)
    n_branches = h_eq.shape[1] if branches is None else branches
    perms = branch_permutations(h_eq, n_branches)
    eff_sigma2 = 0.0 if stage_filter == "ZF" else float(sigma2)
    hps, filters, kept = kernels.build_mb_banks(h_eq, eff_sigma2, perms)
    idx, _ = kernels.mb_sic_apply(np.asarray(y, dtype=np.complex128), hps, filters, kept,
                                  constellation.points_array())
    return constellation.points_array()[idx[0]]


def detect_coupled(
    y: np.ndarray,
    h: np.ndarray,
    sigma2: float,
    spec: DetectorSpec,
    constellation: Constellation,
) -> np.ndarray:
    """Apply a detector family to the full coupled system (no decoupling)."""
    idx = detect_indices_batch(np.atleast_2d(np.asarray(y, dtype=np.complex128)),
                               h, sigma2, spec, constellation)
    return constellation.points_array()[idx[0]]


def detect_indices_batch(
    y_batch: np.ndarray,
    h_eq: np.ndarray,
    sigma2: float,
    spec: DetectorSpec,
    constellation: Constellation,
) -> np.ndarray:
    """Detect a batch of received vectors on one channel; returns point indices.

    This is the Monte Carlo workhorse: ``y_batch`` is (trials, m), the result
    (trials, t).  The channel is either a decoupled class channel or the full
    coupled matrix, chosen by the caller.
    """
    h_eq = np.asarray(h_eq, dtype=np.complex128)
    y_batch = np.ascontiguousarray(np.atleast_2d(y_batch), dtype=np.complex128)
    if y_batch.shape[1] != h_eq.shape[0]:
        raise DimensionError(
            f"received batch {y_batch.shape} does not match channel {h_eq.shape}"
        )
    points = constellation.points_array()
    eff_sigma2 = float(sigma2) * spec.stage_sigma2_factor
    if spec.family in ("ZF", "MMSE"):
        w = linear_receive_matrix(h_eq, sigma2, spec.family)
        z = y_batch @ w.T
        return kernels.nearest_indices(z, points)
    if spec.family in ("SIC-ZF", "SIC-MMSE"):
        perm = _resolve_ordering(h_eq, spec.ordering)
        hp, filters = kernels.build_sic_bank(h_eq, eff_sigma2, perm)
        idx, _ = kernels.sic_apply(y_batch, hp, filters, perm, points)
        return idx
    if spec.family == "MB-SIC":
        n_branches = h_eq.shape[1] if spec.branches is None else spec.branches
        perms = branch_permutations(h_eq, n_branches)
        hps, filters, kept = kernels.build_mb_banks(h_eq, eff_sigma2, perms)
        idx, _ = kernels.mb_sic_apply(y_batch, hps, filters, kept, points)
        return idx
    raise ValueError(f"unknown detector family {spec.family!r}")
