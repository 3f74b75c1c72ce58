"""Heterogeneous-network uplink channel synthesis.

Small-scale fading follows the Kronecker model with exponential antenna
correlation; large-scale effects combine distance path loss with log-normal
shadowing, drawn per (user, radio-head) link.  The receive side is an
arbitrary mix of ``n_bs`` base-station antennas and ``n_heads`` remote radio
heads of ``antennas_per_head`` antennas each, so the total receive dimension
is ``n_rx = n_bs + n_heads * antennas_per_head``.

All sampling takes an explicit :class:`numpy.random.Generator`; distinct
realizations can be produced concurrently from independent substreams (see
:func:`substream`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidCorrelationError

__all__ = [
    "SystemTopology",
    "HeadOverrides",
    "LargeScaleProfile",
    "ChannelRealization",
    "substream",
    "complex_normal",
    "exp_correlation",
    "correlation_sqrt",
    "path_gain",
    "shadow_gain",
    "sample_large_scale",
    "sample_user_head_channel",
    "assemble_realization",
]


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Deterministic, independent random stream keyed by (master_seed, *path).

    Streams are counter-based (Philox) seeded through ``SeedSequence`` on the
    full key tuple, so any (seed, indices) pair maps to the same stream on
    every platform and regardless of creation order.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(master_seed),) + tuple(int(p) for p in path)))
    )


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries, zero mean, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass(frozen=True)
class SystemTopology:
    """User-class and antenna layout of one cell.

    ``tx_antennas[n][k]`` is the antenna count of user ``k`` in class ``n``;
    classes are indexed 0-based throughout.
    """

    users_per_class: tuple[int, ...]
    tx_antennas: tuple[tuple[int, ...], ...]
    n_bs: int
    n_heads: int
    antennas_per_head: int

    def __post_init__(self):
        if not self.users_per_class:
            raise ValueError("at least one user class required")
        if len(self.tx_antennas) != len(self.users_per_class):
            raise ValueError("tx_antennas must list every class")
        for n, (count, antennas) in enumerate(zip(self.users_per_class, self.tx_antennas)):
            if count < 1:
                raise ValueError(f"class {n} has no users")
            if len(antennas) != count:
                raise ValueError(f"class {n}: antenna list does not match user count")
            if any(a < 1 for a in antennas):
                raise ValueError(f"class {n}: every user needs at least one antenna")
        if self.n_bs < 0 or self.n_heads < 0 or self.antennas_per_head < 0:
            raise ValueError("antenna counts must be nonnegative")
        if self.n_heads > 0 and self.antennas_per_head < 1:
            raise ValueError("radio heads need at least one antenna each")
        if self.n_rx < 1:
            raise ValueError("system has no receive antennas")
        if self.n_tx > self.n_rx:
            raise DimensionError(
                f"transmit dimension {self.n_tx} exceeds receive dimension {self.n_rx}"
            )

    @classmethod
    def create(
        cls,
        users_per_class: int | Sequence[int],
        tx_antennas_per_user: int | Sequence[int] | Sequence[Sequence[int]],
        n_bs: int,
        n_heads: int = 0,
        antennas_per_head: int = 0,
        n_classes: int | None = None,
    ) -> "SystemTopology":
        """Build a topology from the common scalar shorthands."""
        if isinstance(users_per_class, int):
            if n_classes is None:
                raise ValueError("n_classes required when users_per_class is a scalar")
            users = (users_per_class,) * n_classes
        else:
            users = tuple(int(u) for u in users_per_class)
            if n_classes is not None and n_classes != len(users):
                raise ValueError("n_classes disagrees with users_per_class")
        if isinstance(tx_antennas_per_user, int):
            tx = tuple((tx_antennas_per_user,) * u for u in users)
        else:
            spec = list(tx_antennas_per_user)
            if len(spec) != len(users):
                raise ValueError("tx_antennas_per_user must cover every class")
            tx = tuple(
                (int(item),) * users[n] if isinstance(item, int) else tuple(int(a) for a in item)
                for n, item in enumerate(spec)
            )
        return cls(users, tx, int(n_bs), int(n_heads), int(antennas_per_head))

    @property
    def n_classes(self) -> int:
        return len(self.users_per_class)

    @property
    def n_users(self) -> int:
        return sum(self.users_per_class)

    @property
    def n_rx(self) -> int:
        return self.n_bs + self.n_heads * self.antennas_per_head

    @property
    def n_tx(self) -> int:
        return sum(sum(cls_tx) for cls_tx in self.tx_antennas)

    def class_tx(self, class_index: int) -> int:
        """Total transmit antennas of one user class."""
        return sum(self.tx_antennas[class_index])

    def class_column_range(self, class_index: int) -> tuple[int, int]:
        """Half-open column interval of class ``class_index`` inside H."""
        if not 0 <= class_index < self.n_classes:
            raise IndexError(f"class index {class_index} out of range")
        start = sum(self.class_tx(m) for m in range(class_index))
        return start, start + self.class_tx(class_index)

    def rx_group_sizes(self) -> tuple[int, ...]:
        """Receive antenna block sizes: the BS block then one per head."""
        return (self.n_bs,) + (self.antennas_per_head,) * self.n_heads


@dataclass(frozen=True)
class HeadOverrides:
    """Optional large-scale overrides applied to remote-radio-head links."""

    loss_range: tuple[float, float] | None = None
    distance_range: tuple[float, float] | None = None
    shadow_sigma_db: float | None = None
    rho_rx: float | None = None


def _check_range(rng_pair, name):
    lo, hi = float(rng_pair[0]), float(rng_pair[1])
    if not (0 < lo <= hi):
        raise ValueError(f"{name} must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    return lo, hi


def _check_rho(rho, name):
    rho = float(rho)
    if not 0 <= rho < 1:
        raise InvalidCorrelationError(f"{name} must lie in [0, 1), got {rho}")
    return rho


@dataclass(frozen=True)
class LargeScaleProfile:
    """Distributions of the per-link propagation parameters.

    Base values apply to the BS antenna block; ``heads`` can override the
    loss/distance/shadowing/receive-correlation values for the RRH links
    (the reported measurement campaigns use different numbers for the two).
    """

    path_loss_exponent: float
    loss_range: tuple[float, float]
    distance_range: tuple[float, float]
    shadow_sigma_db: float
    rho_rx: float
    rho_tx: float
    heads: HeadOverrides | None = None

    def __post_init__(self):
        if not 2.0 <= self.path_loss_exponent <= 4.0:
            raise ValueError(
                f"path loss exponent must lie in [2, 4], got {self.path_loss_exponent}"
            )
        _check_range(self.loss_range, "loss_range")
        _check_range(self.distance_range, "distance_range")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be nonnegative")
        _check_rho(self.rho_rx, "rho_rx")
        _check_rho(self.rho_tx, "rho_tx")
        if self.heads is not None:
            if self.heads.loss_range is not None:
                _check_range(self.heads.loss_range, "heads.loss_range")
            if self.heads.distance_range is not None:
                _check_range(self.heads.distance_range, "heads.distance_range")
            if self.heads.shadow_sigma_db is not None and self.heads.shadow_sigma_db < 0:
                raise ValueError("heads.shadow_sigma_db must be nonnegative")
            if self.heads.rho_rx is not None:
                _check_rho(self.heads.rho_rx, "heads.rho_rx")

    def link_params(self, head_index: int) -> tuple[tuple[float, float], tuple[float, float], float]:
        """(loss_range, distance_range, shadow spread) for receive block ``head_index``.

        Block 0 is the BS; blocks 1..n_heads are the radio heads.
        """
        if head_index == 0 or self.heads is None:
            return self.loss_range, self.distance_range, self.shadow_sigma_db
        ov = self.heads
        return (
            ov.loss_range if ov.loss_range is not None else self.loss_range,
            ov.distance_range if ov.distance_range is not None else self.distance_range,
            ov.shadow_sigma_db if ov.shadow_sigma_db is not None else self.shadow_sigma_db,
        )

    def rx_correlation(self, head_index: int) -> float:
        if head_index == 0 or self.heads is None or self.heads.rho_rx is None:
            return self.rho_rx
        return self.heads.rho_rx


@dataclass(frozen=True)
class ChannelRealization:
    """One composite channel draw ``H = [H_1 ... H_N]`` plus its large-scale state.

    ``large_scale[n][k]`` is the positive length-``n_rx`` diagonal of the
    large-scale matrix for user ``k`` of class ``n`` (piecewise constant over
    the BS/head antenna groups).
    """

    topology: SystemTopology
    h: np.ndarray
    large_scale: tuple[tuple[np.ndarray, ...], ...]

    def class_channel(self, class_index: int) -> np.ndarray:
        """Columns of H belonging to one user class (zero-copy view)."""
        start, stop = self.topology.class_column_range(class_index)
        return self.h[:, start:stop]

    @property
    def per_class(self) -> list[np.ndarray]:
        return [self.class_channel(n) for n in range(self.topology.n_classes)]


def exp_correlation(n_a: int, rho: float) -> np.ndarray:
    """Exponential antenna correlation matrix with entries ``rho**((i-j)**2)``.

    Real-valued, symmetric, unit diagonal and positive definite for
    ``rho`` in [0, 1); ``rho = 0`` gives the identity (uncorrelated antennas).
    """
    rho = _check_rho(rho, "rho")
    if n_a < 1:
        raise ValueError("n_a must be positive")
    idx = np.arange(n_a)
    return np.power(rho, (idx[:, None] - idx[None, :]) ** 2).astype(np.float64)


def correlation_sqrt(n_a: int, rho: float) -> np.ndarray:
    """Unique symmetric PSD square root of :func:`exp_correlation`.

    Negative round-off eigenvalues are clipped to zero so the root stays
    real even for rho close to 1.
    """
    r = exp_correlation(n_a, rho)
    vals, vecs = np.linalg.eigh(r)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def path_gain(loss: float, distance: float, tau: float) -> float:
    """Distance-based amplitude path loss ``sqrt(loss / distance**tau)``."""
    return float(np.sqrt(loss / distance**tau))


def shadow_gain(sigma_db: float, theta: float) -> float:
    """Log-normal shadowing amplitude ``10**(sigma_db * theta / 10)``."""
    return float(10.0 ** (sigma_db * theta / 10.0))


def sample_large_scale(
    topology: SystemTopology, profile: LargeScaleProfile, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one user's large-scale state.

    Per receive block j (BS first, then each head) draws loss, distance and a
    standard-normal shadowing variate, forming the gain
    ``gamma_j = sqrt(L/d^tau) * 10**(sigma*theta/10)``.  Returns the
    length-``n_rx`` diagonal (gamma repeated over its antenna group) and the
    raw per-block gains.
    """
    tau = profile.path_loss_exponent
    n_blocks = topology.n_heads + 1
    gains = np.empty(n_blocks)
    for j in range(n_blocks):
        loss_range, dist_range, sigma_db = profile.link_params(j)
        loss = rng.uniform(loss_range[0], loss_range[1])
        dist = rng.uniform(dist_range[0], dist_range[1])
        theta = rng.standard_normal()
        gains[j] = path_gain(loss, dist, tau) * shadow_gain(sigma_db, theta)
    diag = np.repeat(gains, topology.rx_group_sizes())
    return diag, gains


def sample_user_head_channel(
    n_rx: int, n_tx: int, rho_rx: float, rho_tx: float, rng: np.random.Generator
) -> np.ndarray:
    """One Kronecker-correlated small-scale block ``R_rx^(1/2) G R_tx^(1/2)``.

    ``G`` is i.i.d. circular complex Gaussian with unit variance; zero
    correlation on both sides returns ``G`` unchanged.
    """
    g = complex_normal(rng, (n_rx, n_tx))
    return _color_block(g, _maybe_sqrt(n_rx, rho_rx), _maybe_sqrt(n_tx, rho_tx))


def _maybe_sqrt(n_a: int, rho: float) -> np.ndarray | None:
    """Correlation square root, or None when it would be the identity."""
    rho = _check_rho(rho, "rho")
    if n_a <= 1 or rho == 0.0:
        return None
    return correlation_sqrt(n_a, rho)


def _color_block(g: np.ndarray, sqrt_rx, sqrt_tx) -> np.ndarray:
    if sqrt_rx is not None:
        g = sqrt_rx @ g
    if sqrt_tx is not None:
        g = g @ sqrt_tx
    return g


def assemble_realization(
    topology: SystemTopology, profile: LargeScaleProfile, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one full composite channel.

    Per user (classes in order, users in order): the large-scale diagonal is
    drawn first, then one small-scale block per receive group, stacked and
    scaled.  The draw order is fixed so a given generator state always yields
    the same realization.
    """
    if topology.n_tx > topology.n_rx:
        raise DimensionError("transmit dimension exceeds receive dimension")
    group_sizes = topology.rx_group_sizes()
    sqrt_rx = [
        _maybe_sqrt(size, profile.rx_correlation(j)) if size else None
        for j, size in enumerate(group_sizes)
    ]
    sqrt_tx_cache: dict[int, np.ndarray | None] = {}

    columns = []
    large_scale = []
    for n in range(topology.n_classes):
        class_scale = []
        for k in range(topology.users_per_class[n]):
            n_t_user = topology.tx_antennas[n][k]
            if n_t_user not in sqrt_tx_cache:
                sqrt_tx_cache[n_t_user] = _maybe_sqrt(n_t_user, profile.rho_tx)
            diag, _ = sample_large_scale(topology, profile, rng)
            blocks = []
            for j, size in enumerate(group_sizes):
                g = complex_normal(rng, (size, n_t_user))
                blocks.append(_color_block(g, sqrt_rx[j], sqrt_tx_cache[n_t_user]))
            hbar = np.vstack(blocks) if blocks else np.zeros((0, n_t_user), complex)
            columns.append(diag[:, None] * hbar)
            class_scale.append(diag)
        large_scale.append(tuple(class_scale))

    h = np.hstack(columns)
    h.setflags(write=False)
    return ChannelRealization(topology, h, tuple(large_scale))
