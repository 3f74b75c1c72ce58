import numpy as np
import pytest

from dsdlab.channel import ChannelRealization, LargeScaleProfile, SystemTopology


def unit_profile(rho_rx=0.0, rho_tx=0.0, shadow=0.0):
    """Propagation-free profile: unit loss and distance, optional correlation."""
    return LargeScaleProfile(
        path_loss_exponent=2.0,
        loss_range=(1.0, 1.0),
        distance_range=(1.0, 1.0),
        shadow_sigma_db=shadow,
        rho_rx=rho_rx,
        rho_tx=rho_tx,
    )


def synthetic_realization(topology: SystemTopology, h: np.ndarray) -> ChannelRealization:
    """Wrap an explicit channel matrix (tests that do not care about fading)."""
    h = np.asarray(h, dtype=np.complex128)
    assert h.shape == (topology.n_rx, topology.n_tx)
    scales = tuple(
        tuple(np.ones(topology.n_rx) for _ in range(topology.users_per_class[n]))
        for n in range(topology.n_classes)
    )
    return ChannelRealization(topology, h, scales)


def random_realization(rng, n_r, class_tx):
    """Random i.i.d. complex channel split into len(class_tx) classes."""
    topo = SystemTopology.create(
        users_per_class=[1] * len(class_tx),
        tx_antennas_per_user=[[t] for t in class_tx],
        n_bs=n_r,
    )
    h = (rng.standard_normal((n_r, topo.n_tx)) + 1j * rng.standard_normal((n_r, topo.n_tx)))
    h *= np.sqrt(0.5)
    return synthetic_realization(topo, h)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
