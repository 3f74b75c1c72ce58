"""Uplink massive-MIMO simulation with per-class decoupled signal detection.

The package covers the full pipeline: correlated channel synthesis for mixed
centralized/distributed antenna layouts, the channel-inversion + QR decoupler
that splits the received vector into parallel single-class systems, linear /
SIC / multi-branch-SIC detection, sum-rate analytics with detector lower
bounds, analytic FLOP ledgers, and a scenario-driven Monte Carlo harness with
deterministic seeding and CSV output.
"""

from .channel import (
    ChannelRealization,
    HeadOverrides,
    LargeScaleProfile,
    SystemTopology,
    assemble_realization,
    exp_correlation,
    substream,
)
from .detect import Constellation, DetectorSpec
from .dsd import DecoupledClass, DecoupledClassSet, decouple_qr, decouple_svd
from .errors import DsdlabError
from .harness import SweepResult, emit_csv, noise_variance, run, snr_from_noise
from .rate import coupled_sum_rate, dsd_sum_rate
from .scenario import Scenario, load_preset, load_scenario, preset_names

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "Constellation",
    "DecoupledClass",
    "DecoupledClassSet",
    "DetectorSpec",
    "DsdlabError",
    "HeadOverrides",
    "LargeScaleProfile",
    "Scenario",
    "SweepResult",
    "SystemTopology",
    "assemble_realization",
    "coupled_sum_rate",
    "decouple_qr",
    "decouple_svd",
    "dsd_sum_rate",
    "emit_csv",
    "exp_correlation",
    "load_preset",
    "load_scenario",
    "noise_variance",
    "preset_names",
    "run",
    "snr_from_noise",
    "substream",
    "__version__",
]
