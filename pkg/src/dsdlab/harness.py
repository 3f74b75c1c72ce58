"""Scenario execution: BER sweeps, rate sweeps, FLOP tables and CSV output.

Every random draw comes from a counter-based substream keyed by
``(master_seed, point_index, realization_index, purpose)``, so a sweep's
output is a pure function of (scenario, seed) no matter how many worker
processes share the realizations.  Error counts reduce by integer addition
and rate averages accumulate in realization order, keeping the CSV
byte-identical across worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels
from .channel import assemble_realization, complex_normal, substream
from .detect import detect_indices_batch
from .dsd import decouple_qr, interferer_matrix
from .flops import pipeline_flops
from .rate import (
    class_noise_covariance,
    dsd_sum_rate,
    linear_bound_rates,
    sic_bound_rates,
)
from .scenario import FULL_SCALE_REALIZATIONS, FULL_SCALE_VECTORS, Scenario

__all__ = [
    "ResultRow",
    "SweepResult",
    "noise_variance",
    "snr_from_noise",
    "run",
    "run_ber_sweep",
    "run_rate_sweep",
    "run_flop_table",
    "emit_csv",
    "scale_to_full",
]

CSV_HEADER = "sweep_axis,sweep_value,detector,mode,class_id,metric,value,trials,errors,flops"

SIGMA_S2 = 1.0  # all transmit antennas use unit average symbol energy


def noise_variance(snr_db: float, n_t: int, bits_per_symbol: int, sigma_s2: float = SIGMA_S2) -> float:
    """Invert the per-information-bit SNR definition to the noise variance."""
    return n_t * sigma_s2 / (bits_per_symbol * 10.0 ** (snr_db / 10.0))


def snr_from_noise(sigma_n2: float, n_t: int, bits_per_symbol: int, sigma_s2: float = SIGMA_S2) -> float:
    """Per-information-bit SNR in dB: ``10 log10(N_t sigma_s^2 / (M sigma_n^2))``."""
    return 10.0 * math.log10(n_t * sigma_s2 / (bits_per_symbol * sigma_n2))


@dataclass(frozen=True)
class ResultRow:
    sweep_axis: str
    sweep_value: float
    detector: str
    mode: str
    class_id: str
    metric: str
    value: float
    trials: int
    errors: int
    flops: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[ResultRow, ...]

    def select(self, **fields) -> list[ResultRow]:
        """Rows matching every given column value (convenience for tests)."""
        out = []
        for row in self.rows:
            if all(getattr(row, key) == value for key, value in fields.items()):
                out.append(row)
        return out

    def value(self, **fields) -> float:
        rows = self.select(**fields)
        if len(rows) != 1:
            raise KeyError(f"expected exactly one row for {fields}, got {len(rows)}")
        return rows[0].value


def scale_to_full(scenario: Scenario) -> Scenario:
    """Restore the published Monte Carlo scale from a desk-scale scenario."""
    return replace(
        scenario,
        realizations=scenario.realizations * FULL_SCALE_REALIZATIONS,
        symbol_vectors=scenario.symbol_vectors * FULL_SCALE_VECTORS,
    )


@lru_cache(maxsize=None)
def _bit_diff_table(order: int) -> np.ndarray:
    """Pairwise differing-bit counts between constellation indices."""
    idx = np.arange(order)
    xor = idx[:, None] ^ idx[None, :]
    return np.array([[bin(v).count("1") for v in row] for row in xor], dtype=np.int64)


# ---------------------------------------------------------------------------
# per-realization work items (module level so worker processes can pickle them)


def _ber_realization(scenario: Scenario, point_idx: int, r_idx: int):
    point = scenario.points[point_idx]
    topo = point.topology
    const = scenario.constellation
    points_arr = const.points_array()
    sigma_n2 = (
        0.0
        if point.snr_db is None
        else noise_variance(point.snr_db, topo.n_tx, const.bits_per_symbol)
    )
    sigma2 = sigma_n2 / SIGMA_S2

    realization = assemble_realization(
        topo, scenario.profile, substream(scenario.seed, point_idx, r_idx, 0)
    )
    n_trials = scenario.symbol_vectors
    tx_idx = substream(scenario.seed, point_idx, r_idx, 1).integers(
        0, const.order, size=(n_trials, topo.n_tx)
    )
    y = points_arr[tx_idx] @ realization.h.T
    if sigma_n2 > 0.0:
        noise_rng = substream(scenario.seed, point_idx, r_idx, 2)
        y = y + complex_normal(noise_rng, y.shape) * math.sqrt(sigma_n2)

    decoupled = None
    if any(d.mode == "decoupled" for d in scenario.detectors):
        decoupled = decouple_qr(realization, sigma2)

    table = _bit_diff_table(const.order)
    errors = np.zeros((len(scenario.detectors), topo.n_classes), dtype=np.int64)
    for d_i, spec in enumerate(scenario.detectors):
        if spec.mode == "coupled":
            det_idx = detect_indices_batch(y, realization.h, sigma2, spec, const)
            for n in range(topo.n_classes):
                a, b = topo.class_column_range(n)
                errors[d_i, n] = table[tx_idx[:, a:b], det_idx[:, a:b]].sum()
        else:
            for n, cls in enumerate(decoupled.classes):
                y_n = y @ cls.projector.T
                det_idx = detect_indices_batch(y_n, cls.equivalent_channel, sigma2, spec, const)
                a, b = topo.class_column_range(n)
                errors[d_i, n] = table[tx_idx[:, a:b], det_idx].sum()
    return errors


def _rate_realization(scenario: Scenario, point_idx: int, r_idx: int):
    point = scenario.points[point_idx]
    topo = point.topology
    sigma_n2 = noise_variance(point.snr_db, topo.n_tx, scenario.constellation.bits_per_symbol)
    sigma2 = sigma_n2 / SIGMA_S2
    realization = assemble_realization(
        topo, scenario.profile, substream(scenario.seed, point_idx, r_idx, 0)
    )
    decoupled = decouple_qr(realization, sigma2)
    report = dsd_sum_rate(realization, decoupled, SIGMA_S2, sigma_n2)

    values: dict[tuple[str, str, str, str], float] = {}
    for n, rate_n in enumerate(report.per_class):
        values[("-", "decoupled", "sum_rate", str(n))] = rate_n
    values[("-", "decoupled", "sum_rate", "all")] = report.total
    values[("-", "coupled", "sum_rate", "all")] = report.coupled

    for spec in scenario.detectors:
        if spec.mode == "decoupled":
            per_class = []
            for cls in decoupled.classes:
                k_nn = class_noise_covariance(
                    cls.projector,
                    interferer_matrix(realization, cls.class_index),
                    SIGMA_S2,
                    sigma_n2,
                )
                if spec.family == "SIC-MMSE":
                    rates = sic_bound_rates(cls.equivalent_channel, k_nn, SIGMA_S2, sigma_n2)
                else:
                    rates = linear_bound_rates(
                        cls.equivalent_channel, k_nn, spec.family, SIGMA_S2, sigma_n2
                    )
                per_class.append(float(np.sum(rates)))
            for n, rate_n in enumerate(per_class):
                values[(spec.label, "decoupled", "rate_lower_bound", str(n))] = rate_n
            values[(spec.label, "decoupled", "rate_lower_bound", "all")] = float(sum(per_class))
        else:
            k_nn = sigma_n2 * np.eye(topo.n_rx, dtype=np.complex128)
            if spec.family == "SIC-MMSE":
                rates = sic_bound_rates(realization.h, k_nn, SIGMA_S2, sigma_n2)
            else:
                rates = linear_bound_rates(realization.h, k_nn, spec.family, SIGMA_S2, sigma_n2)
            for n in range(topo.n_classes):
                a, b = topo.class_column_range(n)
                values[(spec.label, "coupled", "rate_lower_bound", str(n))] = float(
                    np.sum(rates[a:b])
                )
            values[(spec.label, "coupled", "rate_lower_bound", "all")] = float(np.sum(rates))
    return values


_WORKER_SCENARIO: Scenario | None = None


def _init_worker(scenario: Scenario) -> None:
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = scenario


def _ber_task(task):
    point_idx, r_idx = task
    return _ber_realization(_WORKER_SCENARIO, point_idx, r_idx)


def _rate_task(task):
    point_idx, r_idx = task
    return _rate_realization(_WORKER_SCENARIO, point_idx, r_idx)


def _map_realizations(scenario: Scenario, task_fn, item_fn, workers: int):
    """Yield per-(point, realization) results in deterministic task order."""
    tasks = [
        (p, r) for p in range(len(scenario.points)) for r in range(scenario.realizations)
    ]
    if workers <= 1:
        for task in tasks:
            yield task, item_fn(scenario, *task)
        return
    kernels.warmup()
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(scenario,)
    ) as pool:
        yield from zip(tasks, pool.map(task_fn, tasks, chunksize=chunk))


# ---------------------------------------------------------------------------
# sweeps


def run_ber_sweep(scenario: Scenario, workers: int = 1) -> SweepResult:
    """Monte Carlo bit-error-rate sweep over the scenario's points."""
    if scenario.metric != "ber":
        raise ValueError(f"scenario metric is {scenario.metric!r}, expected 'ber'")
    n_points = len(scenario.points)
    n_det = len(scenario.detectors)
    errors = np.zeros((n_points, n_det, max(p.topology.n_classes for p in scenario.points)),
                      dtype=np.int64)
    for (p, _r), result in _map_realizations(scenario, _ber_task, _ber_realization, workers):
        errors[p, :, : result.shape[1]] += result

    m_bits = scenario.constellation.bits_per_symbol
    vectors = scenario.realizations * scenario.symbol_vectors
    rows = []
    for p, point in enumerate(scenario.points):
        topo = point.topology
        for d_i, spec in enumerate(scenario.detectors):
            flops = pipeline_flops(spec, topo).total
            class_bits = [
                vectors * topo.class_tx(n) * m_bits for n in range(topo.n_classes)
            ]
            for n in range(topo.n_classes):
                rows.append(
                    ResultRow(
                        scenario.sweep_axis, point.value, spec.label, spec.mode, str(n),
                        "ber", errors[p, d_i, n] / class_bits[n], vectors,
                        int(errors[p, d_i, n]), flops,
                    )
                )
            total_err = int(errors[p, d_i, : topo.n_classes].sum())
            rows.append(
                ResultRow(
                    scenario.sweep_axis, point.value, spec.label, spec.mode, "all",
                    "ber", total_err / sum(class_bits), vectors, total_err, flops,
                )
            )
    return SweepResult(tuple(_sorted_rows(rows)))


def run_rate_sweep(scenario: Scenario, workers: int = 1) -> SweepResult:
    """Average the sum rates and detector lower bounds over channel draws."""
    if scenario.metric != "rate":
        raise ValueError(f"scenario metric is {scenario.metric!r}, expected 'rate'")
    sums: list[dict] = [dict() for _ in scenario.points]
    for (p, _r), values in _map_realizations(scenario, _rate_task, _rate_realization, workers):
        acc = sums[p]
        for key, value in values.items():
            acc[key] = acc.get(key, 0.0) + value

    rows = []
    for p, point in enumerate(scenario.points):
        for (detector, mode, metric, class_id), total in sums[p].items():
            rows.append(
                ResultRow(
                    scenario.sweep_axis, point.value, detector, mode, class_id, metric,
                    total / scenario.realizations, scenario.realizations, 0, 0.0,
                )
            )
    return SweepResult(tuple(_sorted_rows(rows)))


def run_flop_table(scenario: Scenario, workers: int = 1) -> SweepResult:
    """Deterministic per-vector FLOP ledgers for every detector and point."""
    if scenario.metric != "flops":
        raise ValueError(f"scenario metric is {scenario.metric!r}, expected 'flops'")
    rows = []
    for point in scenario.points:
        for spec in scenario.detectors:
            ledger = pipeline_flops(spec, point.topology, scenario.cache_decouplers)
            for stage, count in ledger.items():
                rows.append(
                    ResultRow(
                        scenario.sweep_axis, point.value, spec.label, spec.mode, "all",
                        f"flops_{stage}", count, 0, 0, ledger.total,
                    )
                )
            rows.append(
                ResultRow(
                    scenario.sweep_axis, point.value, spec.label, spec.mode, "all",
                    "flops_total", ledger.total, 0, 0, ledger.total,
                )
            )
    return SweepResult(tuple(_sorted_rows(rows)))


def run(scenario: Scenario, workers: int = 1) -> SweepResult:
    """Dispatch on the scenario's metric."""
    if scenario.metric == "ber":
        return run_ber_sweep(scenario, workers)
    if scenario.metric == "rate":
        return run_rate_sweep(scenario, workers)
    return run_flop_table(scenario, workers)


# ---------------------------------------------------------------------------
# CSV


def _class_sort_key(class_id: str):
    return (1, 0) if class_id == "all" else (0, int(class_id))


def _sorted_rows(rows):
    return sorted(
        rows,
        key=lambda r: (r.sweep_value, r.detector, r.mode, _class_sort_key(r.class_id), r.metric),
    )


def _fmt(value: float) -> str:
    return format(value, ".12g")


def emit_csv(result: SweepResult, path) -> None:
    """Write the result as CSV: header then rows, 12 significant digits.

    Emission is deterministic: the same result always produces the same
    bytes.
    """
    lines = [CSV_HEADER]
    for row in _sorted_rows(result.rows):
        lines.append(
            ",".join(
                (
                    row.sweep_axis,
                    _fmt(row.sweep_value),
                    row.detector,
                    row.mode,
                    row.class_id,
                    row.metric,
                    _fmt(row.value),
                    str(row.trials),
                    str(row.errors),
                    _fmt(row.flops),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")
