import numpy as np
import pytest
from numpy.testing import assert_allclose

from dsdlab import kernels
from dsdlab.channel import complex_normal, substream
from dsdlab.detect import (
    Constellation,
    DetectorSpec,
    branch_permutations,
    detect_coupled,
    detect_indices_batch,
    detect_linear,
    detect_mb_sic,
    detect_sic,
    linear_receive_matrix,
    norm_descending_order,
    slice_symbol,
)
from dsdlab.dsd import decouple_qr
from dsdlab.errors import SingularMatrixError

from conftest import random_realization

QPSK = Constellation.qpsk()


def random_channel(rng, m, t):
    return complex_normal(rng, (m, t))


class TestConstellation:
    def test_qpsk_gray_labels(self):
        s = 1 / np.sqrt(2)
        expected = [s + 1j * s, s - 1j * s, -s + 1j * s, -s - 1j * s]
        assert_allclose(QPSK.points_array(), expected, atol=1e-15)
        assert QPSK.bits_per_symbol == 2 and QPSK.order == 4

    def test_unit_energy_enforced(self):
        with pytest.raises(ValueError):
            Constellation("bad", (2.0 + 0j, -2.0 + 0j), 1)

    def test_size_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            Constellation("bad", (1.0 + 0j, -1.0 + 0j, 1j), 1)

    def test_from_name(self):
        assert Constellation.from_name("QPSK").name == "qpsk"
        with pytest.raises(ValueError):
            Constellation.from_name("256qam")


class TestSlice:
    def test_on_constellation_point(self):
        for p in QPSK.points:
            assert slice_symbol(p, QPSK) == p

    def test_nearest_by_exhaustive_distance(self):
        z = 0.9 + 0.1j
        oracle = min(QPSK.points, key=lambda a: abs(z - a))
        assert slice_symbol(z, QPSK) == oracle == QPSK.points[0]

    def test_equidistant_tie_breaks_to_lowest_index(self):
        assert slice_symbol(0.0, QPSK) == QPSK.points[0]

    def test_idempotent(self, rng):
        for z in complex_normal(rng, (50,)):
            once = slice_symbol(z, QPSK)
            assert slice_symbol(once, QPSK) == once


class TestLinear:
    def test_identity_zf(self):
        assert_allclose(linear_receive_matrix(np.eye(2), 0.0, "ZF"), np.eye(2), atol=1e-14)

    def test_identity_mmse(self):
        assert_allclose(linear_receive_matrix(np.eye(2), 1.0, "MMSE"), 0.5 * np.eye(2), atol=1e-14)

    def test_zf_inverts(self, rng):
        h = random_channel(rng, 4, 4)
        w = linear_receive_matrix(h, 0.0, "ZF")
        assert np.linalg.norm(w @ h - np.eye(4)) <= 1e-10

    def test_noiseless_recovery(self, rng):
        h = random_channel(rng, 4, 4)
        s = QPSK.points_array()[rng.integers(0, 4, 4)]
        w = linear_receive_matrix(h, 0.0, "ZF")
        assert_allclose(detect_linear(h @ s, w, QPSK), s, atol=1e-12)

    def test_zero_input_slices_to_first_point(self):
        out = detect_linear(np.zeros(3), np.eye(3), QPSK)
        assert_allclose(out, np.full(3, QPSK.points[0]), atol=0)

    def test_high_snr_symbol_errors_are_rare(self, rng):
        trials, errs = 10_000, 0
        spec = DetectorSpec("ZF", mode="coupled")
        h = random_channel(rng, 4, 4)
        tx = rng.integers(0, 4, (trials, 4))
        sigma_n2 = 4 / (2 * 10 ** (30 / 10))
        y = QPSK.points_array()[tx] @ h.T + complex_normal(rng, (trials, 4)) * np.sqrt(sigma_n2)
        det = detect_indices_batch(y, h, sigma_n2, spec, QPSK)
        errs = np.count_nonzero(det != tx)
        assert errs / (trials * 4) < 1e-2


class TestOrdering:
    def test_norm_descending(self):
        assert norm_descending_order(np.diag([3.0, 1.0])).tolist() == [0, 1]
        assert norm_descending_order(np.diag([1.0, 3.0])).tolist() == [1, 0]

    def test_stable_on_ties(self):
        assert norm_descending_order(np.eye(3)).tolist() == [0, 1, 2]

    def test_branch_permutations_roundtrip(self, rng):
        h = random_channel(rng, 5, 5)
        perms = branch_permutations(h, 5)
        assert perms.shape == (5, 5)
        for perm in perms:
            p = np.eye(5)[perm]
            assert_allclose(p @ p.T, np.eye(5), atol=0)
        # branches 2.. are circular shifts of the natural order
        assert perms[1].tolist() == [1, 2, 3, 4, 0]
        assert perms[2].tolist() == [2, 3, 4, 0, 1]


class TestSic:
    def test_noiseless_exact_any_ordering(self, rng):
        h = random_channel(rng, 4, 4)
        s = QPSK.points_array()[rng.integers(0, 4, 4)]
        for ordering in ("none", "norm-descending", np.array([2, 0, 3, 1])):
            assert_allclose(detect_sic(h @ s, h, 0.0, QPSK, ordering), s, atol=1e-12)

    def test_explicit_ordering_must_be_permutation(self, rng):
        h = random_channel(rng, 3, 3)
        with pytest.raises(ValueError):
            detect_sic(np.zeros(3), h, 0.1, QPSK, np.array([0, 0, 1]))

    def test_paired_trials_sic_beats_mmse(self, rng):
        trials = 100_000
        h = random_channel(rng, 2, 2)
        tx = rng.integers(0, 4, (trials, 2))
        sigma_n2 = 2 / (2 * 10 ** (30 / 10))
        y = QPSK.points_array()[tx] @ h.T + complex_normal(rng, (trials, 2)) * np.sqrt(sigma_n2)
        mmse = detect_indices_batch(y, h, sigma_n2, DetectorSpec("MMSE"), QPSK)
        sic = detect_indices_batch(y, h, sigma_n2, DetectorSpec("SIC-MMSE"), QPSK)
        assert np.count_nonzero(sic != tx) <= np.count_nonzero(mmse != tx)

    def test_zf_stage_filters_supported(self, rng):
        h = random_channel(rng, 3, 3)
        s = QPSK.points_array()[rng.integers(0, 4, 3)]
        out = detect_sic(h @ s, h, 0.0, QPSK, stage_filter="ZF")
        assert_allclose(out, s, atol=1e-12)

    def test_singular_stage_raises(self):
        h = np.ones((3, 2), dtype=complex)  # duplicate columns
        with pytest.raises(SingularMatrixError):
            detect_sic(np.ones(3, dtype=complex), h, 0.0, QPSK, "none", stage_filter="ZF")


class TestMbSic:
    def test_single_branch_equals_sic(self, rng):
        h = random_channel(rng, 3, 3)
        y = complex_normal(rng, (3,))
        assert_allclose(
            detect_mb_sic(y, h, 0.05, QPSK, branches=1),
            detect_sic(y, h, 0.05, QPSK, "norm-descending"),
            atol=0,
        )

    def test_noiseless_exact_with_zero_residual(self, rng):
        h = random_channel(rng, 4, 4)
        s = QPSK.points_array()[rng.integers(0, 4, 4)]
        y = h @ s
        perms = branch_permutations(h, 4)
        hps, filters, kept = kernels.build_mb_banks(h, 0.0, perms)
        idx, resid = kernels.mb_sic_apply(y[None, :], hps, filters, kept, QPSK.points_array())
        assert_allclose(QPSK.points_array()[idx[0]], s, atol=1e-12)
        assert resid[0] <= 1e-20

    def test_selection_residual_dominates_branch_one(self, rng):
        h = random_channel(rng, 4, 4)
        y = complex_normal(rng, (64, 4))
        perms = branch_permutations(h, 4)
        hps, filters, kept = kernels.build_mb_banks(h, 0.1, perms)
        _, mb_resid = kernels.mb_sic_apply(y, hps, filters, kept, QPSK.points_array())
        _, sic_resid = kernels.sic_apply(y, hps[0], filters[0], kept[0], QPSK.points_array())
        assert np.all(mb_resid <= sic_resid + 1e-12)

    def test_agrees_with_exhaustive_ml(self, rng):
        trials = 10_000
        points = QPSK.points_array()
        grid = np.array([[a, b] for a in points for b in points])
        h = random_channel(rng, 2, 2)
        tx = rng.integers(0, 4, (trials, 2))
        sigma_n2 = 2 / (2 * 10 ** (30 / 10))
        y = points[tx] @ h.T + complex_normal(rng, (trials, 2)) * np.sqrt(sigma_n2)
        mb = detect_indices_batch(y, h, sigma_n2, DetectorSpec("MB-SIC", branches=2), QPSK)
        dists = np.sum(np.abs(y[:, None, :] - grid @ h.T) ** 2, axis=2)
        ml = grid[np.argmin(dists, axis=1)]
        agree = np.all(points[mb] == ml, axis=1).mean()
        assert agree >= 0.99


class TestCoupled:
    def test_noiseless_zf_exact(self, rng):
        real = random_realization(rng, 8, [2, 2])
        s = QPSK.points_array()[rng.integers(0, 4, 4)]
        out = detect_coupled(real.h @ s, real.h, 0.0, DetectorSpec("ZF", mode="coupled"), QPSK)
        assert_allclose(out, s, atol=1e-10)

    def test_single_class_matches_decoupled_path(self, rng):
        # N = 1 with sigma2 = 0 decoupling: identical decision statistics
        real = random_realization(rng, 6, [3])
        dec = decouple_qr(real, 0.0)
        tx = rng.integers(0, 4, (200, 3))
        sigma_n2 = 0.05
        y = QPSK.points_array()[tx] @ real.h.T + complex_normal(rng, (200, 6)) * np.sqrt(sigma_n2)
        spec = DetectorSpec("SIC-MMSE")
        y_n = y @ dec[0].projector.T
        decoupled = detect_indices_batch(y_n, dec[0].equivalent_channel, sigma_n2, spec, QPSK)
        coupled = detect_indices_batch(y, real.h, sigma_n2, spec, QPSK)
        assert np.array_equal(decoupled, coupled)

    def test_mmse_ber_sane_at_moderate_snr(self, rng):
        real = random_realization(rng, 16, [4, 4])
        spec = DetectorSpec("MMSE", mode="coupled")
        rates = {}
        for snr_db in (0.0, 12.0):
            tx = rng.integers(0, 4, (500, 8))
            sigma_n2 = 8 / (2 * 10 ** (snr_db / 10))
            y = QPSK.points_array()[tx] @ real.h.T
            y += complex_normal(rng, (500, 16)) * np.sqrt(sigma_n2)
            det = detect_indices_batch(y, real.h, sigma_n2, spec, QPSK)
            rates[snr_db] = np.count_nonzero(det != tx) / tx.size
        assert np.isfinite(rates[12.0]) and rates[12.0] < 0.5
        assert rates[0.0] > rates[12.0]


class TestNoiselessExactnessAllFamilies:
    @pytest.mark.parametrize(
        "spec",
        [
            DetectorSpec("ZF"),
            DetectorSpec("MMSE"),
            DetectorSpec("SIC-ZF"),
            DetectorSpec("SIC-MMSE"),
            DetectorSpec("MB-SIC"),
        ],
        ids=lambda s: s.family,
    )
    def test_decoupled_and_coupled(self, rng, spec):
        real = random_realization(rng, 8, [2, 2])
        tx = rng.integers(0, 4, (16, 4))
        y = QPSK.points_array()[tx] @ real.h.T
        coupled = detect_indices_batch(y, real.h, 0.0, spec, QPSK)
        assert np.array_equal(coupled, tx)
        dec = decouple_qr(real, 0.0)
        for n, cls in enumerate(dec.classes):
            a, b = real.topology.class_column_range(n)
            got = detect_indices_batch(y @ cls.projector.T, cls.equivalent_channel, 0.0, spec, QPSK)
            assert np.array_equal(got, tx[:, a:b])


class TestDetectorSpec:
    def test_defaults(self):
        assert DetectorSpec("MMSE").ordering == "none"
        assert DetectorSpec("SIC-MMSE").ordering == "norm-descending"
        assert DetectorSpec("MB-SIC").ordering == "norm-descending"

    def test_mb_sic_requires_norm_ordering(self):
        with pytest.raises(ValueError):
            DetectorSpec("MB-SIC", ordering="none")

    def test_branches_only_for_mb_sic(self):
        with pytest.raises(ValueError):
            DetectorSpec("SIC-MMSE", branches=2)
        with pytest.raises(ValueError):
            DetectorSpec("MB-SIC", branches=0)

    def test_linear_rejects_ordering(self):
        with pytest.raises(ValueError):
            DetectorSpec("ZF", ordering="norm-descending")

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            DetectorSpec("SPHERE")

    def test_labels(self):
        assert DetectorSpec("MB-SIC", branches=4).label == "MB-SIC(L=4)"
        assert DetectorSpec("SIC-MMSE").label == "SIC-MMSE"
