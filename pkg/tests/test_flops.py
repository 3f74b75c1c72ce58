import pytest
from numpy.testing import assert_allclose

from dsdlab.channel import SystemTopology
from dsdlab.detect import DetectorSpec
from dsdlab.errors import DimensionError
from dsdlab.flops import FlopLedger, pipeline_flops, qr_flops


def topology(n_classes, users, tx, n_r):
    return SystemTopology.create(users, tx, n_r, 0, 0, n_classes=n_classes)


class TestQrFlops:
    def test_published_value(self):
        assert qr_flops(12, 36) == 175_104.0

    def test_scalar_case(self):
        assert_allclose(qr_flops(1, 1), 16.0 / 3.0, rtol=1e-15)

    def test_empty_matrix(self):
        assert qr_flops(0, 7) == 0.0

    def test_tall_rejected(self):
        with pytest.raises(DimensionError):
            qr_flops(5, 3)

    def test_cubic_homogeneity(self):
        for t, r in [(2, 6), (4, 10), (12, 36)]:
            assert_allclose(qr_flops(2 * t, 2 * r), 8.0 * qr_flops(t, r), rtol=1e-12)


class TestLedger:
    def test_additivity(self):
        ledger = FlopLedger()
        ledger.add("filtering", 10.0)
        ledger.add("slicing", 2.5)
        ledger.add("filtering", 1.5)
        assert ledger.total == 14.0
        assert sum(dict(ledger.items()).values()) == ledger.total

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            FlopLedger().add("filtering", -1.0)

    @pytest.mark.parametrize(
        "spec",
        [
            DetectorSpec("MMSE"),
            DetectorSpec("SIC-MMSE"),
            DetectorSpec("MB-SIC"),
            DetectorSpec("SIC-MMSE", mode="coupled"),
        ],
        ids=lambda s: f"{s.family}-{s.mode}",
    )
    def test_pipeline_additivity(self, spec):
        topo = topology(2, 2, 2, 16)
        ledger = pipeline_flops(spec, topo)
        assert_allclose(sum(c for _, c in ledger.items()), ledger.total, rtol=1e-15)
        assert all(c >= 0 for _, c in ledger.items())


class TestPipeline:
    def test_monotone_in_receive_antennas(self):
        for spec in (DetectorSpec("SIC-MMSE"), DetectorSpec("SIC-MMSE", mode="coupled"),
                     DetectorSpec("MMSE"), DetectorSpec("MB-SIC")):
            totals = [
                pipeline_flops(spec, topology(2, 4, 2, n_r)).total for n_r in (16, 32, 64, 128)
            ]
            assert all(a <= b for a, b in zip(totals, totals[1:]))

    def test_cache_flag_drops_decoupling(self):
        topo = topology(2, 4, 2, 32)
        spec = DetectorSpec("SIC-MMSE")
        full = pipeline_flops(spec, topo, cache_decouplers=False)
        cached = pipeline_flops(spec, topo, cache_decouplers=True)
        assert "decoupling" in full.stages and "decoupling" not in cached.stages
        assert_allclose(full.total - cached.total, full.stages["decoupling"], rtol=1e-12)

    def test_coupled_has_no_decoupling_stage(self):
        ledger = pipeline_flops(DetectorSpec("SIC-MMSE", mode="coupled"), topology(2, 4, 2, 32))
        assert "decoupling" not in ledger.stages and "projection" not in ledger.stages

    def test_mb_sic_scales_with_branch_count(self):
        topo = topology(1, 1, 6, 12)
        two = pipeline_flops(DetectorSpec("MB-SIC", branches=2), topo, cache_decouplers=True)
        four = pipeline_flops(DetectorSpec("MB-SIC", branches=4), topo, cache_decouplers=True)
        assert four.total > two.total

    def test_decoupled_detection_shrinks_with_classes(self):
        # same N_t split into more classes: per-vector detection work drops
        spec = DetectorSpec("SIC-MMSE")
        few = pipeline_flops(spec, topology(2, 10, 2, 200), cache_decouplers=True)
        many = pipeline_flops(spec, topology(10, 2, 2, 200), cache_decouplers=True)
        assert many.total < few.total

    def test_zf_vs_mmse_regularization_delta(self):
        topo = topology(1, 1, 4, 8)
        zf = pipeline_flops(DetectorSpec("ZF", mode="coupled"), topo)
        mmse = pipeline_flops(DetectorSpec("MMSE", mode="coupled"), topo)
        assert mmse.total - zf.total == 2.0 * 4
