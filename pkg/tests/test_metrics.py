import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uimvdr.metrics import MetricReport, si_sdr, si_sdri


class TestSiSdr:
    def test_hand_case(self):
        assert si_sdr(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)

    def test_known_ratio(self):
        # projection of [1, 0.1] on [1, 0] leaves a residual 0.1 -> 20 dB
        assert si_sdr(np.array([1.0, 0.1]), np.array([1.0, 0.0])) == pytest.approx(20.0, abs=1e-12)

    def test_identical_is_clamped_high(self, rng):
        x = rng.standard_normal(100)
        assert si_sdr(x, x) == 100.0

    def test_orthogonal_is_clamped_low(self):
        assert si_sdr(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == -100.0

    def test_zero_reference(self):
        with pytest.raises(ValueError):
            si_sdr(np.ones(3), np.zeros(3))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            si_sdr(np.ones(3), np.ones(4))

    def test_accepts_single_channel_2d(self, rng):
        x, r = rng.standard_normal((2, 50))
        assert si_sdr(x[np.newaxis], r[np.newaxis]) == si_sdr(x, r)

    def test_rejects_multichannel(self, rng):
        with pytest.raises(ValueError):
            si_sdr(rng.standard_normal((2, 5)), rng.standard_normal((2, 5)))

    def test_no_mean_removal(self):
        # A DC offset is error, not signal.
        r = np.array([1.0, -1.0, 1.0, -1.0])
        assert si_sdr(r + 1.0, r) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_scale_invariance(seed, scale):
    est, ref = np.random.default_rng(seed).standard_normal((2, 256))
    assert abs(si_sdr(scale * est, ref) - si_sdr(est, ref)) <= 1e-9


def test_si_sdri_of_mixture_is_zero(rng):
    mix, ref = rng.standard_normal((2, 1000))
    assert si_sdri(mix, ref, mix) == 0.0


class TestMetricReport:
    def test_record_round_trip(self):
        rep = MetricReport(12.3456789, 4.5, "scene_7")
        line = rep.to_record()
        assert line == "scene_id=scene_7 si_sdr=12.345679 si_sdri=4.500000"
        back = MetricReport.from_record(line)
        assert back.scene_id == "scene_7"
        assert back.si_sdr == pytest.approx(12.345679)
        assert back.si_sdri == pytest.approx(4.5)

    def test_without_improvement(self):
        line = MetricReport(1.0).to_record()
        assert "si_sdri" not in line
        assert MetricReport.from_record(line).si_sdri is None

    def test_evaluate(self, rng):
        est, ref, mix = rng.standard_normal((3, 300))
        rep = MetricReport.evaluate(est, ref, mix, "x")
        assert rep.si_sdr == si_sdr(est, ref)
        assert rep.si_sdri == pytest.approx(si_sdri(est, ref, mix), abs=1e-12)
