import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atat import signal as S
from atat.errors import DegenerateNoise, DegenerateSegment, InvalidInput, ShapeError
from atat.signal import NormMode, Segment, SegmentKind


def seg(x, kind=SegmentKind.CLEAN_EEG, id="s"):
    return Segment(np.asarray(x, dtype=float), kind, id)


def unit_rms(rng, scale=1.0):
    x = rng.standard_normal(512)
    return scale * x / np.sqrt(np.mean(x * x))


class TestSegment:
    def test_length_enforced(self):
        with pytest.raises(ShapeError):
            seg(np.zeros(511))

    def test_finite_enforced(self):
        x = np.zeros(512)
        x[3] = np.nan
        with pytest.raises(InvalidInput):
            seg(x)


class TestRms:
    def test_examples(self):
        assert S.rms([0, 0, 0, 0]) == 0
        assert S.rms([1, -1, 1, -1]) == 1
        assert S.rms([3, 4]) == pytest.approx(math.sqrt((9 + 16) / 2), abs=1e-12)
        assert S.rms([3, 4]) == pytest.approx(3.5355339, abs=1e-7)

    def test_errors(self):
        with pytest.raises(InvalidInput):
            S.rms([])
        with pytest.raises(InvalidInput):
            S.rms([1.0, np.inf])

    # squares of |c| < 1e-100 underflow, which says nothing about rms itself
    @given(st.floats(-1e3, 1e3, allow_nan=False).filter(lambda c: c == 0 or abs(c) > 1e-100),
           st.integers(0, 2**31))
    def test_scale_equivariant(self, c, seed):
        x = np.random.default_rng(seed).standard_normal(64)
        assert S.rms(c * x) == pytest.approx(abs(c) * S.rms(x), rel=1e-12, abs=1e-300)


class TestMix:
    def test_equal_power_zero_db(self):
        rng = np.random.default_rng(0)
        x, n = unit_rms(rng), unit_rms(rng)
        _, spec, _ = S.mix(seg(x), seg(n, SegmentKind.EMG_ARTIFACT, "n"), 0.0)
        assert spec.lam == pytest.approx(1.0, abs=1e-12)

    def test_two_db(self):
        rng = np.random.default_rng(1)
        x, n = unit_rms(rng), unit_rms(rng, 2.0)
        y, spec, state = S.mix(seg(x), seg(n, SegmentKind.EMG_ARTIFACT, "n"), 2.0)
        expected = 1.0 / (2.0 * 10 ** 0.2)
        assert spec.lam == pytest.approx(expected, rel=1e-12)
        assert spec.lam == pytest.approx(0.315479, abs=1e-6)
        # direct recomputation of the SNR from the pieces
        snr = 10 * np.log10(np.sqrt(np.mean(x ** 2)) / np.sqrt(np.mean((spec.lam * n) ** 2)))
        assert abs(snr - 2.0) < 1e-6
        np.testing.assert_allclose(S.denormalize(y.samples, state), x + spec.lam * n, rtol=1e-12, atol=1e-12)

    def test_minus_seven_db(self):
        rng = np.random.default_rng(2)
        x, n = unit_rms(rng), unit_rms(rng)
        _, spec, _ = S.mix(seg(x), seg(n, SegmentKind.EMG_ARTIFACT, "n"), -7.0)
        assert spec.lam == pytest.approx(10 ** 0.7, rel=1e-12)
        assert spec.lam == pytest.approx(5.011872, abs=1e-6)
        assert abs(S.measured_snr_db(x, spec.lam * n) + 7.0) < 1e-6

    def test_zero_rms_noise(self):
        with pytest.raises(DegenerateNoise):
            S.mix(seg(np.ones(512)), seg(np.zeros(512), SegmentKind.EMG_ARTIFACT), 0.0)

    def test_kind_mismatch(self):
        a = seg(np.ones(512))
        with pytest.raises(InvalidInput):
            S.mix(a, a, 0.0)
        with pytest.raises(InvalidInput):
            S.mix(seg(np.ones(512), SegmentKind.EMG_ARTIFACT), seg(np.ones(512), SegmentKind.EMG_ARTIFACT), 0.0)

    def test_snr_out_of_range(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InvalidInput):
            S.mix(seg(unit_rms(rng)), seg(unit_rms(rng), SegmentKind.EMG_ARTIFACT), 5.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-7.0, 2.0), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
    def test_measured_snr_matches_target(self, seed, snr, sx, sn):
        rng = np.random.default_rng(seed)
        x, n = sx * rng.standard_normal(512), sn * rng.standard_normal(512)
        _, spec, _ = S.mix(seg(x), seg(n, SegmentKind.EMG_ARTIFACT, "n"), snr)
        assert abs(S.measured_snr_db(x, spec.lam * n) - snr) < 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        a, b = seg(rng.standard_normal(512)), seg(rng.standard_normal(512), SegmentKind.EMG_ARTIFACT, "n")
        y1, _, _ = S.mix(a, b, -3.3)
        y2, _, _ = S.mix(a, b, -3.3)
        assert y1.samples.tobytes() == y2.samples.tobytes()


class TestNormalize:
    def test_examples(self):
        out, st_ = S.normalize([0.0, 1.0], NormMode.MINMAX01)
        np.testing.assert_array_equal(out, [0.0, 1.0])
        assert (st_.offset, st_.scale) == (0.0, 1.0)
        out, _ = S.normalize([2.0, 4.0, 6.0], NormMode.MINMAX01)
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("mode", list(NormMode))
    def test_constant_rejected(self, mode):
        with pytest.raises(DegenerateSegment):
            S.normalize([1.0, 1.0, 1.0], mode)

    def test_zscore_moments(self):
        out, _ = S.normalize(np.random.default_rng(0).normal(5, 3, 512), NormMode.ZSCORE)
        assert abs(out.mean()) < 1e-9 and abs(out.std() - 1) < 1e-9

    def test_round_trip_1000(self):
        rng = np.random.default_rng(5)
        for i in range(1000):
            x = rng.normal(rng.uniform(-50, 50), rng.uniform(0.1, 100), 512)
            mode = NormMode.MINMAX01 if i % 2 else NormMode.ZSCORE
            y, state = S.normalize(x, mode)
            if mode is NormMode.MINMAX01:
                assert y.min() >= 0 and y.max() <= 1
            back = S.denormalize(y, state)
            assert np.max(np.abs(back - x)) <= 1e-9 * np.max(np.abs(x))


class TestHighVariance:
    def test_top_quartile(self):
        segs = [seg(np.full(512, 0.0) + np.sin(np.arange(512)) * s, SegmentKind.EMG_ARTIFACT, f"e{s}")
                for s in range(1, 9)]
        picked = S.select_high_variance(segs)
        assert [s.id for s in picked] == ["e7", "e8"]


def test_estimated_clean_std():
    rng = np.random.default_rng(0)
    x, n = rng.standard_normal(200_000), rng.standard_normal(200_000)
    for snr in (-7.0, 2.0):
        y, _ = S.contaminate(x, n, snr)
        assert S.estimated_clean_std(y.std(), snr) == pytest.approx(x.std(), rel=0.01)
