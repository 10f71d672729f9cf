"""Shared signal path: transforms, channel application, PAPR, PSD, CCDF."""

import numpy as np
import pytest

from drillcomm import dsp
from drillcomm.dsp import (
    NoiseSpec,
    apply_channel,
    carrier_bin,
    ccdf,
    convolve_truncate,
    frame_to_passband,
    noise_variance,
    oversample,
    papr,
    passband_to_frame,
    welch_psd,
)

AE_CHAIN = dict(u=4, f_c=848.0, f_s=2048.0)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestPassbandChain:
    def test_constant_frame_power_preserved(self):
        x = np.ones(4, dtype=complex)
        y = frame_to_passband(x, u=2, f_c=0.0, f_s=8.0)
        assert len(y) == 8
        assert np.mean(np.abs(y) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_random_frame_power_preserved(self, rng):
        x = crandn(rng, 64)
        y = frame_to_passband(x, **AE_CHAIN)
        assert np.mean(np.abs(y) ** 2) == pytest.approx(
            np.mean(np.abs(x) ** 2), abs=1e-10)

    def test_round_trip(self, rng):
        x = crandn(rng, 64)
        back = passband_to_frame(frame_to_passband(x, **AE_CHAIN), **AE_CHAIN)
        np.testing.assert_allclose(back, x, atol=1e-12)

    def test_zero_input(self):
        y = passband_to_frame(np.zeros(256, complex), **AE_CHAIN)
        assert np.all(y == 0)

    def test_occupied_bins(self, rng):
        # 64 samples at u=4 under an 848 Hz carrier occupy bins 106..169,
        # i.e. 848..1352 Hz at 8 Hz spacing
        x = crandn(rng, 64)
        y = frame_to_passband(x, **AE_CHAIN)
        spectrum = np.abs(np.fft.fft(y))
        occupied = np.flatnonzero(spectrum > 1e-9)
        assert occupied.min() == 106
        assert occupied.max() == 169

    def test_fractional_carrier_rejected(self):
        with pytest.raises(ValueError, match="fractional"):
            frame_to_passband(np.ones(64, complex), u=4, f_c=850.0, f_s=2048.0)
        assert carrier_bin(848.0, 2048.0, 64, 4) == 106

    def test_adjoint_identity(self, rng):
        # <F x, y> = <x, u * G y> with G the downconverter
        u = AE_CHAIN["u"]
        x = crandn(rng, 64)
        y = crandn(rng, 256)
        lhs = np.sum(frame_to_passband(x, **AE_CHAIN) * np.conj(y))
        rhs = np.sum(x * np.conj(u * passband_to_frame(y, **AE_CHAIN)))
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_batched(self, rng):
        x = crandn(rng, 3, 5, 64)
        y = frame_to_passband(x, **AE_CHAIN)
        assert y.shape == (3, 5, 256)
        single = frame_to_passband(x[1, 2], **AE_CHAIN)
        np.testing.assert_allclose(y[1, 2], single, atol=1e-12)


class TestApplyChannel:
    def test_identity_channel(self, rng):
        x = crandn(rng, 200)
        h = np.zeros(16, complex)
        h[0] = 1.0
        y = apply_channel(x, h, NoiseSpec(variance=0.0))
        np.testing.assert_allclose(y, x, atol=1e-12)

    def test_delay_and_truncation(self, rng):
        x = crandn(rng, 50)
        h = np.zeros(8, complex)
        h[3] = 1.0
        y = apply_channel(x, h, NoiseSpec(variance=0.0))
        np.testing.assert_allclose(y[3:], x[:-3], atol=1e-12)
        np.testing.assert_allclose(y[:3], 0.0, atol=1e-12)

    def test_matches_double_sum_oracle(self, rng):
        # brute-force O(N*l) convolution, written independently
        x = crandn(rng, 40)
        h = crandn(rng, 9)
        y = convolve_truncate(x, h)
        oracle = np.zeros(40, dtype=complex)
        for i in range(40):
            acc = 0.0 + 0.0j
            for t in range(9):
                if 0 <= i - t < 40:
                    acc += h[t] * x[i - t]
            oracle[i] = acc
        np.testing.assert_allclose(y, oracle, atol=1e-10)

    def test_linearity(self, rng):
        x1, x2 = crandn(rng, 64), crandn(rng, 64)
        h = crandn(rng, 12)
        a, b = 1.7 - 0.3j, -0.4 + 2.1j
        lhs = convolve_truncate(a * x1 + b * x2, h)
        rhs = a * convolve_truncate(x1, h) + b * convolve_truncate(x2, h)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_noise_calibration(self):
        h = np.zeros(4, complex)
        h[0] = 1.0
        variance = 0.73
        rng = np.random.default_rng(999)
        x = np.zeros(1 << 20, dtype=complex)
        y = apply_channel(x, h, NoiseSpec(variance=variance), rng=rng)
        measured = np.mean(np.abs(y) ** 2)
        assert measured == pytest.approx(variance, rel=0.01)
        # circular symmetry: equal power in both quadrature components
        assert np.mean(y.real ** 2) == pytest.approx(variance / 2, rel=0.02)
        assert np.mean(y.imag ** 2) == pytest.approx(variance / 2, rel=0.02)

    def test_noise_seeded_from_spec(self):
        x = np.zeros(64, dtype=complex)
        h = np.ones(1, dtype=complex)
        a = apply_channel(x, h, NoiseSpec(variance=1.0, seed=5))
        b = apply_channel(x, h, NoiseSpec(variance=1.0, seed=5))
        np.testing.assert_array_equal(a, b)

    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            NoiseSpec(variance=-0.1)


class TestNoiseVariance:
    def test_unit_case(self):
        assert noise_variance(0.0, 1.0, 1) == pytest.approx(1.0, rel=1e-12)

    def test_reference_value(self):
        # 4 / (1.125 * 10^0.3) evaluated independently
        assert noise_variance(3.0, 1.125, 4) == pytest.approx(
            1.7819990528969682, rel=1e-12)
        assert noise_variance(3.0, 1.125, 1) == pytest.approx(
            0.44549976322424206, rel=1e-12)

    def test_vanishes_at_high_snr(self):
        assert noise_variance(300.0, 1.125, 4) < 1e-25

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            noise_variance(3.0, 0.0, 4)


class TestPapr:
    def test_single_tone_is_unity(self):
        n = 64
        x = np.exp(2j * np.pi * 5 * np.arange(n) / n)
        assert papr(x) == pytest.approx(1.0, abs=1e-12)

    def test_two_tones(self):
        n = 64
        t = np.arange(n)
        x = np.exp(2j * np.pi * 3 * t / n) + np.exp(2j * np.pi * 11 * t / n)
        assert papr(x) == pytest.approx(2.0, abs=1e-9)

    def test_matches_dense_oracle(self, rng):
        # QPSK-loaded OFDM symbol; oracle evaluates at 32x oversampling
        n = 64
        symbols = (1 - 2 * rng.integers(0, 2, n) +
                   1j * (1 - 2 * rng.integers(0, 2, n))) / np.sqrt(2)
        x = np.fft.ifft(symbols) * np.sqrt(n)
        measured_db = 10 * np.log10(papr(x, oversample_factor=4))
        dense = oversample(x, 32)
        oracle_db = 10 * np.log10(
            np.max(np.abs(dense) ** 2) / np.mean(np.abs(dense) ** 2))
        assert abs(measured_db - oracle_db) < 0.2

    def test_at_least_one_and_grows_with_oversampling(self, rng):
        for _ in range(20):
            x = crandn(rng, 48)
            plain = papr(x, oversample_factor=1)
            over = papr(x, oversample_factor=4)
            assert plain >= 1.0
            assert over >= plain - 1e-9

    def test_oversample_preserves_samples_and_power(self, rng):
        x = crandn(rng, 32)
        y = oversample(x, 4)
        np.testing.assert_allclose(y[::4], x, atol=1e-12)
        assert np.mean(np.abs(y) ** 2) == pytest.approx(
            np.mean(np.abs(x) ** 2), rel=1e-12)

    def test_rejects_zero_signal(self):
        with pytest.raises(ValueError):
            papr(np.zeros(16, complex))


class TestWelchPsd:
    def test_white_noise_integrates_to_power(self):
        rng = np.random.default_rng(42)
        power = 2.5
        x = np.sqrt(power / 2) * (rng.standard_normal(1 << 16) +
                                  1j * rng.standard_normal(1 << 16))
        freqs, density = welch_psd(x, f_s=2048.0)
        total = np.sum(density) * (freqs[1] - freqs[0])
        assert total == pytest.approx(power, rel=0.05)

    def test_tone_peaks_at_its_frequency(self):
        f_s, f0 = 2048.0, 848.0
        t = np.arange(1 << 14) / f_s
        x = np.exp(2j * np.pi * f0 * t)
        freqs, density = welch_psd(x, f_s=f_s)
        assert freqs[np.argmax(density)] == pytest.approx(f0, abs=f_s / 512)

    def test_frequencies_cover_one_sided_range(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
        freqs, _ = welch_psd(x, f_s=2048.0)
        assert freqs.min() >= 0.0
        assert freqs.max() < 2048.0
        assert np.all(np.diff(freqs) > 0)

    def test_rejects_short_input(self):
        with pytest.raises(ValueError):
            welch_psd(np.ones(100, complex), f_s=2048.0, segment_len=512)


class TestCcdf:
    def test_all_equal_values(self):
        out = ccdf([3.0, 3.0, 3.0], [2.0, 3.0, 4.0])
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0])

    def test_monotone_nonincreasing(self, rng):
        values = rng.exponential(size=500)
        out = ccdf(values, np.linspace(0, 5, 40))
        assert np.all(np.diff(out) <= 0)

    def test_uniform_sampling_oracle(self):
        rng = np.random.default_rng(7)
        values = rng.uniform(0, 1, 1000)
        (p,) = ccdf(values, [0.5])
        assert p == pytest.approx(0.5, abs=0.05)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ccdf([], [1.0])
