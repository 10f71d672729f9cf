"""Shared signal-path arithmetic for both modems.

Frames are complex baseband vectors of length n; a packet is p frames
upconverted and concatenated into p*u*n channel-rate samples.  All transforms
here are DFT-based and unitary, so mean power is preserved end to end and the
passband/baseband pair is exactly invertible.  The carrier must land on an
integer bin of the u*n-point spectrum, which holds for every configuration
this simulator supports.

All functions operate on the last axis and broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal


@dataclass(frozen=True)
class NoiseSpec:
    """Per-sample complex noise variance at channel rate, plus the stream seed."""

    variance: float
    seed: int = 0

    def __post_init__(self):
        # variance 0 is permitted so noiseless runs are representable exactly
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")


def carrier_bin(f_c: float, f_s: float, n: int, u: int) -> int:
    """Index of the carrier on the u*n-point spectrum; must be an integer."""
    k0 = f_c * u * n / f_s
    if abs(k0 - round(k0)) > 1e-9:
        raise ValueError(
            f"carrier does not land on an integer bin: f_c*u*n/f_s = {k0!r} "
            f"(fractional part {k0 - np.floor(k0):.6g})")
    return int(round(k0))


def frame_to_passband(x: np.ndarray, u: int, f_c: float, f_s: float) -> np.ndarray:
    """Upsample a baseband frame by u and place it at the carrier.

    Unitary DFT, embed bin i at bin k0+i of the u*n spectrum, unitary inverse
    DFT, then scale by sqrt(u) so mean power is preserved.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    k0 = carrier_bin(f_c, f_s, n, u)
    if k0 + n > u * n:
        raise ValueError("occupied band exceeds the channel-rate spectrum")
    spec = np.fft.fft(x, axis=-1) / np.sqrt(n)
    padded = np.zeros(x.shape[:-1] + (u * n,), dtype=complex)
    padded[..., k0:k0 + n] = spec
    y = np.fft.ifft(padded, axis=-1) * np.sqrt(u * n)
    return y * np.sqrt(u)


def passband_to_frame(y: np.ndarray, u: int, f_c: float, f_s: float) -> np.ndarray:
    """Extract the carrier band and return the baseband frame.

    Exact inverse of :func:`frame_to_passband`; as a linear map it equals
    1/u times that function's adjoint.
    """
    y = np.asarray(y, dtype=complex)
    un = y.shape[-1]
    if un % u != 0:
        raise ValueError(f"passband length {un} is not a multiple of u={u}")
    n = un // u
    k0 = carrier_bin(f_c, f_s, n, u)
    spec = np.fft.fft(y, axis=-1) / np.sqrt(un)
    band = spec[..., k0:k0 + n]
    x = np.fft.ifft(band, axis=-1) * np.sqrt(n)
    return x / np.sqrt(u)


def convolve_truncate(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Linear convolution with h, truncated to the input length."""
    x = np.asarray(x, dtype=complex)
    h = np.asarray(h, dtype=complex)
    n = x.shape[-1]
    nfft = n + len(h) - 1
    hf = np.fft.fft(h, n=nfft)
    y = np.fft.ifft(np.fft.fft(x, n=nfft, axis=-1) * hf, axis=-1)
    return y[..., :n]


def convolve_truncate_adjoint(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`convolve_truncate` in the signal argument.

    Correlation with the conjugate of h, restricted to the kept support.
    """
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    n = g.shape[-1]
    nfft = n + len(h) - 1
    hf = np.fft.fft(h, n=nfft)
    y = np.fft.ifft(np.fft.fft(g, n=nfft, axis=-1) * np.conj(hf), axis=-1)
    return y[..., :n]


def complex_awgn(shape, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise, variance per complex sample."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(packet: np.ndarray, h: np.ndarray, noise: NoiseSpec,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Convolve a packet with the impulse response and add calibrated noise.

    The convolution tail beyond the packet length is discarded.  Noise is
    drawn from ``rng`` when given, otherwise from a generator seeded with
    ``noise.seed``.
    """
    y = convolve_truncate(packet, h)
    if noise.variance > 0:
        if rng is None:
            rng = np.random.default_rng(noise.seed)
        y = y + complex_awgn(y.shape, noise.variance, rng)
    return y


def noise_variance(ebno_db: float, r: float, u: int) -> float:
    """Channel-rate complex noise variance for a given Eb/N0 in dB.

    ``r`` is bits per baseband sample.  The factor u converts the
    per-baseband-sample variance to channel rate: power-preserving upsampling
    spreads fixed symbol energy over u times as many samples.
    """
    if not r > 0:
        raise ValueError(f"rate must be > 0, got {r}")
    if u < 1:
        raise ValueError(f"upsampling factor must be >= 1, got {u}")
    return u / (r * 10.0 ** (ebno_db / 10.0))


def oversample(x: np.ndarray, factor: int) -> np.ndarray:
    """DFT zero-pad interpolation by an integer factor.

    Bins below Nyquist stay in place, bins at and above Nyquist move to the
    top of the longer spectrum.  The original samples appear unchanged every
    ``factor`` output samples and mean power is preserved.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    if factor < 1:
        raise ValueError("oversampling factor must be >= 1")
    if factor == 1:
        return x.copy()
    half = n // 2
    spec = np.fft.fft(x, axis=-1)
    padded = np.zeros(x.shape[:-1] + (factor * n,), dtype=complex)
    padded[..., :n - half] = spec[..., :n - half]
    padded[..., factor * n - half:] = spec[..., n - half:]
    return np.fft.ifft(padded, axis=-1) * factor


def oversample_adjoint(g: np.ndarray, n: int, factor: int) -> np.ndarray:
    """Adjoint of :func:`oversample` for backpropagation."""
    g = np.asarray(g, dtype=complex)
    if factor == 1:
        return g.copy()
    half = n // 2
    spec = np.fft.fft(g, axis=-1)
    band = np.zeros(g.shape[:-1] + (n,), dtype=complex)
    band[..., :n - half] = spec[..., :n - half]
    band[..., n - half:] = spec[..., factor * n - half:]
    # scales: factor from the forward, n/(factor*n) from the fft/ifft pair
    return np.fft.ifft(band, axis=-1)


def papr(x: np.ndarray, oversample_factor: int = 4) -> np.ndarray:
    """Peak-to-average power ratio of the interpolated signal (linear, >= 1)."""
    x = np.asarray(x, dtype=complex)
    power = np.abs(oversample(x, oversample_factor)) ** 2
    mean = power.mean(axis=-1)
    if np.any(mean == 0):
        raise ValueError("PAPR of an all-zero signal is undefined")
    return power.max(axis=-1) / mean


def welch_psd(x: np.ndarray, f_s: float, segment_len: int = 512,
              overlap: float = 0.5):
    """Hann-windowed averaged periodogram of a complex signal.

    Returns (frequencies in [0, f_s), density) sorted by frequency; the
    density integrates to the mean signal power.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("welch_psd expects a 1-D signal")
    if len(x) < segment_len:
        raise ValueError(
            f"signal length {len(x)} shorter than segment length {segment_len}")
    freqs, density = sp_signal.welch(
        x, fs=f_s, window="hann", nperseg=segment_len,
        noverlap=int(round(overlap * segment_len)), detrend=False,
        return_onesided=False, scaling="density")
    freqs = np.where(freqs < 0, freqs + f_s, freqs)
    order = np.argsort(freqs)
    return freqs[order], density[order]


def ccdf(values, thresholds):
    """Fraction of values strictly above each threshold."""
    values = np.asarray(values, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if values.size == 0:
        raise ValueError("ccdf needs at least one value")
    return (values[None, :] > thresholds[:, None]).mean(axis=1)
