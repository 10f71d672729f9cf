"""Non-contiguous OFDM reference modem.

QPSK on a subset of subcarriers chosen to sit inside the channel passbands,
with a cyclic prefix and known-CSI one-tap zero-forcing equalization.  The
channel impulse response is far longer than the short prefix, so residual
intersymbol interference remains by design; this is the regime the learned
modem is compared against.

Subcarrier i of the size-``nfft`` symbol occupies the absolute frequency
``f_c + i * f_s / (u * nfft)``; for the default configuration that spacing is
exactly 1 Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def subcarrier_indices(passbands, f_c: float, nfft: int, f_s: float,
                       u: int) -> np.ndarray:
    """Sorted indices whose absolute frequency falls inside a passband.

    Band edges are inclusive on both sides.
    """
    spacing = f_s / (u * nfft)
    band_top = f_c + f_s / u
    idx = set()
    for low, high in passbands:
        if low > high:
            raise ValueError(f"passband ({low}, {high}) has low > high")
        if low < f_c or high >= band_top:
            raise ValueError(
                f"passband ({low}, {high}) outside the occupied band "
                f"[{f_c}, {band_top})")
        for k in range(nfft):
            f = f_c + k * spacing
            if low <= f <= high:
                idx.add(k)
    return np.array(sorted(idx), dtype=int)


@dataclass(frozen=True)
class OfdmConfig:
    """Symbol geometry and subcarrier allocation of the baseline."""

    nfft: int = 512
    cp: int = 64
    passbands: tuple[tuple[float, float], ...] = ((878.0, 1049.0), (1169.0, 1320.0))
    carrier_hz: float = 848.0
    sample_rate_hz: float = 2048.0
    upsample: int = 4
    frames_per_packet: int = 4
    active: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        active = subcarrier_indices(self.passbands, self.carrier_hz,
                                    self.nfft, self.sample_rate_hz, self.upsample)
        if len(active) == 0:
            raise ValueError("no active subcarriers inside the passbands")
        object.__setattr__(self, "active", active)

    @property
    def frame_len(self) -> int:
        return self.nfft + self.cp

    @property
    def bits_per_frame(self) -> int:
        return 2 * len(self.active)

    @property
    def rate(self) -> float:
        """Bits per baseband sample, counting the prefix."""
        return self.bits_per_frame / self.frame_len

    @property
    def packet_len(self) -> int:
        return self.frames_per_packet * self.upsample * self.frame_len


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-labelled QPSK: bit pairs (b0, b1) to unit-modulus symbols.

    b1 selects the real sign, b0 the imaginary sign; 00 maps to (1+1j)/sqrt2.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2 != 0:
        raise ValueError("qpsk needs an even number of bits")
    b0 = bits[..., 0::2]
    b1 = bits[..., 1::2]
    return _INV_SQRT2 * ((1.0 - 2.0 * b1) + 1j * (1.0 - 2.0 * b0))


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    """Quadrant-sign hard decisions back to bit pairs."""
    symbols = np.asarray(symbols)
    bits = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],), dtype=np.uint8)
    bits[..., 0::2] = symbols.imag < 0
    bits[..., 1::2] = symbols.real < 0
    return bits


def load_symbols(symbols: np.ndarray, config: OfdmConfig) -> np.ndarray:
    """Assemble a frame from per-subcarrier symbols (test hook included).

    Symbols land on the active bins of a unitary size-nfft inverse DFT, the
    last ``cp`` output samples are prepended, and the result is scaled by
    sqrt(nfft / n_active) so the data-bearing part of every frame has unit
    mean power exactly.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape[-1] != len(config.active):
        raise ValueError(
            f"expected {len(config.active)} symbols, got {symbols.shape[-1]}")
    spectrum = np.zeros(symbols.shape[:-1] + (config.nfft,), dtype=complex)
    spectrum[..., config.active] = symbols
    body = np.fft.ifft(spectrum, axis=-1) * np.sqrt(config.nfft)
    frame = np.concatenate([body[..., -config.cp:], body], axis=-1)
    return frame * np.sqrt(config.nfft / len(config.active))


def ofdm_modulate(bits: np.ndarray, config: OfdmConfig) -> np.ndarray:
    """Map a block of bits to one baseband frame of nfft + cp samples."""
    bits = np.asarray(bits)
    if bits.shape[-1] != config.bits_per_frame:
        raise ValueError(
            f"expected {config.bits_per_frame} bits per frame, "
            f"got {bits.shape[-1]}")
    return load_symbols(qpsk_map(bits), config)


def known_csi(channel: ChannelRealization, config: OfdmConfig) -> np.ndarray:
    """Complex gain of each active subcarrier under the simulated channel.

    Evaluates the transform of the very impulse response the simulator
    convolves with at the absolute subcarrier frequencies, so the gains
    include whatever the response sampling and truncation did to the channel.
    """
    h = np.asarray(channel.impulse, dtype=complex)
    spacing = config.sample_rate_hz / (config.upsample * config.nfft)
    freqs = config.carrier_hz + config.active * spacing
    t = np.arange(len(h))
    gains = np.exp(-2j * np.pi * np.outer(freqs, t) / channel.sample_rate) @ h
    tiny = np.abs(gains) < 1e-12
    if np.any(tiny):
        raise ValueError(
            f"zero channel gain on active subcarriers {config.active[tiny]}; "
            "zero-forcing equalization would diverge")
    return gains


def ofdm_demodulate(frame: np.ndarray, config: OfdmConfig,
                    csi: np.ndarray) -> np.ndarray:
    """Hard bit decisions from one received baseband frame.

    Drops the prefix, takes the unitary DFT, divides each active bin by its
    known gain and demaps by quadrant.
    """
    frame = np.asarray(frame, dtype=complex)
    if frame.shape[-1] != config.frame_len:
        raise ValueError(
            f"expected frame of {config.frame_len} samples, "
            f"got {frame.shape[-1]}")
    if csi.shape[-1] != len(config.active):
        raise ValueError("csi length does not match the active subcarrier set")
    body = frame[..., config.cp:]
    spectrum = np.fft.fft(body, axis=-1) / np.sqrt(config.nfft)
    return qpsk_demap(spectrum[..., config.active] / csi)
