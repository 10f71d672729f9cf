"""End-to-end trainable autoencoder modem.

The encoder maps a block of bits to a complex baseband frame under an exact
per-frame unit-power constraint; the decoder maps a received frame back to
per-bit probabilities.  Both are dense networks trained jointly through a
differentiable channel layer that upconverts frames, concatenates them into a
packet, convolves with the channel impulse response (tail truncated) and adds
calibrated complex white noise.

The training objective is mean binary cross-entropy plus an optional peak
power penalty: the maximum squared magnitude of the 4x interpolated frame,
weighted by ``papr_weight``.  Because every frame is normalized to unit mean
power, that maximum equals the frame's peak-to-average power ratio.

Gradients flow through every stage, including the power normalization and the
convolution.  Complex cogradients follow the convention
``g = dL/d(Re) + 1j * dL/d(Im)``, under which the backward pass of any
complex-linear map is its conjugate transpose.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import dsp, nn


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class AEConfig:
    """Frame geometry, channel placement and training schedule of the modem."""

    bits_per_frame: int
    frame_len: int
    frames_per_packet: int
    upsample: int
    impulse_len: int
    carrier_hz: float
    sample_rate_hz: float
    papr_weight: float = 0.0
    train_snr_db: float = 3.0
    epochs: int = 256
    minibatch_packets: int = 128
    train_batches: int = 192
    test_batches: int = 64
    seed: int = 0
    enc_hidden: tuple[int, int] = (512, 1024)
    dec_hidden: tuple[int, int] = (1024, 512)
    papr_oversample: int = 4
    smooth_max_tau: float | None = None

    def __post_init__(self):
        for name in ("bits_per_frame", "frame_len", "frames_per_packet", "upsample"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.papr_weight < 0:
            raise ValueError("papr_weight must be >= 0")
        # raises if the carrier is off-grid
        dsp.carrier_bin(self.carrier_hz, self.sample_rate_hz,
                        self.frame_len, self.upsample)

    @property
    def rate(self) -> float:
        """Bits per baseband sample."""
        return self.bits_per_frame / self.frame_len

    @property
    def packet_len(self) -> int:
        return self.frames_per_packet * self.upsample * self.frame_len

    def train_noise_variance(self) -> float:
        """Channel-rate noise variance implied by the training SNR.

        ``train_snr_db`` is the per-baseband-sample signal-to-noise ratio
        (transmit power is 1), so the equivalent Eb/N0 is lower by the rate.
        """
        ebno_db = self.train_snr_db - 10.0 * np.log10(self.rate)
        return dsp.noise_variance(ebno_db, self.rate, self.upsample)


# ---------------------------------------------------------------------------
# complex pairing and power normalization

def to_complex(v: np.ndarray) -> np.ndarray:
    """Pack consecutive (re, im) pairs into complex samples."""
    if v.shape[-1] % 2 != 0:
        raise ValueError("real vector length must be even")
    return v[..., 0::2] + 1j * v[..., 1::2]


def from_complex(x: np.ndarray) -> np.ndarray:
    """Unpack complex samples into consecutive (re, im) pairs.

    Also serves as the cogradient map in both directions, since the pairing
    is an isometry between R^2n and C^n.
    """
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],), dtype=float)
    out[..., 0::2] = x.real
    out[..., 1::2] = x.imag
    return out


# Frames with mean power below this floor cannot meaningfully be scaled to
# unit power (an untrained encoder maps the all-zero block to exact zeros);
# they pass through unscaled.  Any frame that carries signal normalizes
# exactly, since float64 frame powers sit far above the floor.
_POWER_FLOOR = 1e-30


def power_normalize(x: np.ndarray):
    """Scale each frame to unit mean power.  Returns (frames, cache)."""
    n = x.shape[-1]
    power = np.mean(np.abs(x) ** 2, axis=-1, keepdims=True)
    clamped = np.maximum(power, _POWER_FLOOR)
    y = x / np.sqrt(clamped)
    return y, (x, clamped, power > _POWER_FLOOR, n)


def power_normalize_backward(grad_y: np.ndarray, cache) -> np.ndarray:
    x, clamped, active, n = cache
    s = 1.0 / np.sqrt(clamped)
    proj = np.sum(grad_y.real * x.real + grad_y.imag * x.imag,
                  axis=-1, keepdims=True)
    return grad_y * s - x * (np.where(active, proj, 0.0) / (n * clamped ** 1.5))


# ---------------------------------------------------------------------------
# model

class AEModel:
    """Encoder/decoder parameter stacks plus the configuration they serve."""

    def __init__(self, config: AEConfig, encoder, decoder, metadata=None):
        self.config = config
        self.encoder = encoder
        self.decoder = decoder
        self.metadata = dict(metadata or {})

    @classmethod
    def init(cls, config: AEConfig, rng: np.random.Generator) -> "AEModel":
        m, n = config.bits_per_frame, config.frame_len
        h1, h2 = config.enc_hidden
        d1, d2 = config.dec_hidden
        encoder = [
            nn.Dense.init(m, h1, rng), nn.Relu(), nn.BatchNorm(h1),
            nn.Dense.init(h1, h2, rng), nn.Relu(), nn.BatchNorm(h2),
            nn.Dense.init(h2, 2 * n, rng),
        ]
        decoder = [
            nn.Dense.init(2 * n, d1, rng), nn.Relu(), nn.BatchNorm(d1),
            nn.Dense.init(d1, d2, rng), nn.Relu(), nn.BatchNorm(d2),
            nn.Dense.init(d2, m, rng), nn.Sigmoid(),
        ]
        return cls(config, encoder, decoder)

    # -- forward passes ----------------------------------------------------

    def encode(self, bits: np.ndarray, train: bool = False) -> np.ndarray:
        """Map a (batch, m) array of {0,1} bits to unit-power complex frames."""
        frames, _ = self._encode_cached(bits, train)
        return frames

    def _encode_cached(self, bits: np.ndarray, train: bool):
        bits = np.asarray(bits)
        if bits.ndim != 2 or bits.shape[1] != self.config.bits_per_frame:
            raise ValueError(
                f"bits must be (batch, {self.config.bits_per_frame}), "
                f"got {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("bit values must be 0 or 1")
        v = nn.forward_stack(self.encoder, bits.astype(float), train=train)
        frames, pn_cache = power_normalize(to_complex(v))
        return frames, pn_cache

    def encoder_backward(self, grad_frames: np.ndarray, pn_cache) -> None:
        grad_v = from_complex(power_normalize_backward(grad_frames, pn_cache))
        nn.backward_stack(self.encoder, grad_v)

    def decode(self, frames: np.ndarray, train: bool = False) -> np.ndarray:
        """Map (batch, n) received frames to bit probabilities in (0, 1)."""
        frames = np.asarray(frames, dtype=complex)
        if frames.ndim != 2 or frames.shape[1] != self.config.frame_len:
            raise ValueError(
                f"frames must be (batch, {self.config.frame_len}), "
                f"got {frames.shape}")
        return nn.forward_stack(self.decoder, from_complex(frames), train=train)

    def decoder_backward(self, grad_probs: np.ndarray) -> np.ndarray:
        """Returns the complex cogradient with respect to the received frames."""
        grad_in = nn.backward_stack(self.decoder, grad_probs)
        return to_complex(grad_in)

    def params(self):
        return nn.stack_params(self.encoder) + nn.stack_params(self.decoder)

    def grads(self):
        return nn.stack_grads(self.encoder) + nn.stack_grads(self.decoder)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["enc_hidden"] = list(self.config.enc_hidden)
        cfg["dec_hidden"] = list(self.config.dec_hidden)
        return {
            "format_version": 1,
            "kind": "drillcomm-ae",
            "config": cfg,
            "metadata": self.metadata,
            "encoder": nn.stack_to_dict(self.encoder),
            "decoder": nn.stack_to_dict(self.decoder),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AEModel":
        if d.get("kind") != "drillcomm-ae" or d.get("format_version") != 1:
            raise ValueError("not a recognized model document")
        cfg = dict(d["config"])
        cfg["enc_hidden"] = tuple(cfg["enc_hidden"])
        cfg["dec_hidden"] = tuple(cfg["dec_hidden"])
        config = AEConfig(**cfg)
        return cls(config,
                   nn.stack_from_dict(d["encoder"]),
                   nn.stack_from_dict(d["decoder"]),
                   metadata=d.get("metadata"))


def hard_decision(probs: np.ndarray) -> np.ndarray:
    return (np.asarray(probs) >= 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# channel layer

def channel_layer(frames: np.ndarray, h: np.ndarray, variance: float,
                  u: int, f_c: float, f_s: float,
                  rng: np.random.Generator | None = None,
                  noise: np.ndarray | None = None):
    """Send (batch, p, n) frames through the packetized channel.

    Frames are upconverted, concatenated into packets, convolved with ``h``
    (tail discarded) and corrupted by complex white noise of the given
    variance per channel-rate sample.  A pre-drawn ``noise`` array of packet
    shape may be supplied to freeze the draw, e.g. for gradient checks.

    Returns (received frames, cache for the backward pass).
    """
    frames = np.asarray(frames, dtype=complex)
    if frames.ndim != 3:
        raise ValueError(f"frames must be (batch, p, n), got {frames.shape}")
    batch, p, n = frames.shape
    tx = dsp.frame_to_passband(frames, u, f_c, f_s)
    packets = tx.reshape(batch, p * u * n)
    rx = dsp.convolve_truncate(packets, h)
    if noise is not None:
        if noise.shape != packets.shape:
            raise ValueError("noise array must match packet shape")
        rx = rx + noise
    elif variance > 0:
        if rng is None:
            raise ValueError("rng required when noise variance > 0")
        rx = rx + dsp.complex_awgn(packets.shape, variance, rng)
    rx_frames = dsp.passband_to_frame(rx.reshape(batch, p, u * n), u, f_c, f_s)
    return rx_frames, (h, u, f_c, f_s, (batch, p, n))


def channel_layer_backward(grad_rx: np.ndarray, cache) -> np.ndarray:
    """Cogradient of the channel layer with respect to the sent frames."""
    h, u, f_c, f_s, (batch, p, n) = cache
    # adjoint of passband_to_frame is frame_to_passband / u
    g = dsp.frame_to_passband(grad_rx, u, f_c, f_s) / u
    g = dsp.convolve_truncate_adjoint(g.reshape(batch, p * u * n), h)
    # adjoint of frame_to_passband is u * passband_to_frame
    g = dsp.passband_to_frame(g.reshape(batch, p, u * n), u, f_c, f_s) * u
    return g


# ---------------------------------------------------------------------------
# loss

_PROB_CLAMP = 1e-12


def bce(bits: np.ndarray, probs: np.ndarray) -> float:
    """Mean per-bit binary cross-entropy, probabilities clamped away from 0/1."""
    bits = np.asarray(bits, dtype=float)
    p = np.clip(probs, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    return float(-np.mean(bits * np.log(p) + (1.0 - bits) * np.log1p(-p)))


def bce_backward(bits: np.ndarray, probs: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=float)
    p = np.clip(probs, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    inside = (probs > _PROB_CLAMP) & (probs < 1.0 - _PROB_CLAMP)
    grad = np.where(inside, (p - bits) / (p * (1.0 - p)), 0.0)
    return grad / probs.size


def papr_penalty(frames: np.ndarray, oversample_factor: int,
                 tau: float | None = None):
    """Per-frame peak power of the interpolated signal plus its cogradient.

    With ``tau`` unset the penalty is the hard maximum and the gradient is
    the subgradient at the peak sample; a positive ``tau`` switches to a
    softmax-weighted smooth maximum.
    """
    xt = dsp.oversample(frames, oversample_factor)
    power = np.abs(xt) ** 2
    if tau is None:
        idx = np.argmax(power, axis=-1)
        rows = np.arange(frames.shape[0])
        vals = power[rows, idx]
        grad_xt = np.zeros_like(xt)
        grad_xt[rows, idx] = 2.0 * xt[rows, idx]
    else:
        shifted = (power - power.max(axis=-1, keepdims=True)) / tau
        w = np.exp(shifted)
        w /= w.sum(axis=-1, keepdims=True)
        vals = np.sum(w * power, axis=-1)
        coeff = w * (1.0 + (power - vals[:, None]) / tau)
        grad_xt = coeff * 2.0 * xt
    return vals, grad_xt


def loss_terms(bits: np.ndarray, probs: np.ndarray, frames: np.ndarray,
               alpha: float, oversample_factor: int = 4,
               tau: float | None = None):
    """(total, bce, mean peak power) of the composite objective."""
    bce_val = bce(bits, probs)
    papr_vals, _ = papr_penalty(frames, oversample_factor, tau)
    papr_mean = float(papr_vals.mean())
    return bce_val + alpha * papr_mean, bce_val, papr_mean


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainReport:
    """Per-epoch training record; index 0 of each list is epoch 1."""

    epochs: int
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    test_bce: list[float] = field(default_factory=list)
    test_papr: list[float] = field(default_factory=list)
    initial_test_loss: float = float("nan")
    initial_test_bce: float = float("nan")
    initial_test_papr: float = float("nan")
    wall_time_s: float = 0.0
    seed: int = 0


def _forward_backward(model: AEModel, bits: np.ndarray, h: np.ndarray,
                      noise: np.ndarray, train: bool,
                      with_grad: bool):
    """One full pass over a minibatch of (batch, p, m) bit blocks."""
    cfg = model.config
    batch, p, m = bits.shape
    flat_bits = bits.reshape(batch * p, m)
    frames, pn_cache = model._encode_cached(flat_bits, train)
    rx, ch_cache = channel_layer(frames.reshape(batch, p, cfg.frame_len),
                                 h, 0.0, cfg.upsample, cfg.carrier_hz,
                                 cfg.sample_rate_hz, noise=noise)
    probs = model.decode(rx.reshape(batch * p, cfg.frame_len), train=train)

    bce_val = bce(flat_bits, probs)
    papr_vals, papr_grad_xt = papr_penalty(frames, cfg.papr_oversample,
                                           cfg.smooth_max_tau)
    papr_mean = float(papr_vals.mean())
    total = bce_val + cfg.papr_weight * papr_mean

    if with_grad:
        g_rx = model.decoder_backward(bce_backward(flat_bits, probs))
        g_frames = channel_layer_backward(
            g_rx.reshape(batch, p, cfg.frame_len), ch_cache)
        g_frames = g_frames.reshape(batch * p, cfg.frame_len)
        if cfg.papr_weight > 0:
            g_frames = g_frames + (cfg.papr_weight / (batch * p)) * \
                dsp.oversample_adjoint(papr_grad_xt, cfg.frame_len,
                                       cfg.papr_oversample)
        model.encoder_backward(g_frames, pn_cache)
    return total, bce_val, papr_mean


def _evaluate(model: AEModel, bits_set, noise_set, h) -> tuple[float, float, float]:
    totals = []
    for bits, noise in zip(bits_set, noise_set):
        totals.append(_forward_backward(model, bits, h, noise,
                                        train=False, with_grad=False))
    arr = np.array(totals)
    return tuple(float(v) for v in arr.mean(axis=0))


def train(config: AEConfig, channel_impulse: np.ndarray):
    """Train the modem against one fixed channel realization.

    The training SNR (hence the noise variance) is constant for the whole
    run.  Training bits form a fixed dataset reused every epoch; the noise is
    redrawn every minibatch.  The test set has frozen bits and noise so the
    per-epoch test loss is comparable across epochs.

    Returns (model, report).  Raises :class:`TrainingDiverged` on a
    non-finite loss.
    """
    cfg = config
    h = np.asarray(channel_impulse, dtype=complex)
    if len(h) != cfg.impulse_len:
        raise ValueError(
            f"impulse length {len(h)} does not match config ({cfg.impulse_len})")

    ss = np.random.SeedSequence(cfg.seed)
    init_ss, train_bits_ss, noise_ss, test_ss = ss.spawn(4)
    model = AEModel.init(cfg, np.random.default_rng(init_ss))
    variance = cfg.train_noise_variance()

    bshape = (cfg.minibatch_packets, cfg.frames_per_packet, cfg.bits_per_frame)
    pshape = (cfg.minibatch_packets, cfg.packet_len)
    bits_rng = np.random.default_rng(train_bits_ss)
    train_bits = [bits_rng.integers(0, 2, size=bshape, dtype=np.uint8)
                  for _ in range(cfg.train_batches)]
    test_rng = np.random.default_rng(test_ss)
    test_bits = [test_rng.integers(0, 2, size=bshape, dtype=np.uint8)
                 for _ in range(cfg.test_batches)]
    test_noise = [dsp.complex_awgn(pshape, variance, test_rng)
                  for _ in range(cfg.test_batches)]

    noise_rng = np.random.default_rng(noise_ss)
    optimizer = nn.Adam(model.params(), lr=1e-3)
    report = TrainReport(epochs=cfg.epochs, seed=cfg.seed)
    t0 = time.perf_counter()

    init_eval = _evaluate(model, test_bits, test_noise, h)
    report.initial_test_loss, report.initial_test_bce, report.initial_test_papr = init_eval

    for epoch in range(1, cfg.epochs + 1):
        epoch_losses = []
        for step, bits in enumerate(train_bits):
            noise = dsp.complex_awgn(pshape, variance, noise_rng)
            total, _, _ = _forward_backward(model, bits, h, noise,
                                            train=True, with_grad=True)
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, minibatch {step}")
            optimizer.step(model.grads())
            epoch_losses.append(total)
        test_total, test_bce_val, test_papr_val = _evaluate(
            model, test_bits, test_noise, h)
        report.train_loss.append(float(np.mean(epoch_losses)))
        report.test_loss.append(test_total)
        report.test_bce.append(test_bce_val)
        report.test_papr.append(test_papr_val)

    report.wall_time_s = time.perf_counter() - t0
    model.metadata.update({
        "trained_epochs": cfg.epochs,
        "final_test_loss": report.test_loss[-1],
        "final_test_bce": report.test_bce[-1],
        "seed": cfg.seed,
    })
    return model, report


def transmit_receive(model: AEModel, bits: np.ndarray, h: np.ndarray,
                     variance: float, rng: np.random.Generator) -> np.ndarray:
    """Inference-mode pass: (batch, p, m) bits to received bit probabilities."""
    cfg = model.config
    batch, p, m = bits.shape
    frames = model.encode(bits.reshape(batch * p, m))
    rx, _ = channel_layer(frames.reshape(batch, p, cfg.frame_len),
                          h, variance, cfg.upsample, cfg.carrier_hz,
                          cfg.sample_rate_hz, rng=rng)
    probs = model.decode(rx.reshape(batch * p, cfg.frame_len))
    return probs.reshape(batch, p, m)
