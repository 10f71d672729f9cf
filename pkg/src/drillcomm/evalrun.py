"""Reproducible evaluation runs: channel export, training, BER/PAPR/PSD.

Every command writes CSV outputs whose first line carries the configuration
hash, plus a JSON manifest with seed, code version, timestamps and a checksum
per output file.  Reruns with the same config and seed produce byte-identical
CSV payloads; only manifest timestamps differ.

Monte Carlo sweeps give every Eb/N0 point its own random stream derived from
(master seed, point index), so points can be evaluated in any order or in
parallel without changing the results.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, ae, dsp, ofdm as ofdm_mod
from .channel import ChannelRealization
from .config import ConfigError, SimConfig


# ---------------------------------------------------------------------------
# output plumbing

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    code_version: str
    started: str
    finished: str
    outputs: dict[str, str]

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")


class _Run:
    """Collects output files and writes the manifest when closed."""

    def __init__(self, sim: SimConfig, out_dir: Path):
        self.sim = sim
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.started = datetime.now(timezone.utc).isoformat()
        self.files: list[Path] = []

    def csv(self, name: str, header, rows) -> Path:
        path = self.out_dir / name
        write_csv(path, header, rows, self.sim.config_hash())
        self.files.append(path)
        return path

    def add(self, path: Path) -> None:
        self.files.append(path)

    def finish(self, manifest_name: str) -> RunManifest:
        manifest = RunManifest(
            config_hash=self.sim.config_hash(),
            seed=self.sim.seed,
            code_version=__version__,
            started=self.started,
            finished=datetime.now(timezone.utc).isoformat(),
            outputs={p.name: _sha256(p) for p in self.files},
        )
        manifest.write(self.out_dir / manifest_name)
        return manifest


# ---------------------------------------------------------------------------
# systems under test

class AeSystem:
    """Adapter running the trained modem packet by packet."""

    def __init__(self, model: ae.AEModel, channel: ChannelRealization):
        cfg = model.config
        self.model = model
        self.h = channel.impulse
        self.upsample = cfg.upsample
        self.noise_rate = cfg.rate
        self.bits_per_packet = cfg.frames_per_packet * cfg.bits_per_frame
        self._bshape = (cfg.frames_per_packet, cfg.bits_per_frame)

    def run(self, n_packets: int, variance: float, rng: np.random.Generator):
        bits = rng.integers(0, 2, size=(n_packets,) + self._bshape, dtype=np.uint8)
        probs = ae.transmit_receive(self.model, bits, self.h, variance, rng)
        errors = int(np.sum(ae.hard_decision(probs) != bits))
        return errors, bits.size

    def frames(self, n_frames: int, rng: np.random.Generator) -> np.ndarray:
        bits = rng.integers(0, 2, size=(n_frames, self.model.config.bits_per_frame),
                            dtype=np.uint8)
        return self.model.encode(bits)

    def passband_stream(self, n_packets: int, rng: np.random.Generator) -> np.ndarray:
        cfg = self.model.config
        frames = self.frames(n_packets * cfg.frames_per_packet, rng)
        tx = dsp.frame_to_passband(frames, cfg.upsample, cfg.carrier_hz,
                                   cfg.sample_rate_hz)
        return tx.reshape(-1)


class OfdmSystem:
    """Adapter running the NC-OFDM baseline with known CSI.

    Noise is calibrated against bits per data-bearing sample (the cyclic
    prefix repeats signal it does not pay for), which makes the flat-channel
    BER land on the textbook QPSK curve.
    """

    def __init__(self, config: ofdm_mod.OfdmConfig, channel: ChannelRealization):
        self.config = config
        self.h = channel.impulse
        self.csi = ofdm_mod.known_csi(channel, config)
        self.upsample = config.upsample
        self.noise_rate = config.bits_per_frame / config.nfft
        self.bits_per_packet = config.frames_per_packet * config.bits_per_frame

    def run(self, n_packets: int, variance: float, rng: np.random.Generator):
        cfg = self.config
        bits = rng.integers(
            0, 2, size=(n_packets, cfg.frames_per_packet, cfg.bits_per_frame),
            dtype=np.uint8)
        frames = ofdm_mod.ofdm_modulate(bits, cfg)
        rx, _ = ae.channel_layer(frames, self.h, variance, cfg.upsample,
                                 cfg.carrier_hz, cfg.sample_rate_hz, rng=rng)
        decided = ofdm_mod.ofdm_demodulate(rx, cfg, self.csi)
        return int(np.sum(decided != bits)), bits.size

    def frames(self, n_frames: int, rng: np.random.Generator) -> np.ndarray:
        bits = rng.integers(0, 2, size=(n_frames, self.config.bits_per_frame),
                            dtype=np.uint8)
        return ofdm_mod.ofdm_modulate(bits, self.config)

    def passband_stream(self, n_packets: int, rng: np.random.Generator) -> np.ndarray:
        cfg = self.config
        frames = self.frames(n_packets * cfg.frames_per_packet, rng)
        tx = dsp.frame_to_passband(frames, cfg.upsample, cfg.carrier_hz,
                                   cfg.sample_rate_hz)
        return tx.reshape(-1)


def make_system(name: str, sim: SimConfig, channel: ChannelRealization,
                model: ae.AEModel | None = None):
    if name == "ae":
        if model is None:
            raise ConfigError("system 'ae' requires a trained model file")
        check_model_matches(model, sim)
        return AeSystem(model, channel)
    if name == "ofdm":
        return OfdmSystem(sim.ofdm_config(), channel)
    raise ConfigError(f"unknown system {name!r} (expected 'ae' or 'ofdm')")


def check_model_matches(model: ae.AEModel, sim: SimConfig) -> None:
    """Reject a model whose wire format disagrees with the configuration."""
    want = sim.ae_config()
    have = model.config
    for name in ("bits_per_frame", "frame_len", "frames_per_packet", "upsample",
                 "impulse_len", "carrier_hz", "sample_rate_hz",
                 "enc_hidden", "dec_hidden"):
        if getattr(want, name) != getattr(have, name):
            raise ConfigError(
                f"model/config mismatch on {name}: model has "
                f"{getattr(have, name)!r}, config implies {getattr(want, name)!r}")


# ---------------------------------------------------------------------------
# BER sweep

@dataclass(frozen=True)
class BerPoint:
    ebno_db: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def ci_half_width(self) -> float:
        """95% normal-approximation half width of the BER estimate."""
        if self.bits == 0:
            return float("nan")
        p = self.ber
        return 1.96 * np.sqrt(max(p * (1.0 - p), 0.0) / self.bits)


def measure_ber(system, ebno_db: float, min_errors: int, max_bits: int,
                seed_seq: np.random.SeedSequence,
                batch_packets: int = 32) -> BerPoint:
    """Count bit errors until the stopping rule is met."""
    rng = np.random.default_rng(seed_seq)
    variance = dsp.noise_variance(ebno_db, system.noise_rate, system.upsample)
    bits = errors = 0
    while errors < min_errors and bits < max_bits:
        e, b = system.run(batch_packets, variance, rng)
        errors += e
        bits += b
    return BerPoint(ebno_db=float(ebno_db), bits=bits, errors=errors)


def ber_sweep(system, sweep, min_errors: int, max_bits: int,
              master_seed: int) -> list[BerPoint]:
    points = []
    for index, ebno_db in enumerate(sweep):
        seed_seq = np.random.SeedSequence(entropy=master_seed,
                                          spawn_key=(index,))
        points.append(measure_ber(system, ebno_db, min_errors, max_bits, seed_seq))
    return points


# ---------------------------------------------------------------------------
# metrics

def papr_samples_db(system, n_frames: int, master_seed: int,
                    oversample_factor: int = 4) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    frames = system.frames(n_frames, rng)
    return 10.0 * np.log10(dsp.papr(frames, oversample_factor))


def in_band_power_fraction(frames: np.ndarray, f_c: float, f_s: float,
                           u: int, bands) -> float:
    """Share of mean frame power that falls inside the given absolute bands."""
    spectrum = np.mean(np.abs(np.fft.fft(frames, axis=-1)) ** 2, axis=0)
    n = frames.shape[-1]
    freqs = f_c + np.arange(n) * f_s / (u * n)
    mask = np.zeros(n, dtype=bool)
    for low, high in bands:
        mask |= (freqs >= low) & (freqs <= high)
    return float(spectrum[mask].sum() / spectrum.sum())


# ---------------------------------------------------------------------------
# commands

def run_channel_export(sim: SimConfig, out_dir) -> RunManifest:
    run = _Run(sim, out_dir)
    realization = sim.channel()
    mag = np.abs(realization.response)
    mag_db = 20.0 * np.log10(np.maximum(mag, 1e-300))
    phase = np.angle(realization.response)
    run.csv("response.csv", ["frequency_hz", "magnitude_db", "phase_rad"],
            ((float(f), float(m), float(ph))
             for f, m, ph in zip(realization.freq_grid, mag_db, phase)))
    run.csv("impulse.csv", ["index", "re", "im"],
            ((i, float(v.real), float(v.imag))
             for i, v in enumerate(realization.impulse)))
    return run.finish("channel_manifest.json")


def run_train(sim: SimConfig, out_dir) -> RunManifest:
    run = _Run(sim, out_dir)
    realization = sim.channel()
    model, report = ae.train(sim.ae_config(), realization.impulse)
    model.metadata["config_hash"] = sim.config_hash()

    model_path = run.out_dir / "model.json"
    model_path.write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")
    run.add(model_path)

    rows = [(0, "", _fmt(report.initial_test_loss), _fmt(report.initial_test_bce),
             _fmt(report.initial_test_papr))]
    for i in range(report.epochs):
        rows.append((i + 1, _fmt(report.train_loss[i]), _fmt(report.test_loss[i]),
                     _fmt(report.test_bce[i]), _fmt(report.test_papr[i])))
    run.csv("train_report.csv",
            ["epoch", "train_loss", "test_loss", "test_bce", "test_papr"], rows)
    return run.finish("train_manifest.json")


def load_model(path) -> ae.AEModel:
    try:
        with open(path) as fh:
            return ae.AEModel.from_dict(json.load(fh))
    except OSError as exc:
        raise ConfigError(f"model: cannot read {path!r}: {exc}") from exc


def run_eval_ber(sim: SimConfig, system_name: str, out_dir,
                 model: ae.AEModel | None = None,
                 sweep=None) -> RunManifest:
    run = _Run(sim, out_dir)
    system = make_system(system_name, sim, sim.channel(), model)
    sweep = sim.ebno_sweep if sweep is None else tuple(sweep)
    points = ber_sweep(system, sweep, sim.min_errors, sim.max_bits, sim.seed)
    for pt in points:
        if pt.errors < sim.min_errors:
            print(f"warning: only {pt.errors} errors at {pt.ebno_db} dB "
                  f"after {pt.bits} bits (stopping rule unreachable)")
    run.csv("ber.csv",
            ["ebno_db", "bits", "bit_errors", "ber", "ci_half_width"],
            ((pt.ebno_db, pt.bits, pt.errors, pt.ber, pt.ci_half_width)
             for pt in points))
    return run.finish("ber_manifest.json")


def run_eval_papr(sim: SimConfig, system_name: str, out_dir,
                  model: ae.AEModel | None = None) -> RunManifest:
    run = _Run(sim, out_dir)
    system = make_system(system_name, sim, sim.channel(), model)
    samples = papr_samples_db(system, sim.papr_frames, sim.seed)
    thresholds = np.arange(0.0, sim.papr_db_max + sim.papr_db_step / 2,
                           sim.papr_db_step)
    probs = dsp.ccdf(samples, thresholds)
    run.csv("papr_ccdf.csv", ["papr_db", "prob_exceed"],
            ((float(t), float(p)) for t, p in zip(thresholds, probs)))
    return run.finish("papr_manifest.json")


def run_eval_psd(sim: SimConfig, system_name: str, out_dir,
                 model: ae.AEModel | None = None,
                 n_packets: int = 64) -> RunManifest:
    run = _Run(sim, out_dir)
    system = make_system(system_name, sim, sim.channel(), model)
    rng = np.random.default_rng(np.random.SeedSequence(sim.seed))
    stream = system.passband_stream(n_packets, rng)
    freqs, density = dsp.welch_psd(stream, sim.f_s, sim.psd_segment_len,
                                   sim.psd_overlap)
    density_db = 10.0 * np.log10(np.maximum(density, 1e-300))
    run.csv("psd.csv", ["frequency_hz", "density_db"],
            ((float(f), float(d)) for f, d in zip(freqs, density_db)))
    return run.finish("psd_manifest.json")
